#include "dexflow/cdr.hpp"

#include <deque>

namespace dexflow {

namespace {
const std::set<int> kEmpty;
}

const std::set<int>& Cdr::region_of(int pp, const Tag& tag) const
{
    auto it = region.find({pp, tag});
    return it == region.end() ? kEmpty : it->second;
}

std::optional<int> Cdr::jun_of(int pp, const Tag& tag) const
{
    auto it = jun.find({pp, tag});
    if (it == jun.end()) return std::nullopt;
    return it->second;
}

std::set<Tag> Cdr::tags_at(int pp) const
{
    std::set<Tag> out;
    for (auto it = region.lower_bound({pp, Tag{}}); it != region.end() && it->first.first == pp; ++it)
        out.insert(it->first.second);
    for (auto it = jun.lower_bound({pp, Tag{}}); it != jun.end() && it->first.first == pp; ++it)
        out.insert(it->first.second);
    return out;
}

bool SoapReport::ok() const
{
    for (bool b : holds)
        if (!b) return false;
    return true;
}

bool is_branching(const Cfg& g, int pp)
{
    std::set<std::optional<int>> dest;
    for (const auto& s : g.at(pp)) dest.insert(s.target);
    return dest.size() >= 2;
}

std::map<int, int> immediate_postdominators(const Cfg& g)
{
    const int n = g.size;
    const int exit = 0;
    // Points from which the exit is reachable.
    std::vector<std::vector<int>> preds(static_cast<size_t>(n + 1));
    for (int i = 1; i <= n; ++i)
        for (const auto& s : g.at(i)) preds[s.target ? *s.target : exit].push_back(i);
    std::vector<bool> live(static_cast<size_t>(n + 1), false);
    std::deque<int> work{exit};
    live[exit] = true;
    while (!work.empty()) {
        int v = work.front();
        work.pop_front();
        for (int p : preds[v])
            if (!live[p]) {
                live[p] = true;
                work.push_back(p);
            }
    }
    // pdom sets as bit vectors over 0..n, iterated to the greatest fixpoint.
    std::vector<std::vector<bool>> pdom(static_cast<size_t>(n + 1),
                                        std::vector<bool>(static_cast<size_t>(n + 1), true));
    pdom[exit].assign(static_cast<size_t>(n + 1), false);
    pdom[exit][exit] = true;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = n; i >= 1; --i) {
            if (!live[i]) continue;
            std::vector<bool> meet(static_cast<size_t>(n + 1), true);
            for (const auto& s : g.at(i)) {
                int t = s.target ? *s.target : exit;
                if (!live[t]) continue;
                for (int k = 0; k <= n; ++k) meet[k] = meet[k] && pdom[t][k];
            }
            meet[i] = true;
            if (meet != pdom[i]) {
                pdom[i] = std::move(meet);
                changed = true;
            }
        }
    }
    std::map<int, int> ipdom;
    for (int i = 1; i <= n; ++i) {
        if (!live[i]) continue;
        // The immediate one is the strict postdominator that every other
        // strict postdominator postdominates.
        for (int d = 0; d <= n; ++d) {
            if (d == i || !pdom[i][d]) continue;
            bool immediate = true;
            for (int e = 0; e <= n && immediate; ++e)
                if (e != i && e != d && pdom[i][e] && !pdom[d][e]) immediate = false;
            if (immediate) {
                if (d != exit) ipdom[i] = d;
                break;
            }
        }
    }
    return ipdom;
}

namespace {

std::set<int> reach_avoiding(const Cfg& g, const std::vector<int>& from, std::optional<int> stop)
{
    std::set<int> seen;
    std::deque<int> work;
    for (int s : from)
        if (s != stop && seen.insert(s).second) work.push_back(s);
    while (!work.empty()) {
        int v = work.front();
        work.pop_front();
        for (const auto& s : g.at(v))
            if (s.target && s.target != stop && seen.insert(*s.target).second)
                work.push_back(*s.target);
    }
    return seen;
}

}  // namespace

Cdr compute_cdr(const Cfg& g)
{
    Cdr cdr;
    const auto ipdom = immediate_postdominators(g);
    for (int i = 1; i <= g.size; ++i) {
        if (!is_branching(g, i)) continue;
        std::optional<int> j;
        if (auto it = ipdom.find(i); it != ipdom.end()) j = it->second;
        std::map<Tag, std::vector<int>> by_tag;
        std::set<Tag> leaving;
        for (const auto& s : g.at(i)) {
            auto& v = by_tag[s.tag];
            if (s.target)
                v.push_back(*s.target);
            else
                leaving.insert(s.tag);
        }
        std::set<int> all;
        for (const auto& [tag, targets] : by_tag) {
            auto r = reach_avoiding(g, targets, j);
            all.insert(r.begin(), r.end());
            cdr.region[{i, tag}] = std::move(r);
            if (j) cdr.jun[{i, tag}] = *j;
        }
        for (const auto& tag : leaving) cdr.region[{i, tag}] = all;
    }
    return cdr;
}

SoapReport check_soap(const Cfg& g, const Cdr& cdr)
{
    SoapReport rep;
    auto fail = [&](int prop, const std::string& msg) {
        rep.holds[static_cast<size_t>(prop - 1)] = false;
        rep.failures.push_back("SOAP" + std::to_string(prop) + ": " + msg);
    };
    auto is_return = [&](int pp) {
        for (const auto& s : g.at(pp))
            if (s.returns()) return true;
        return false;
    };
    auto in_region_or_jun = [&](int i, const Tag& t, int k) {
        return cdr.region_of(i, t).count(k) || cdr.jun_of(i, t) == k;
    };
    for (int i = 1; i <= g.size; ++i) {
        const auto& succ = g.at(i);
        std::set<Tag> tags = cdr.tags_at(i);
        for (const auto& s : succ) tags.insert(s.tag);

        std::set<int> targets;
        for (const auto& s : succ)
            if (s.target) targets.insert(*s.target);
        if (targets.size() >= 2) {
            for (const auto& s : succ)
                if (s.target && !in_region_or_jun(i, s.tag, *s.target))
                    fail(1, "successor " + std::to_string(*s.target) + " of " + std::to_string(i) +
                                " under " + s.tag + " is outside region and junction");
        }
        for (const auto& t : tags) {
            const auto& reg = cdr.region_of(i, t);
            for (int j : reg) {
                if (j < 1 || j > g.size) {
                    fail(2, "region(" + std::to_string(i) + "," + t + ") names unknown point " +
                                std::to_string(j));
                    continue;
                }
                for (const auto& s : g.at(j))
                    if (s.target && !in_region_or_jun(i, t, *s.target))
                        fail(2, "edge " + std::to_string(j) + "->" + std::to_string(*s.target) +
                                    " leaves region(" + std::to_string(i) + "," + t + ")");
                if (is_return(j)) {
                    if (cdr.jun_of(i, t))
                        fail(3, "return point " + std::to_string(j) + " in region(" +
                                    std::to_string(i) + "," + t + ") with a junction");
                    for (const auto& t2 : tags)
                        if (auto jn = cdr.jun_of(i, t2); jn && !reg.count(*jn))
                            fail(5, "jun(" + std::to_string(i) + "," + t2 + ") outside region(" +
                                        std::to_string(i) + "," + t + ") holding a return point");
                }
            }
            for (const auto& t2 : tags) {
                auto j1 = cdr.jun_of(i, t), j2 = cdr.jun_of(i, t2);
                if (j1 && j2 && *j1 != *j2 && !cdr.region_of(i, t2).count(*j1) &&
                    !cdr.region_of(i, t).count(*j2))
                    fail(4, "junctions of " + std::to_string(i) + " under " + t + " and " + t2 +
                                " are unrelated");
            }
        }
        for (const auto& s : succ) {
            if (!s.returns()) continue;
            const auto& big = cdr.region_of(i, s.tag);
            for (const auto& t2 : tags) {
                for (int j : cdr.region_of(i, t2))
                    if (!big.count(j))
                        fail(6, "region(" + std::to_string(i) + "," + t2 + ") not inside region(" +
                                    std::to_string(i) + "," + s.tag + ")");
                if (auto jn = cdr.jun_of(i, t2); jn && !big.count(*jn))
                    fail(6, "jun(" + std::to_string(i) + "," + t2 + ") not inside region(" +
                                std::to_string(i) + "," + s.tag + ")");
            }
        }
    }
    return rep;
}

}  // namespace dexflow
