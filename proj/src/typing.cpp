#include "dexflow/typing.hpp"

#include <deque>
#include <set>

namespace dexflow {

std::string Violation::str() const
{
    std::string s = "pp " + std::to_string(pp) + " [" + tag + "] " + rule;
    if (!constraint.empty()) s += ": " + constraint;
    return s;
}

ExtLevel join_all(const Lattice& lat, const std::vector<ExtLevel>& parts)
{
    ExtLevel acc = parts.at(0);
    for (size_t i = 1; i < parts.size(); ++i) acc = lat.ext_lub(acc, parts[i]);
    return acc;
}

void RuleCheck::leq(const std::vector<ExtLevel>& parts, const ExtLevel& rhs)
{
    bool ok = false;
    try {
        ok = lat_.ext_leq(join_all(lat_, parts), rhs);
    } catch (const LatticeError&) {
        ok = false;
    }
    if (ok) return;
    std::string lhs;
    for (const auto& p : parts) {
        if (!lhs.empty()) lhs += " ⊔ ";
        lhs += lat_.render(p);
    }
    res_.violations.push_back(
        {Violation::Kind::Constraint, pp_, tag_, rule_, lhs + " ≤ " + lat_.render(rhs)});
}

void RuleCheck::leq(const std::vector<Level>& parts, Level rhs)
{
    std::vector<ExtLevel> e;
    for (Level k : parts) e.push_back(ExtLevel::simple(k));
    leq(e, ExtLevel::simple(rhs));
}

void RuleCheck::fail(Violation::Kind kind, const std::string& what)
{
    res_.violations.push_back({kind, pp_, tag_, rule_, what});
}

bool typing_leq(const Lattice& lat, const Typing& a, const Typing& b)
{
    return lat.stack_leq(a, b);
}

std::optional<Violation> propagate(const Lattice& lat, const Cfg& g, const Typing& entry,
                                   const TransferFn& transfer, const SecurityEnv& se,
                                   std::map<int, Typing>& typing,
                                   const std::map<int, Typing>& pinned)
{
    typing = pinned;
    std::deque<int> work;
    std::set<int> queued;
    auto enqueue = [&](int pp) {
        if (queued.insert(pp).second) work.push_back(pp);
    };
    if (!pinned.count(1)) typing[1] = entry;
    enqueue(1);
    for (const auto& [pp, t] : pinned) enqueue(pp);
    while (!work.empty()) {
        int pp = work.front();
        work.pop_front();
        queued.erase(pp);
        auto cur = typing.find(pp);
        if (cur == typing.end()) continue;
        const Typing in = cur->second;
        for (const auto& edge : g.at(pp)) {
            if (!edge.target) continue;
            TransferResult r;
            try {
                r = transfer(pp, edge, in, se);
            } catch (const LatticeError& e) {
                return Violation{Violation::Kind::Shape, pp, edge.tag, "join", e.what()};
            }
            for (const auto& v : r.violations)
                if (v.kind == Violation::Kind::Shape) return v;
            if (r.returns) continue;
            const int t = *edge.target;
            if (pinned.count(t)) continue;
            auto it = typing.find(t);
            if (it == typing.end()) {
                typing[t] = r.out;
                enqueue(t);
                continue;
            }
            if (it->second.size() != r.out.size())
                return Violation{Violation::Kind::Shape, pp, edge.tag, "join",
                                 "stack heights " + std::to_string(it->second.size()) + " and " +
                                     std::to_string(r.out.size()) + " meet at " +
                                     std::to_string(t)};
            Typing joined = it->second;
            try {
                for (size_t k = 0; k < joined.size(); ++k) joined[k] = lat.ext_lub(joined[k], r.out[k]);
            } catch (const LatticeError& e) {
                return Violation{Violation::Kind::Shape, pp, edge.tag, "join", e.what()};
            }
            if (joined != it->second) {
                it->second = std::move(joined);
                enqueue(t);
            }
        }
    }
    return std::nullopt;
}

bool raise_se(const Lattice& lat, const Cfg& g, const std::map<int, Typing>& typing,
              const TransferFn& transfer, const Cdr& cdr, SecurityEnv& se,
              const std::set<int>& frozen)
{
    bool changed = false;
    for (const auto& [pp, in] : typing) {
        if (pp < 1 || pp > g.size) continue;
        for (const auto& edge : g.at(pp)) {
            TransferResult r;
            try {
                r = transfer(pp, edge, in, se);
            } catch (const LatticeError&) {
                continue;
            }
            for (const auto& gd : r.guards) {
                for (int j : cdr.region_of(pp, gd.tag)) {
                    if (frozen.count(j)) continue;
                    Level cur = se.count(j) ? se.at(j) : lat.bottom();
                    Level next = lat.lub(cur, gd.level);
                    if (next != cur || !se.count(j)) {
                        se[j] = next;
                        if (next != cur) changed = true;
                    }
                }
            }
        }
    }
    return changed;
}

Verdict check_edges(const Lattice& lat, const Cfg& g, const std::map<int, Typing>& typing,
                    const TransferFn& transfer, const Cdr& cdr, const SecurityEnv& se)
{
    Verdict v;
    auto reject = [&](Violation w) {
        v.typable = false;
        v.witness = std::move(w);
        return v;
    };
    for (int pp = 1; pp <= g.size; ++pp) {
        if (!se.count(pp))
            return reject({Violation::Kind::Missing, pp, kNorm, "se", "no security level"});
        auto it = typing.find(pp);
        if (it == typing.end())
            return reject({Violation::Kind::Missing, pp, kNorm, "typing", "no typing"});
        for (const auto& edge : g.at(pp)) {
            TransferResult r;
            try {
                r = transfer(pp, edge, it->second, se);
            } catch (const LatticeError& e) {
                return reject({Violation::Kind::Shape, pp, edge.tag, "join", e.what()});
            }
            if (!r.violations.empty()) return reject(r.violations.front());
            for (const auto& gd : r.guards)
                for (int j : cdr.region_of(pp, gd.tag)) {
                    Level sj = se.count(j) ? se.at(j) : lat.bottom();
                    if (!lat.leq(gd.level, sj))
                        return reject({Violation::Kind::Region, pp, edge.tag, "region",
                                       lat.name(gd.level) + " ≤ " + lat.name(sj) + " = se(" +
                                           std::to_string(j) + ")"});
                }
            if (edge.returns()) {
                if (!r.returns)
                    return reject({Violation::Kind::Shape, pp, edge.tag, "return",
                                   "rule has no return conclusion"});
                continue;
            }
            if (r.returns) continue;
            auto tt = typing.find(*edge.target);
            if (tt == typing.end())
                return reject({Violation::Kind::Missing, *edge.target, edge.tag, "typing",
                               "no typing"});
            if (!typing_leq(lat, r.out, tt->second)) {
                std::string detail;
                if (r.out.size() != tt->second.size()) {
                    detail = "heights " + std::to_string(r.out.size()) + " and " +
                             std::to_string(tt->second.size());
                } else {
                    for (size_t k = 0; k < r.out.size(); ++k)
                        if (!lat.ext_leq(r.out[k], tt->second[k])) {
                            detail = "slot " + std::to_string(k) + ": " + lat.render(r.out[k]) +
                                     " ≤ " + lat.render(tt->second[k]);
                            break;
                        }
                }
                return reject({Violation::Kind::Order, pp, edge.tag,
                               "edge to " + std::to_string(*edge.target), detail});
            }
        }
    }
    v.typable = true;
    return v;
}

}  // namespace dexflow
