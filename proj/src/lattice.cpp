#include "dexflow/lattice.hpp"

#include <map>

namespace dexflow {

ExtLevel ExtLevel::array(Level outer, const ExtLevel& content)
{
    ExtLevel e;
    e.chain.reserve(content.chain.size() + 1);
    e.chain.push_back(outer);
    e.chain.insert(e.chain.end(), content.chain.begin(), content.chain.end());
    return e;
}

ExtLevel ExtLevel::content() const
{
    if (!is_array()) throw LatticeError("content of a simple level");
    return ExtLevel{std::vector<Level>(chain.begin() + 1, chain.end())};
}

ExtLevel ExtLevel::with_outer(Level k) const
{
    ExtLevel e = *this;
    e.chain.front() = k;
    return e;
}

Lattice Lattice::from_hasse(std::vector<std::string> names,
                            const std::vector<std::pair<std::string, std::string>>& edges)
{
    if (names.empty()) throw LatticeError("lattice has no elements");
    Lattice lat;
    lat.names_ = std::move(names);
    lat.hasse_ = edges;
    const int n = lat.size();
    std::map<std::string, int> index;
    for (int i = 0; i < n; ++i) {
        if (!index.emplace(lat.names_[i], i).second)
            throw LatticeError("duplicate level '" + lat.names_[i] + "'");
    }
    lat.leq_.assign(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i) lat.leq_[i][i] = true;
    for (const auto& [lo, hi] : edges) {
        auto a = index.find(lo), b = index.find(hi);
        if (a == index.end()) throw LatticeError("unknown level '" + lo + "' in order");
        if (b == index.end()) throw LatticeError("unknown level '" + hi + "' in order");
        lat.leq_[a->second][b->second] = true;
    }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (lat.leq_[i][k] && lat.leq_[k][j]) lat.leq_[i][j] = true;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (lat.leq_[i][j] && lat.leq_[j][i])
                throw LatticeError("order is not antisymmetric: " + lat.names_[i] + " and " +
                                   lat.names_[j]);

    lat.lub_.assign(n, std::vector<Level>(n, -1));
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            int best = -1;
            for (int u = 0; u < n; ++u) {
                if (!lat.leq_[a][u] || !lat.leq_[b][u]) continue;
                bool least = true;
                for (int v = 0; v < n && least; ++v)
                    if (lat.leq_[a][v] && lat.leq_[b][v] && !lat.leq_[u][v]) least = false;
                if (least) best = u;
            }
            if (best < 0)
                throw LatticeError("no least upper bound for " + lat.names_[a] + " and " +
                                   lat.names_[b]);
            lat.lub_[a][b] = best;
        }
    }
    lat.top_ = 0;
    for (int i = 1; i < n; ++i) lat.top_ = lat.lub_[lat.top_][i];
    lat.bottom_ = -1;
    for (int i = 0; i < n && lat.bottom_ < 0; ++i) {
        bool least = true;
        for (int j = 0; j < n; ++j)
            if (!lat.leq_[i][j]) least = false;
        if (least) lat.bottom_ = i;
    }
    if (lat.bottom_ < 0) throw LatticeError("lattice has no least element");
    return lat;
}

Lattice Lattice::two_point()
{
    return from_hasse({"L", "H"}, {{"L", "H"}});
}

void Lattice::check(Level k) const
{
    if (k < 0 || k >= size()) throw LatticeError("unknown level index " + std::to_string(k));
}

const std::string& Lattice::name(Level k) const
{
    check(k);
    return names_[k];
}

Level Lattice::level(const std::string& name) const
{
    for (int i = 0; i < size(); ++i)
        if (names_[i] == name) return i;
    throw LatticeError("unknown level '" + name + "'");
}

bool Lattice::has_level(const std::string& name) const
{
    for (const auto& n : names_)
        if (n == name) return true;
    return false;
}

bool Lattice::leq(Level a, Level b) const
{
    check(a);
    check(b);
    return leq_[a][b];
}

Level Lattice::lub(Level a, Level b) const
{
    check(a);
    check(b);
    return lub_[a][b];
}

bool Lattice::ext_leq(const ExtLevel& a, const ExtLevel& b) const
{
    if (a.is_array() && b.is_array())
        return leq(a.outer(), b.outer()) && a.content() == b.content();
    return leq(a.outer(), b.outer());
}

ExtLevel Lattice::ext_lub(const ExtLevel& a, const ExtLevel& b) const
{
    if (a.is_array() && b.is_array()) {
        if (a.content() != b.content())
            throw LatticeError("join of arrays with different contents: " + render(a) + " and " +
                               render(b));
        return a.with_outer(lub(a.outer(), b.outer()));
    }
    if (a.is_array()) return a.with_outer(lub(a.outer(), b.outer()));
    if (b.is_array()) return b.with_outer(lub(a.outer(), b.outer()));
    return ExtLevel::simple(lub(a.outer(), b.outer()));
}

StackType Lattice::lift(Level k, const StackType& st) const
{
    StackType out;
    out.reserve(st.size());
    for (const auto& e : st) out.push_back(ext_lub(e, k));
    return out;
}

bool Lattice::stack_leq(const StackType& a, const StackType& b) const
{
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!ext_leq(a[i], b[i])) return false;
    return true;
}

std::string Lattice::render(const ExtLevel& e) const
{
    std::string s;
    for (size_t i = 0; i < e.chain.size(); ++i) {
        if (i) s += '[';
        s += name(e.chain[i]);
    }
    s.append(e.chain.size() - 1, ']');
    return s;
}

ExtLevel Lattice::parse_ext(const std::string& text) const
{
    ExtLevel e;
    size_t pos = 0, depth = 0;
    while (true) {
        size_t end = text.find_first_of("[]", pos);
        std::string nm = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        if (nm.empty()) throw LatticeError("malformed level '" + text + "'");
        e.chain.push_back(level(nm));
        if (end == std::string::npos) break;
        if (text[end] == '[') {
            ++depth;
            pos = end + 1;
            continue;
        }
        size_t closes = 0;
        while (end < text.size() && text[end] == ']') {
            ++closes;
            ++end;
        }
        if (closes != depth || end != text.size())
            throw LatticeError("unbalanced brackets in level '" + text + "'");
        depth = 0;
        break;
    }
    if (depth != 0) throw LatticeError("unbalanced brackets in level '" + text + "'");
    return e;
}

}  // namespace dexflow
