#include "dexflow/policy.hpp"

namespace dexflow {

std::vector<MethodPolicy> SignatureTable::policies_of(const std::string& method) const
{
    auto it = entries.find(method);
    if (it == entries.end() || it->second.empty())
        throw PolicyError("no policy for method '" + method + "'");
    std::vector<MethodPolicy> out;
    for (const auto& [k, p] : it->second) out.push_back(p);
    return out;
}

const MethodPolicy& SignatureTable::lookup(const Lattice& lat, const std::string& method,
                                           Level k) const
{
    auto it = entries.find(method);
    if (it == entries.end()) throw PolicyError("no policy for method '" + method + "'");
    const auto& by_level = it->second;
    if (auto e = by_level.find(k); e != by_level.end()) return e->second;
    const MethodPolicy* best = nullptr;
    Level best_level = 0;
    for (const auto& [lvl, p] : by_level) {
        if (!lat.leq(k, lvl)) continue;
        if (!best || lat.leq(lvl, best_level)) {
            best = &p;
            best_level = lvl;
        }
    }
    if (!best)
        throw PolicyError("no policy for method '" + method + "' at receiver level " +
                          lat.name(k) + " or above");
    return *best;
}

ExtLevel Policy::field(const Lattice& lat, const std::string& f) const
{
    auto it = ft.find(f);
    return it == ft.end() ? ExtLevel::simple(lat.bottom()) : it->second;
}

ExtLevel Policy::array_at(const Lattice& lat, const std::string& method, int pp) const
{
    auto m = at.find(method);
    if (m != at.end()) {
        auto it = m->second.find(pp);
        if (it != m->second.end()) return it->second;
    }
    return ExtLevel::simple(lat.bottom());
}

}  // namespace dexflow
