#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dexflow/cfg.hpp"

namespace dexflow {

// Control dependence regions and junction points, keyed by (point, tag).
struct Cdr {
    std::map<std::pair<int, Tag>, std::set<int>> region;
    std::map<std::pair<int, Tag>, int> jun;

    const std::set<int>& region_of(int pp, const Tag& tag) const;
    std::optional<int> jun_of(int pp, const Tag& tag) const;
    // Every tag that has a region entry or junction at pp.
    std::set<Tag> tags_at(int pp) const;
    bool operator==(const Cdr&) const = default;
};

struct SoapReport {
    std::array<bool, 6> holds{true, true, true, true, true, true};
    std::vector<std::string> failures;

    bool ok() const;
};

// A point branches when its successors name at least two distinct
// destinations, counting "leaves the method" as one destination.
bool is_branching(const Cfg& g, int pp);

// Immediate postdominator of every point on the graph extended with a
// virtual exit reached by return edges. Missing entries mean the exit
// itself, or no postdominator at all.
std::map<int, int> immediate_postdominators(const Cfg& g);

// Regions from postdominators: at a branching point i every tag gets
// jun = ipdom(i) when that is a real point, and the region is every point
// reachable from the tag's successors without passing the junction. A tag
// whose edge leaves the method gets the union of all regions at i.
Cdr compute_cdr(const Cfg& g);

SoapReport check_soap(const Cfg& g, const Cdr& cdr);

}  // namespace dexflow
