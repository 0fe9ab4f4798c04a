#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dexflow/policy.hpp"

namespace dexflow {

// One edge of the tagged successor relation. An empty target marks a
// return point: execution leaves the method with this tag.
struct Succ {
    Tag tag;
    std::optional<int> target;

    bool returns() const { return !target.has_value(); }
    bool operator==(const Succ&) const = default;
    auto operator<=>(const Succ&) const = default;
};

// Program points 1..size with their successor lists.
struct Cfg {
    int size = 0;
    std::map<int, std::vector<Succ>> succ;

    const std::vector<Succ>& at(int pp) const;
};

}  // namespace dexflow
