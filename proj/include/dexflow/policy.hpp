#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dexflow/lattice.hpp"

namespace dexflow {

class PolicyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Exception tags. Norm marks normal execution, np a null dereference,
// anything else is a class identifier.
using Tag = std::string;
inline const Tag kNorm = "Norm";
inline const Tag kNp = "np";

// ka -(kh)-> kr
struct MethodPolicy {
    std::vector<ExtLevel> ka;
    Level kh = 0;
    std::map<Tag, Level> kr;

    std::optional<Level> result(const Tag& tag) const
    {
        auto it = kr.find(tag);
        if (it == kr.end()) return std::nullopt;
        return it->second;
    }
    bool operator==(const MethodPolicy&) const = default;
};

struct SignatureTable {
    // method id -> receiver level -> policy
    std::map<std::string, std::map<Level, MethodPolicy>> entries;

    std::vector<MethodPolicy> policies_of(const std::string& method) const;
    // Exact entry at level k, else the entry at the least level above k.
    const MethodPolicy& lookup(const Lattice& lat, const std::string& method, Level k) const;
    bool operator==(const SignatureTable&) const = default;
};

struct Policy {
    SignatureTable gamma;
    std::map<std::string, ExtLevel> ft;
    // method id -> creation point -> level of the created array
    std::map<std::string, std::map<int, ExtLevel>> at;
    Level kobs = 0;

    ExtLevel field(const Lattice& lat, const std::string& f) const;
    ExtLevel array_at(const Lattice& lat, const std::string& method, int pp) const;
    bool operator==(const Policy&) const = default;
};

}  // namespace dexflow
