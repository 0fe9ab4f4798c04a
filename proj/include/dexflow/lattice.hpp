#pragma once

#include <compare>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dexflow {

class LatticeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Index into a Lattice's element table.
using Level = int;

// An array-extended level. chain[0] is the outermost level; a chain of
// length one is a simple level, k[kc] is {k} followed by kc's chain.
struct ExtLevel {
    std::vector<Level> chain;

    static ExtLevel simple(Level k) { return ExtLevel{{k}}; }
    static ExtLevel array(Level outer, const ExtLevel& content);

    bool is_array() const { return chain.size() > 1; }
    Level outer() const { return chain.front(); }
    ExtLevel content() const;
    ExtLevel with_outer(Level k) const;

    auto operator<=>(const ExtLevel&) const = default;
};

// Top-first stack of levels, index 0 is the top of the operand stack.
using StackType = std::vector<ExtLevel>;

class Lattice {
public:
    // Builds the lattice generated by the covering pairs (lo < hi). Fails if
    // the order has a cycle, some pair lacks a least upper bound, or there is
    // no least element.
    static Lattice from_hasse(std::vector<std::string> names,
                              const std::vector<std::pair<std::string, std::string>>& edges);
    static Lattice two_point();

    int size() const { return static_cast<int>(names_.size()); }
    Level bottom() const { return bottom_; }
    Level top() const { return top_; }
    const std::string& name(Level k) const;
    Level level(const std::string& name) const;
    bool has_level(const std::string& name) const;
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<std::pair<std::string, std::string>>& hasse() const { return hasse_; }

    bool leq(Level a, Level b) const;
    Level lub(Level a, Level b) const;

    bool ext_leq(const ExtLevel& a, const ExtLevel& b) const;
    // Throws LatticeError for two arrays whose contents differ.
    ExtLevel ext_lub(const ExtLevel& a, const ExtLevel& b) const;
    ExtLevel ext_lub(const ExtLevel& a, Level k) const { return ext_lub(a, ExtLevel::simple(k)); }

    StackType lift(Level k, const StackType& st) const;
    bool stack_leq(const StackType& a, const StackType& b) const;

    std::string render(const ExtLevel& e) const;
    // Accepts "L", "L[H]", "L[H[L]]".
    ExtLevel parse_ext(const std::string& text) const;

private:
    void check(Level k) const;

    std::vector<std::string> names_;
    std::vector<std::pair<std::string, std::string>> hasse_;
    std::vector<std::vector<bool>> leq_;
    std::vector<std::vector<Level>> lub_;
    Level bottom_ = 0;
    Level top_ = 0;
};

}  // namespace dexflow
