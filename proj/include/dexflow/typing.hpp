#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dexflow/cdr.hpp"
#include "dexflow/cfg.hpp"
#include "dexflow/lattice.hpp"

namespace dexflow {

class CheckerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A failed side condition of a transfer rule, or a malformed typing.
struct Violation {
    enum class Kind { Constraint, Shape, Region, Order, Missing };
    Kind kind = Kind::Constraint;
    int pp = 0;
    Tag tag = kNorm;
    std::string rule;
    std::string constraint;  // rendered with concrete levels, e.g. "H ⊔ H ≤ L"

    std::string str() const;
};

// Requirement that every point of region(pp, tag) runs at se >= level.
struct Guard {
    Tag tag;
    Level level;
};

// Typing at one program point: a stack type on the JVM side (index 0 on
// top), a register typing on the DEX side.
using Typing = std::vector<ExtLevel>;
using SecurityEnv = std::map<int, Level>;

struct TransferResult {
    bool returns = false;  // rule with empty conclusion
    Typing out;
    std::vector<Violation> violations;
    std::vector<Guard> guards;
};

using TransferFn = std::function<TransferResult(int pp, const Succ& edge, const Typing& in,
                                                const SecurityEnv& se)>;

struct Verdict {
    bool typable = false;
    std::optional<Violation> witness;
};

// Accumulates side conditions of one rule application.
class RuleCheck {
public:
    RuleCheck(const Lattice& lat, TransferResult& res, int pp, Tag tag, std::string rule)
        : lat_(lat), res_(res), pp_(pp), tag_(std::move(tag)), rule_(std::move(rule))
    {
    }

    // parts[0] ⊔ parts[1] ⊔ ... ≤ rhs
    void leq(const std::vector<ExtLevel>& parts, const ExtLevel& rhs);
    void leq(const std::vector<Level>& parts, Level rhs);
    void fail(Violation::Kind kind, const std::string& what);
    void guard(Level k) { res_.guards.push_back({tag_, k}); }

private:
    const Lattice& lat_;
    TransferResult& res_;
    int pp_;
    Tag tag_;
    std::string rule_;
};

ExtLevel join_all(const Lattice& lat, const std::vector<ExtLevel>& parts);
bool typing_leq(const Lattice& lat, const Typing& a, const Typing& b);

// Least typing per point by worklist iteration from the entry typing.
// Points listed in `pinned` keep their given typing and only receive
// edges. Returns a violation on height mismatch or incompatible joins.
std::optional<Violation> propagate(const Lattice& lat, const Cfg& g, const Typing& entry,
                                   const TransferFn& transfer, const SecurityEnv& se,
                                   std::map<int, Typing>& typing,
                                   const std::map<int, Typing>& pinned = {});

// Raises se on region members to satisfy every guard. Points in `frozen`
// are left alone. Returns whether anything changed.
bool raise_se(const Lattice& lat, const Cfg& g, const std::map<int, Typing>& typing,
              const TransferFn& transfer, const Cdr& cdr, SecurityEnv& se,
              const std::set<int>& frozen = {});

// Edge-by-edge judgment in program point order. Reports the first failure.
Verdict check_edges(const Lattice& lat, const Cfg& g, const std::map<int, Typing>& typing,
                    const TransferFn& transfer, const Cdr& cdr, const SecurityEnv& se);

}  // namespace dexflow
