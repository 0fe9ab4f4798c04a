#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dexflow/dex_machine.hpp"
#include "dexflow/jvm_machine.hpp"
#include "dexflow/translator.hpp"

namespace dexflow {

// Partial location bijection from the first run's heap to the second's.
using Beta = std::map<Loc, Loc>;

bool injective(const Beta& beta);
Beta invert(const Beta& beta);

bool value_indist(const Value& v1, const Value& v2, const Beta& beta);

// Throws std::invalid_argument when the register universes differ.
bool registers_indist(const Lattice& lat, const std::vector<Value>& rho1, const std::vector<Value>& rho2,
                      const Typing& rt1, const Typing& rt2, Level kobs, const Beta& beta,
                      const std::set<int>& locR = {});

// Throws std::invalid_argument when the domains differ.
bool locals_indist(const Lattice& lat, const std::vector<Value>& rho1, const std::vector<Value>& rho2,
                   const std::vector<ExtLevel>& ka, Level kobs, const Beta& beta);

bool heap_indist(const Lattice& lat, const Policy& pol, const Heap& h1, const Heap& h2, const Beta& beta,
                 Level kobs);

// Final states as (tag, value, heap). Throws PolicyError when an exception
// class has no level in kr.
bool output_indist(const Lattice& lat, const Policy& pol, const Outcome& o1, const Outcome& o2,
                   const Beta& beta, Level kobs, const MethodPolicy& sgn);

bool side_effect_preorder(const Lattice& lat, const Policy& pol, const Heap& h1, const Heap& h2, Level k);

// Least extension of beta forced by the outputs: related low results and
// low exceptions, closed under low fields and low array contents. Any
// valid extension contains it, so a failure here means none exists.
std::optional<Beta> extend_beta(const Lattice& lat, const Policy& pol, const Outcome& o1, const Outcome& o2,
                                const Beta& beta, Level kobs, const MethodPolicy& sgn);

// Allocations in the two final heaps that were absent from the inputs,
// paired in allocation order, then closed as in extend_beta. Can reject
// outputs that some other extension relates.
std::optional<Beta> extend_beta_by_order(const Lattice& lat, const Policy& pol, const Outcome& o1,
                                         const Outcome& o2, const Heap& in1, const Heap& in2,
                                         const Beta& beta, Level kobs, const MethodPolicy& sgn);

struct GeneratorConfig {
    int int_lo = -3;
    int int_hi = 3;
    int max_cells = 3;
    int max_array_len = 3;
};

// The shape of the method being tested, shared by both machines.
struct MethodShape {
    std::string id;
    int n_locals = 1;
    std::map<int, SlotKind> kinds;
};

struct Input {
    std::vector<Value> locals;
    Heap heap;
};

struct InputPair {
    Input a, b;
    Beta beta;
};

// Low slots copied, high slots resampled. Trial 0 is fixed: high integers
// 0 against 1, high references null against a fresh object.
InputPair generate_pair(const Lattice& lat, const Env& env, const MethodShape& shape,
                        const std::vector<ExtLevel>& ka, Level kobs, const GeneratorConfig& cfg,
                        std::uint64_t seed, int trial);

// Input arrays are created at ("<input>", slot) with the content level of
// ka; the returned policy knows those levels.
Policy policy_with_inputs(const Lattice& lat, const Policy& pol, const std::vector<ExtLevel>& ka);
inline const std::string kInputArrays = "<input>";

using Runner = std::function<Outcome(const std::vector<Value>& locals, const Heap& h)>;

Runner jvm_runner(const JvmProgram& prog, const std::string& method, std::uint64_t fuel);
Runner dex_runner(const DexProgram& prog, const std::string& method, std::uint64_t fuel);
MethodShape shape_of(const JvmMethod& m);
MethodShape shape_of(const DexMethod& m);

struct NiConfig {
    std::optional<Level> kobs;  // defaults to the program's kobs
    GeneratorConfig gen;
    int trials = 100;
    std::uint64_t seed = 1;
    std::uint64_t fuel = kDefaultFuel;
    enum class BetaSearch { Forced, AllocationOrder };
    BetaSearch beta_search = BetaSearch::Forced;
};

struct NiWitness {
    int trial = 0;
    std::uint64_t seed = 0;
    InputPair inputs;
    Outcome out1, out2;
    std::string reason;
};

struct NiReport {
    int trials = 0;
    int completed = 0;       // both runs reached a final state
    int fuel_exhausted = 0;  // never counted as interference
    int stuck = 0;           // machine errors such as division by zero
    std::optional<NiWitness> witness;

    bool interference() const { return witness.has_value(); }
    // Machine-readable lines followed by a one-line summary.
    std::string str(const Lattice& lat) const;
};

NiReport ni_test(const Lattice& lat, const Env& env, const MethodShape& shape, const MethodPolicy& sgn,
                 const Runner& run, const NiConfig& cfg);

struct SafetyReport {
    int trials = 0;
    int completed = 0;
    std::optional<NiWitness> witness;  // out2 unused

    bool safe() const { return !witness.has_value(); }
    std::string str() const;
};

SafetyReport side_effect_safety_test(const Lattice& lat, const Env& env, const MethodShape& shape,
                                     const MethodPolicy& sgn, const Runner& run, const NiConfig& cfg);

// Same final status, tag and value, and the same heap up to array creation
// points. Allocation counters match, so locations are compared directly.
bool outcomes_agree(const Outcome& jvm, const Outcome& dex, std::string* why = nullptr);

struct AgreementReport {
    int trials = 0;
    int compared = 0;
    int inconclusive = 0;  // one side ran out of fuel
    std::optional<std::string> disagreement;

    bool ok() const { return !disagreement.has_value(); }
};

AgreementReport agreement_test(const JvmProgram& jprog, const DexProgram& dprog, const std::string& method,
                               const MethodPolicy& sgn, const NiConfig& cfg);

struct PreservationEntry {
    std::string method;
    Level receiver = 0;
    bool jvm_typable = false;
    bool dex_typable = false;  // translated certificate accepted
    bool dex_inferred = false; // DEX checker accepts with its own inference
    bool jvm_soap = false;
    bool dex_soap = false;
    int raised = 0;
    AgreementReport agreement;
    std::string detail;

    bool passed() const
    {
        return jvm_typable && dex_typable && jvm_soap && dex_soap && agreement.ok();
    }
};

// Gate on the JVM checker, compile, translate the certificate, check DEX
// typability and SOAP, compare runs.
std::vector<PreservationEntry> preservation_test(const JvmProgram& prog, const NiConfig& cfg);

}  // namespace dexflow
