#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dexflow/ni.hpp"
#include "dexflow/text_format.hpp"

namespace dexflow::testing {

// Tally of one property check. Keeps the first counterexample.
struct PropResult {
    std::string name;
    long cases = 0;
    long failures = 0;
    std::string first;

    bool ok() const { return failures == 0; }
    void fail(const std::string& what)
    {
        if (failures++ == 0) first = what;
    }
    std::string summary() const;
};

std::string corpus_dir();
std::vector<std::string> corpus_files(const std::string& subdir);

// Two-point, three-point chain, diamond, five-point M3 and the eight-point
// powerset of three atoms.
std::vector<Lattice> sample_lattices();

Level random_level(const Lattice& lat, std::mt19937_64& rng);
// Simple with probability 2/3, else one level of array nesting.
ExtLevel random_ext(const Lattice& lat, std::mt19937_64& rng);
// Raises the outer level of e, keeping array contents.
ExtLevel raise_ext(const Lattice& lat, const ExtLevel& e, std::mt19937_64& rng);

// Random structurally valid JVM unit (rejection sampled against validation).
JvmProgram random_jvm_program(std::mt19937_64& rng);

// Random heap with up to `cells` objects and arrays over classes C and D.
Heap random_heap(const Lattice& lat, std::mt19937_64& rng, int cells);
Value random_value(const Heap& h, std::mt19937_64& rng);

PropResult check_lattice_laws(const Lattice& lat);
PropResult check_lift(const Lattice& lat, int cases, std::uint64_t seed);
PropResult check_jvm_transfer_monotone(int cases, std::uint64_t seed);
PropResult check_dex_transfer_monotone(int cases, std::uint64_t seed);
PropResult check_register_order(int cases, std::uint64_t seed);
PropResult check_indist_laws(int cases, std::uint64_t seed);
PropResult check_roundtrip(int cases, std::uint64_t seed);

// Postdominators by reachability with one node removed, regions by
// enumeration of simple paths.
std::map<int, int> oracle_ipdom(const Cfg& g);
Cdr oracle_cdr(const Cfg& g);

// Every CFG with up to `exhaustive_nodes` nodes and one or two Norm
// successors per node, then `random_cases` random CFGs of 5 to 8 nodes
// with np edges mixed in.
PropResult check_cdr_oracle(int exhaustive_nodes, int random_cases, std::uint64_t seed);

}  // namespace dexflow::testing
