#pragma once

#include <map>
#include <string>
#include <vector>

#include "dexflow/cdr.hpp"
#include "dexflow/dex_machine.hpp"
#include "dexflow/jvm_checker.hpp"
#include "dexflow/typing.hpp"

namespace dexflow {

// Register typing: r0..r(n-1), then ret at index n and ex at n + 1.
using RegisterTyping = Typing;

inline int ret_slot(const DexMethod& m) { return m.n_registers; }
inline int ex_slot(const DexMethod& m) { return m.n_registers + 1; }

struct DexCertificate {
    std::map<int, RegisterTyping> RT;
    SecurityEnv se;
    Cdr cdr;
};

// Locals from ka, every other register plus ret and ex at top.
RegisterTyping entry_typing(const Lattice& lat, const DexMethod& m, const MethodPolicy& sgn);

// Throws CheckerError when the register universes differ.
bool rt_leq(const Lattice& lat, const RegisterTyping& a, const RegisterTyping& b);

TransferResult transfer_dex(const DexProgram& prog, const DexMethod& m, const MethodPolicy& sgn,
                            int pp, const Succ& edge, const RegisterTyping& rt,
                            const SecurityEnv& se);

TransferFn dex_transfer(const DexProgram& prog, const DexMethod& m, const MethodPolicy& sgn);

Verdict check_typable_dex(const DexProgram& prog, const DexMethod& m, const MethodPolicy& sgn,
                          const DexCertificate& cert);

struct DexInference {
    DexCertificate cert;
    Verdict verdict;
};

DexInference infer_certificate_dex(const DexProgram& prog, const DexMethod& m,
                                   const MethodPolicy& sgn, const Cdr& cdr);

std::vector<MethodVerdict> check_program_dex(const DexProgram& prog);

}  // namespace dexflow
