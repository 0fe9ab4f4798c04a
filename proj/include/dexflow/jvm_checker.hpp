#pragma once

#include <map>
#include <string>
#include <vector>

#include "dexflow/cdr.hpp"
#include "dexflow/jvm_machine.hpp"
#include "dexflow/typing.hpp"

namespace dexflow {

struct JvmCertificate {
    std::map<int, StackType> S;
    SecurityEnv se;
    Cdr cdr;
};

TransferResult transfer_jvm(const JvmProgram& prog, const JvmMethod& m, const MethodPolicy& sgn,
                            int pp, const Succ& edge, const StackType& st, const SecurityEnv& se);

TransferFn jvm_transfer(const JvmProgram& prog, const JvmMethod& m, const MethodPolicy& sgn);

Verdict check_typable_jvm(const JvmProgram& prog, const JvmMethod& m, const MethodPolicy& sgn,
                          const JvmCertificate& cert);

struct JvmInference {
    JvmCertificate cert;
    Verdict verdict;
};

// Least stack types and se for the given regions. The certificate is filled
// in as far as the fixpoint gets even when the verdict is a rejection.
JvmInference infer_certificate_jvm(const JvmProgram& prog, const JvmMethod& m,
                                   const MethodPolicy& sgn, const Cdr& cdr);

// Every method against every one of its policies, regions from compute_cdr.
struct MethodVerdict {
    std::string method;
    Level receiver = 0;
    Verdict verdict;
};
std::vector<MethodVerdict> check_program_jvm(const JvmProgram& prog);

}  // namespace dexflow
