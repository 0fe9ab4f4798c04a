#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dexflow/dex_checker.hpp"
#include "dexflow/jvm_checker.hpp"

namespace dexflow {

class TranslationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BasicBlock {
    // Code blocks hold JVM instructions; the others are helper blocks made
    // by the compiler.
    enum class Kind { Code, Moveresult, Moveexception, Return };
    Kind kind = Kind::Code;
    std::set<int> parents;
    std::set<int> succs;
    std::optional<int> pSucc;
    std::optional<int> order;
    std::vector<DexInsn> insn;
    std::vector<int> origin;    // JVM pp per instruction, 0 for helper instructions
    std::vector<int> handlers;  // indices into the JVM handler table, declaration order
    std::set<int> gens;         // JVM pps the block stands for
    int first_pp = 0;           // code blocks: JVM pp range [first_pp, last_pp]
    int last_pp = 0;
    bool throws = false;
};

struct BlockEnv {
    std::map<int, BasicBlock> BMap;
    std::map<int, int> PMap;   // JVM pp -> label of its block
    std::map<int, int> TSMap;  // JVM pp -> register simulating the stack top
    std::map<int, int> result_label;  // invoke pp -> its moveresult block
    int maxLabel = 0;
    int retLabel = 0;
    int next_label = 0;
    int n_locals = 0;
    int n_registers = 0;

    int getAvailableLabel() { return next_label++; }
    int int_label(int handler_pc) const { return maxLabel + handler_pc; }
    BasicBlock& block(int label);
};

// Where each JVM point and helper instruction landed in the output.
struct AddressMap {
    enum class Aux { Goto, Moveresult, Moveexception, Return };
    struct AuxPoint {
        Aux kind = Aux::Goto;
        std::set<int> gens;  // generating JVM pps
        int block = 0;       // label of the emitting block
        bool operator==(const AuxPoint&) const = default;
    };
    std::map<int, std::vector<int>> fwd;  // JVM pp -> its DEX pps, output order
    std::map<int, int> start;             // JVM pp -> DEX pp where its translation begins
    std::map<int, int> blockOf;           // label -> DEX pp of block start
    std::map<int, int> back;              // DEX pp of a translated instruction -> JVM pp
    std::map<int, AuxPoint> aux;
    std::vector<int> order;               // labels in output order
    bool operator==(const AddressMap&) const = default;
};

struct CompiledMethod {
    DexMethod method;
    AddressMap amap;
};

struct CompiledProgram {
    DexProgram prog;
    std::map<std::string, AddressMap> amaps;
};

// JVM pp -> register index of the stack top before the instruction.
std::map<int, int> stack_tops(const JvmProgram& prog, const JvmMethod& m);

BlockEnv start_block(const JvmProgram& prog, const JvmMethod& m);
void trace_parent_child(const JvmProgram& prog, const JvmMethod& m, BlockEnv& env);
void translate_instructions(const JvmProgram& prog, const JvmMethod& m, BlockEnv& env);
void pick_order(BlockEnv& env);
CompiledMethod emit(const JvmMethod& m, const BlockEnv& env);

CompiledMethod compile_method(const JvmProgram& prog, const JvmMethod& m);
// Same lattice, classes, signatures and field levels; array levels move to
// the DEX points of the newarray instructions.
CompiledProgram compile_program(const JvmProgram& prog);

// Locals from ka, stack entries above them with the top at the largest
// index, everything else (ret and ex included) at top.
RegisterTyping compile_stack_type(const Lattice& lat, const StackType& st,
                                  const std::vector<ExtLevel>& ka, int n_locals, int n_registers);

Cdr translate_cdr(const Cdr& cdr, const JvmMethod& m, const AddressMap& amap,
                  const DexProgram& dprog, const DexMethod& dm);

// Helper points take the join of their generators.
SecurityEnv translate_se(const Lattice& lat, const SecurityEnv& se, const AddressMap& amap,
                         const DexMethod& dm);

struct TranslatedCertificate {
    DexCertificate cert;
    // Translated points whose se had to be raised beyond the JVM value.
    int raised = 0;
};

// Stack types pinned at the first DEX instruction of every JVM point, the
// remaining points filled by forward propagation, se raised by the DEX
// region guards.
TranslatedCertificate translate_certificate(const JvmProgram& jprog, const JvmMethod& jm,
                                            const MethodPolicy& sgn, const JvmCertificate& cert,
                                            const DexProgram& dprog, const DexMethod& dm,
                                            const AddressMap& amap);

}  // namespace dexflow
