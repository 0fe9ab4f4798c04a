#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dexflow/cfg.hpp"
#include "dexflow/jvm_machine.hpp"
#include "dexflow/program.hpp"

namespace dexflow {

struct DexState {
    int pc = 1;
    std::vector<Value> regs;
    std::optional<Value> ret;
    std::optional<Value> ex;
    Heap h;
};

struct DexStep {
    bool final = false;
    Tag tag = kNorm;
    DexState next;
    Value result;
};

DexStep step_dex(const DexProgram& prog, const DexMethod& m, DexState s, std::uint64_t& fuel);

Outcome run_dex(const DexProgram& prog, const std::string& method, std::vector<Value> regs, Heap h,
                std::uint64_t fuel = kDefaultFuel);

std::vector<Succ> successors_dex(const DexProgram& prog, const DexMethod& m, int pp);
Cfg cfg_of(const DexProgram& prog, const DexMethod& m);

// Operand ranges, handler ranges, no falling off the end, moveresult right
// after an invoke and never a jump target, moveexception only at handler
// entries. Throws MachineError.
void validate_dex(const DexProgram& prog);

}  // namespace dexflow
