#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dexflow/cfg.hpp"
#include "dexflow/program.hpp"

namespace dexflow {

inline constexpr std::uint64_t kDefaultFuel = 1'000'000;

struct JvmState {
    int pc = 1;
    std::vector<Value> locals;
    std::vector<Value> stack;  // back() is the top
    Heap h;
};

struct JvmStep {
    bool final = false;
    Tag tag = kNorm;
    JvmState next;   // successor state, or the final heap in next.h
    Value result;    // returned value or exception location when final
};

// Outcome of a complete run of a method.
struct Outcome {
    enum class Status { Final, FuelExhausted, Error };
    Status status = Status::Error;
    Tag tag = kNorm;
    Value value;  // result for Norm, exception location otherwise
    Heap heap;
    std::string error;

    bool done() const { return status == Status::Final; }
};

// Thrown through nested invocations when the step budget runs out.
struct FuelExhausted {};

// One small step. Invocations run the callee to completion, charging the
// shared budget.
JvmStep step_jvm(const JvmProgram& prog, const JvmMethod& m, JvmState s, std::uint64_t& fuel);

Outcome run_jvm(const JvmProgram& prog, const std::string& method, std::vector<Value> locals,
                Heap h, std::uint64_t fuel = kDefaultFuel);

std::vector<Succ> successors_jvm(const JvmProgram& prog, const JvmMethod& m, int pp);
Cfg cfg_of(const JvmProgram& prog, const JvmMethod& m);

// Structural checks: operand ranges, handler ranges, no falling off the end,
// every point reachable from 1. Throws MachineError.
void validate_jvm(const JvmProgram& prog);

}  // namespace dexflow
