#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "dexflow/lattice.hpp"
#include "dexflow/policy.hpp"

namespace dexflow {

using Int = boost::multiprecision::cpp_int;
using Loc = std::uint64_t;

class MachineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Value {
    enum class Kind { Int, Loc, Null };
    Kind kind = Kind::Int;
    Int n = 0;
    Loc loc = 0;

    static Value integer(Int v) { return Value{Kind::Int, std::move(v), 0}; }
    static Value location(Loc l) { return Value{Kind::Loc, 0, l}; }
    static Value null() { return Value{Kind::Null, 0, 0}; }

    bool is_int() const { return kind == Kind::Int; }
    bool is_loc() const { return kind == Kind::Loc; }
    bool is_null() const { return kind == Kind::Null; }
    std::string str() const;
    bool operator==(const Value&) const = default;
};

struct Object {
    std::string cls;
    std::map<std::string, Value> fields;
    bool operator==(const Object&) const = default;
};

struct ArrayObj {
    std::vector<Value> elems;
    // Creation point: the allocating method and program point.
    std::string method;
    int creation = 0;
    bool operator==(const ArrayObj&) const = default;
};

using Cell = std::variant<Object, ArrayObj>;

struct Heap {
    std::map<Loc, Cell> cells;
    Loc next = 1;

    Loc fresh() const { return next; }
    Loc alloc(Cell c);
    // Inserts at a chosen location and keeps fresh() outside the domain.
    void put(Loc l, Cell c);
    bool contains(Loc l) const { return cells.count(l) != 0; }
    Object& object(Loc l);
    ArrayObj& array(Loc l);
    bool operator==(const Heap&) const = default;
};

struct FieldDecl {
    std::string name;
    bool ref = false;
    bool operator==(const FieldDecl&) const = default;
};

struct ClassTable {
    std::map<std::string, std::vector<FieldDecl>> classes;

    // Fields default to 0, reference fields to null. Undeclared classes
    // (np among them) have no fields.
    Object make_default(const std::string& cls) const;
    bool operator==(const ClassTable&) const = default;
};

enum class BinOp { Add, Sub, Mul, Div };

// n2 op n1
Int apply_binop(BinOp op, const Int& n2, const Int& n1);
char binop_symbol(BinOp op);
std::optional<BinOp> binop_from_symbol(const std::string& s);

struct Handler {
    int start = 0;  // inclusive
    int end = 0;    // exclusive
    int target = 0;
    Tag cls;
    bool operator==(const Handler&) const = default;
};

// First entry in declaration order covering pp whose class matches exactly.
std::optional<int> find_handler(const std::vector<Handler>& handlers, int pp, const Tag& cls);

// Input generator hint for a local variable or argument slot.
struct SlotKind {
    enum class Kind { Int, Ref, Array };
    Kind kind = Kind::Int;
    std::string cls;  // class of Ref slots, element type ("int"/"ref") of Array slots
    bool operator==(const SlotKind&) const = default;
};

enum class JOp {
    Binop, Push, Pop, Swap, Load, Store, Ifeq, Goto, Return, New, Getfield, Putfield,
    Newarray, Arraylength, Arrayload, Arraystore, Invoke, Throw
};

struct JvmInsn {
    JOp op = JOp::Pop;
    BinOp bop = BinOp::Add;
    Int n = 0;         // push constant
    int x = 0;         // local variable or jump target
    std::string name;  // class, field, method or element type
    bool operator==(const JvmInsn&) const = default;
};

struct JvmMethod {
    std::string id;
    std::vector<JvmInsn> code;  // pp i is code[i - 1]
    int n_locals = 1;
    int max_stack = 0;
    int nb_args = 0;
    std::vector<Handler> handlers;
    std::map<int, std::set<Tag>> class_analysis;
    std::set<Tag> exc_analysis;
    std::map<int, std::string> labels;  // pp -> source label
    std::map<int, SlotKind> kinds;

    int size() const { return static_cast<int>(code.size()); }
    const JvmInsn& at(int pp) const;
    std::set<Tag> classes_at(int pp) const;
    bool operator==(const JvmMethod&) const = default;
};

enum class DOp {
    Binop, Const, Move, Ifeq, Ifneq, Goto, Return, New, Iget, Iput, Newarray, Arraylength,
    Aget, Aput, Invoke, Moveresult, Throw, Moveexception
};

// Operand layout per opcode:
//   binop(op, r, a, b)  const(r, c)  move(r, a)  ifeq/ifneq(r, target)
//   goto(target)  return(r)  new(r, name)  iget(r, a, name)  iput(r, a, name)
//   newarray(r, a, name)  arraylength(r, a)  aget(r, a, b)  aput(r, a, b)
//   invoke(args.size(), name, args)  moveresult(r)  throw(r)  moveexception(r)
struct DexInsn {
    DOp op = DOp::Goto;
    BinOp bop = BinOp::Add;
    int r = 0;
    int a = 0;
    int b = 0;
    Int c = 0;
    int target = 0;
    std::string name;
    std::vector<int> args;
    bool operator==(const DexInsn&) const = default;
};

struct DexMethod {
    std::string id;
    std::vector<DexInsn> code;
    int n_registers = 1;
    int n_locals = 1;
    int nb_args = 0;
    std::vector<Handler> handlers;
    std::map<int, std::set<Tag>> class_analysis;
    std::set<Tag> exc_analysis;
    std::map<int, std::string> labels;
    std::map<int, SlotKind> kinds;

    int size() const { return static_cast<int>(code.size()); }
    const DexInsn& at(int pp) const;
    std::set<Tag> classes_at(int pp) const;
    bool operator==(const DexMethod&) const = default;
};

struct Env {
    Lattice lat = Lattice::two_point();
    ClassTable classes;
    Policy policy;
};

struct JvmProgram {
    Env env;
    std::vector<JvmMethod> methods;

    const JvmMethod* find(const std::string& id) const;
    const JvmMethod& method(const std::string& id) const;
};

struct DexProgram {
    Env env;
    std::vector<DexMethod> methods;

    const DexMethod* find(const std::string& id) const;
    const DexMethod& method(const std::string& id) const;
};

bool is_jump(const DexInsn& ins);

}  // namespace dexflow
