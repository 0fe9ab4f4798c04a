#include "dexflow/program.hpp"

namespace dexflow {

std::string Value::str() const
{
    switch (kind) {
    case Kind::Int: return n.str();
    case Kind::Loc: return "@" + std::to_string(loc);
    case Kind::Null: return "null";
    }
    return "?";
}

Loc Heap::alloc(Cell c)
{
    Loc l = next++;
    cells.emplace(l, std::move(c));
    return l;
}

void Heap::put(Loc l, Cell c)
{
    cells[l] = std::move(c);
    if (next <= l) next = l + 1;
}

Object& Heap::object(Loc l)
{
    auto it = cells.find(l);
    if (it == cells.end()) throw MachineError("dangling location @" + std::to_string(l));
    auto* o = std::get_if<Object>(&it->second);
    if (!o) throw MachineError("location @" + std::to_string(l) + " is not an object");
    return *o;
}

ArrayObj& Heap::array(Loc l)
{
    auto it = cells.find(l);
    if (it == cells.end()) throw MachineError("dangling location @" + std::to_string(l));
    auto* a = std::get_if<ArrayObj>(&it->second);
    if (!a) throw MachineError("location @" + std::to_string(l) + " is not an array");
    return *a;
}

Object ClassTable::make_default(const std::string& cls) const
{
    Object o{cls, {}};
    auto it = classes.find(cls);
    if (it == classes.end()) return o;
    for (const auto& f : it->second) o.fields[f.name] = f.ref ? Value::null() : Value::integer(0);
    return o;
}

Int apply_binop(BinOp op, const Int& n2, const Int& n1)
{
    switch (op) {
    case BinOp::Add: return n2 + n1;
    case BinOp::Sub: return n2 - n1;
    case BinOp::Mul: return n2 * n1;
    case BinOp::Div:
        if (n1 == 0) throw MachineError("division by zero");
        return n2 / n1;
    }
    throw MachineError("bad operator");
}

char binop_symbol(BinOp op)
{
    switch (op) {
    case BinOp::Add: return '+';
    case BinOp::Sub: return '-';
    case BinOp::Mul: return '*';
    case BinOp::Div: return '/';
    }
    return '?';
}

std::optional<BinOp> binop_from_symbol(const std::string& s)
{
    if (s == "+") return BinOp::Add;
    if (s == "-") return BinOp::Sub;
    if (s == "*") return BinOp::Mul;
    if (s == "/") return BinOp::Div;
    return std::nullopt;
}

std::optional<int> find_handler(const std::vector<Handler>& handlers, int pp, const Tag& cls)
{
    for (const auto& h : handlers)
        if (h.start <= pp && pp < h.end && h.cls == cls) return h.target;
    return std::nullopt;
}

const JvmInsn& JvmMethod::at(int pp) const
{
    if (pp < 1 || pp > size())
        throw MachineError(id + ": program point " + std::to_string(pp) + " out of range");
    return code[pp - 1];
}

std::set<Tag> JvmMethod::classes_at(int pp) const
{
    auto it = class_analysis.find(pp);
    return it == class_analysis.end() ? std::set<Tag>{} : it->second;
}

const DexInsn& DexMethod::at(int pp) const
{
    if (pp < 1 || pp > size())
        throw MachineError(id + ": program point " + std::to_string(pp) + " out of range");
    return code[pp - 1];
}

std::set<Tag> DexMethod::classes_at(int pp) const
{
    auto it = class_analysis.find(pp);
    return it == class_analysis.end() ? std::set<Tag>{} : it->second;
}

const JvmMethod* JvmProgram::find(const std::string& id) const
{
    for (const auto& m : methods)
        if (m.id == id) return &m;
    return nullptr;
}

const JvmMethod& JvmProgram::method(const std::string& id) const
{
    if (auto* m = find(id)) return *m;
    throw MachineError("unknown method '" + id + "'");
}

const DexMethod* DexProgram::find(const std::string& id) const
{
    for (const auto& m : methods)
        if (m.id == id) return &m;
    return nullptr;
}

const DexMethod& DexProgram::method(const std::string& id) const
{
    if (auto* m = find(id)) return *m;
    throw MachineError("unknown method '" + id + "'");
}

bool is_jump(const DexInsn& ins)
{
    return ins.op == DOp::Goto || ins.op == DOp::Ifeq || ins.op == DOp::Ifneq;
}

}  // namespace dexflow
