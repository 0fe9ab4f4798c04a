#include "dexflow/dex_machine.hpp"

#include <set>

namespace dexflow {

namespace {

Value& reg(DexState& s, int r)
{
    if (r < 0 || r >= static_cast<int>(s.regs.size()))
        throw MachineError("register r" + std::to_string(r) + " out of range");
    return s.regs[static_cast<size_t>(r)];
}

const Int& int_reg(DexState& s, int r)
{
    Value& v = reg(s, r);
    if (!v.is_int()) throw MachineError("expected an integer in r" + std::to_string(r));
    return v.n;
}

Value ref_reg(DexState& s, int r)
{
    Value v = reg(s, r);
    if (v.is_int()) throw MachineError("expected a reference in r" + std::to_string(r));
    return v;
}

DexStep raise(const DexMethod& m, DexState s, const Tag& cls, Loc l)
{
    DexStep r;
    r.tag = cls;
    if (auto t = find_handler(m.handlers, s.pc, cls)) {
        s.pc = *t;
        s.ex = Value::location(l);
        r.next = std::move(s);
        return r;
    }
    r.final = true;
    r.result = Value::location(l);
    r.next = std::move(s);
    return r;
}

DexStep null_pointer(const DexProgram& prog, const DexMethod& m, DexState s)
{
    Loc l = s.h.alloc(prog.env.classes.make_default(kNp));
    return raise(m, std::move(s), kNp, l);
}

DexStep normal(DexState s, int pc)
{
    DexStep r;
    s.pc = pc;
    r.next = std::move(s);
    return r;
}

size_t checked_index(const ArrayObj& a, const Int& j)
{
    if (j < 0 || j >= Int(a.elems.size())) throw MachineError("array index out of bounds");
    return static_cast<size_t>(j);
}

Outcome run_nested(const DexProgram& prog, const DexMethod& m, std::vector<Value> regs, Heap h,
                   std::uint64_t& fuel)
{
    regs.resize(static_cast<size_t>(m.n_registers), Value::integer(0));
    DexState s{1, std::move(regs), std::nullopt, std::nullopt, std::move(h)};
    while (true) {
        if (fuel == 0) throw FuelExhausted{};
        --fuel;
        DexStep st = step_dex(prog, m, std::move(s), fuel);
        if (st.final) {
            Outcome o;
            o.status = Outcome::Status::Final;
            o.tag = st.tag;
            o.value = st.result;
            o.heap = std::move(st.next.h);
            return o;
        }
        s = std::move(st.next);
    }
}

}  // namespace

DexStep step_dex(const DexProgram& prog, const DexMethod& m, DexState s, std::uint64_t& fuel)
{
    const int i = s.pc;
    const DexInsn& ins = m.at(i);
    switch (ins.op) {
    case DOp::Binop: {
        Int v = apply_binop(ins.bop, int_reg(s, ins.a), int_reg(s, ins.b));
        reg(s, ins.r) = Value::integer(std::move(v));
        return normal(std::move(s), i + 1);
    }
    case DOp::Const:
        reg(s, ins.r) = Value::integer(ins.c);
        return normal(std::move(s), i + 1);
    case DOp::Move: {
        Value v = reg(s, ins.a);
        reg(s, ins.r) = v;
        return normal(std::move(s), i + 1);
    }
    case DOp::Ifeq: {
        bool zero = int_reg(s, ins.r) == 0;
        return normal(std::move(s), zero ? ins.target : i + 1);
    }
    case DOp::Ifneq: {
        bool zero = int_reg(s, ins.r) == 0;
        return normal(std::move(s), zero ? i + 1 : ins.target);
    }
    case DOp::Goto:
        return normal(std::move(s), ins.target);
    case DOp::Return: {
        DexStep r;
        r.final = true;
        r.result = reg(s, ins.r);
        r.next = std::move(s);
        return r;
    }
    case DOp::New: {
        Loc l = s.h.alloc(prog.env.classes.make_default(ins.name));
        reg(s, ins.r) = Value::location(l);
        return normal(std::move(s), i + 1);
    }
    case DOp::Iget: {
        Value l = ref_reg(s, ins.a);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        Object& o = s.h.object(l.loc);
        auto f = o.fields.find(ins.name);
        if (f == o.fields.end()) throw MachineError("missing field '" + ins.name + "'");
        Value v = f->second;
        reg(s, ins.r) = v;
        return normal(std::move(s), i + 1);
    }
    case DOp::Iput: {
        Value l = ref_reg(s, ins.a);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        Value v = reg(s, ins.r);
        Object& o = s.h.object(l.loc);
        auto f = o.fields.find(ins.name);
        if (f == o.fields.end()) throw MachineError("missing field '" + ins.name + "'");
        f->second = v;
        return normal(std::move(s), i + 1);
    }
    case DOp::Newarray: {
        Int n = int_reg(s, ins.a);
        if (n < 0) throw MachineError("negative array size");
        Value dflt = ins.name == "ref" ? Value::null() : Value::integer(0);
        ArrayObj a{std::vector<Value>(static_cast<size_t>(n), dflt), m.id, i};
        Loc l = s.h.alloc(std::move(a));
        reg(s, ins.r) = Value::location(l);
        return normal(std::move(s), i + 1);
    }
    case DOp::Arraylength: {
        Value l = ref_reg(s, ins.a);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        size_t len = s.h.array(l.loc).elems.size();
        reg(s, ins.r) = Value::integer(Int(len));
        return normal(std::move(s), i + 1);
    }
    case DOp::Aget: {
        Value l = ref_reg(s, ins.a);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        Int j = int_reg(s, ins.b);
        ArrayObj& a = s.h.array(l.loc);
        Value v = a.elems[checked_index(a, j)];
        reg(s, ins.r) = v;
        return normal(std::move(s), i + 1);
    }
    case DOp::Aput: {
        Value l = ref_reg(s, ins.a);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        Int j = int_reg(s, ins.b);
        Value v = reg(s, ins.r);
        ArrayObj& a = s.h.array(l.loc);
        a.elems[checked_index(a, j)] = v;
        return normal(std::move(s), i + 1);
    }
    case DOp::Invoke: {
        const DexMethod& callee = prog.method(ins.name);
        if (ins.args.empty()) throw MachineError("invoke without receiver");
        Value l = ref_reg(s, ins.args[0]);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        std::vector<Value> regs(static_cast<size_t>(callee.n_registers), Value::integer(0));
        for (size_t k = 0; k < ins.args.size(); ++k) regs.at(k) = reg(s, ins.args[k]);
        Outcome o = run_nested(prog, callee, std::move(regs), std::move(s.h), fuel);
        s.h = std::move(o.heap);
        if (o.tag == kNorm) {
            s.ret = o.value;
            return normal(std::move(s), i + 1);
        }
        if (o.tag != kNp && !callee.exc_analysis.count(o.tag))
            throw MachineError("exception " + o.tag + " escapes " + callee.id +
                               " outside its exception analysis");
        return raise(m, std::move(s), o.tag, o.value.loc);
    }
    case DOp::Moveresult: {
        if (!s.ret) throw MachineError("moveresult reads an unset ret");
        reg(s, ins.r) = *s.ret;
        return normal(std::move(s), i + 1);
    }
    case DOp::Throw: {
        Value l = ref_reg(s, ins.r);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        Tag cls = s.h.object(l.loc).cls;
        if (cls != kNp && !m.classes_at(i).count(cls))
            throw MachineError("thrown class " + cls + " outside the class analysis at " +
                               std::to_string(i));
        return raise(m, std::move(s), cls, l.loc);
    }
    case DOp::Moveexception: {
        if (!s.ex) throw MachineError("moveexception reads an unset ex");
        reg(s, ins.r) = *s.ex;
        return normal(std::move(s), i + 1);
    }
    }
    throw MachineError("unknown instruction");
}

Outcome run_dex(const DexProgram& prog, const std::string& method, std::vector<Value> regs, Heap h,
                std::uint64_t fuel)
{
    Outcome o;
    try {
        const DexMethod& m = prog.method(method);
        return run_nested(prog, m, std::move(regs), std::move(h), fuel);
    } catch (const FuelExhausted&) {
        o.status = Outcome::Status::FuelExhausted;
    } catch (const MachineError& e) {
        o.status = Outcome::Status::Error;
        o.error = e.what();
    }
    return o;
}

namespace {

void exception_edge(std::vector<Succ>& out, const DexMethod& m, int pp, const Tag& cls)
{
    if (auto t = find_handler(m.handlers, pp, cls))
        out.push_back({cls, *t});
    else
        out.push_back({cls, std::nullopt});
}

}  // namespace

std::vector<Succ> successors_dex(const DexProgram& prog, const DexMethod& m, int pp)
{
    const DexInsn& ins = m.at(pp);
    std::vector<Succ> out;
    switch (ins.op) {
    case DOp::Goto: out.push_back({kNorm, ins.target}); break;
    case DOp::Ifeq:
    case DOp::Ifneq:
        out.push_back({kNorm, pp + 1});
        if (ins.target != pp + 1) out.push_back({kNorm, ins.target});
        break;
    case DOp::Return: out.push_back({kNorm, std::nullopt}); break;
    case DOp::Iget:
    case DOp::Iput:
    case DOp::Arraylength:
    case DOp::Aget:
    case DOp::Aput:
        out.push_back({kNorm, pp + 1});
        exception_edge(out, m, pp, kNp);
        break;
    case DOp::Throw: {
        std::set<Tag> classes = m.classes_at(pp);
        classes.insert(kNp);
        for (const auto& c : classes) exception_edge(out, m, pp, c);
        break;
    }
    case DOp::Invoke: {
        out.push_back({kNorm, pp + 1});
        std::set<Tag> classes;
        if (const DexMethod* callee = prog.find(ins.name)) classes = callee->exc_analysis;
        classes.insert(kNp);
        for (const auto& c : classes) exception_edge(out, m, pp, c);
        break;
    }
    default: out.push_back({kNorm, pp + 1}); break;
    }
    return out;
}

Cfg cfg_of(const DexProgram& prog, const DexMethod& m)
{
    Cfg g;
    g.size = m.size();
    for (int pp = 1; pp <= m.size(); ++pp) g.succ[pp] = successors_dex(prog, m, pp);
    return g;
}

void validate_dex(const DexProgram& prog)
{
    std::set<std::string> ids;
    for (const auto& m : prog.methods) {
        auto fail = [&](int pp, const std::string& what) {
            throw MachineError(m.id + ":" + std::to_string(pp) + ": " + what);
        };
        if (!ids.insert(m.id).second) fail(0, "duplicate method");
        if (m.code.empty()) fail(0, "empty method");
        if (m.n_registers < m.nb_args + 1 || m.n_locals > m.n_registers)
            fail(0, "register count too small");
        const int n = m.size();
        std::set<int> jump_targets, handler_targets;
        for (const auto& h : m.handlers) {
            if (h.start < 1 || h.end <= h.start || h.end > n + 1 || h.target < 1 || h.target > n)
                fail(h.start, "handler range or target out of bounds");
            handler_targets.insert(h.target);
        }
        auto check_reg = [&](int pp, int r) {
            if (r < 0 || r >= m.n_registers) fail(pp, "register r" + std::to_string(r) + " out of range");
        };
        for (int pp = 1; pp <= n; ++pp) {
            const DexInsn& ins = m.at(pp);
            switch (ins.op) {
            case DOp::Binop:
            case DOp::Aget:
            case DOp::Aput: check_reg(pp, ins.b); [[fallthrough]];
            case DOp::Move:
            case DOp::Iget:
            case DOp::Iput:
            case DOp::Newarray:
            case DOp::Arraylength: check_reg(pp, ins.a); [[fallthrough]];
            case DOp::Const:
            case DOp::Return:
            case DOp::New:
            case DOp::Moveresult:
            case DOp::Throw:
            case DOp::Moveexception: check_reg(pp, ins.r); break;
            case DOp::Ifeq:
            case DOp::Ifneq: check_reg(pp, ins.r); [[fallthrough]];
            case DOp::Goto:
                if (ins.target < 1 || ins.target > n) fail(pp, "jump target out of range");
                jump_targets.insert(ins.target);
                break;
            case DOp::Invoke: {
                const DexMethod* callee = prog.find(ins.name);
                if (!callee) fail(pp, "unknown method '" + ins.name + "'");
                if (static_cast<int>(ins.args.size()) != callee->nb_args + 1)
                    fail(pp, "invoke passes the wrong number of registers");
                for (int r : ins.args) check_reg(pp, r);
                break;
            }
            }
            for (const auto& s : successors_dex(prog, m, pp))
                if (s.target && *s.target > n) fail(pp, "execution falls off the end of the code");
        }
        for (int pp = 1; pp <= n; ++pp) {
            const DexInsn& ins = m.at(pp);
            if (ins.op == DOp::Moveresult) {
                if (pp == 1 || m.at(pp - 1).op != DOp::Invoke)
                    fail(pp, "moveresult not directly after an invoke");
                if (jump_targets.count(pp) || handler_targets.count(pp))
                    fail(pp, "moveresult is a jump target");
            }
            if (ins.op == DOp::Moveexception && !handler_targets.count(pp))
                fail(pp, "moveexception outside a handler entry");
        }
    }
}

}  // namespace dexflow
