#include "dexflow/jvm_machine.hpp"

#include <deque>
#include <set>

namespace dexflow {

namespace {

Value pop(JvmState& s)
{
    if (s.stack.empty()) throw MachineError("stack underflow at " + std::to_string(s.pc));
    Value v = s.stack.back();
    s.stack.pop_back();
    return v;
}

Int pop_int(JvmState& s)
{
    Value v = pop(s);
    if (!v.is_int()) throw MachineError("expected an integer at " + std::to_string(s.pc));
    return v.n;
}

Value pop_ref(JvmState& s)
{
    Value v = pop(s);
    if (v.is_int()) throw MachineError("expected a reference at " + std::to_string(s.pc));
    return v;
}

// Raise an exception object at location l with class cls.
JvmStep raise(const JvmMethod& m, JvmState s, const Tag& cls, Loc l)
{
    JvmStep r;
    r.tag = cls;
    if (auto t = find_handler(m.handlers, s.pc, cls)) {
        s.pc = *t;
        s.stack.assign(1, Value::location(l));
        r.next = std::move(s);
        return r;
    }
    r.final = true;
    r.result = Value::location(l);
    r.next = std::move(s);
    return r;
}

// Null dereference: allocate an np object and raise it.
JvmStep null_pointer(const JvmProgram& prog, const JvmMethod& m, JvmState s)
{
    Loc l = s.h.alloc(prog.env.classes.make_default(kNp));
    return raise(m, std::move(s), kNp, l);
}

JvmStep normal(JvmState s, int pc)
{
    JvmStep r;
    s.pc = pc;
    r.next = std::move(s);
    return r;
}

size_t checked_index(const ArrayObj& a, const Int& j)
{
    if (j < 0 || j >= Int(a.elems.size())) throw MachineError("array index out of bounds");
    return static_cast<size_t>(j);
}

Outcome run_nested(const JvmProgram& prog, const JvmMethod& m, std::vector<Value> locals, Heap h,
                   std::uint64_t& fuel)
{
    locals.resize(static_cast<size_t>(m.n_locals), Value::integer(0));
    JvmState s{1, std::move(locals), {}, std::move(h)};
    while (true) {
        if (fuel == 0) throw FuelExhausted{};
        --fuel;
        JvmStep st = step_jvm(prog, m, std::move(s), fuel);
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

JvmStep step_jvm(const JvmProgram& prog, const JvmMethod& m, JvmState s, std::uint64_t& fuel)
{
    const int i = s.pc;
    const JvmInsn& ins = m.at(i);
    switch (ins.op) {
    case JOp::Binop: {
        Int n1 = pop_int(s);
        Int n2 = pop_int(s);
        s.stack.push_back(Value::integer(apply_binop(ins.bop, n2, n1)));
        return normal(std::move(s), i + 1);
    }
    case JOp::Push:
        s.stack.push_back(Value::integer(ins.n));
        return normal(std::move(s), i + 1);
    case JOp::Pop:
        pop(s);
        return normal(std::move(s), i + 1);
    case JOp::Swap: {
        Value v1 = pop(s);
        Value v2 = pop(s);
        s.stack.push_back(v1);
        s.stack.push_back(v2);
        return normal(std::move(s), i + 1);
    }
    case JOp::Load:
        if (ins.x < 0 || ins.x >= static_cast<int>(s.locals.size()))
            throw MachineError("undefined local variable " + std::to_string(ins.x));
        s.stack.push_back(s.locals[ins.x]);
        return normal(std::move(s), i + 1);
    case JOp::Store: {
        if (ins.x < 0 || ins.x >= static_cast<int>(s.locals.size()))
            throw MachineError("undefined local variable " + std::to_string(ins.x));
        s.locals[ins.x] = pop(s);
        return normal(std::move(s), i + 1);
    }
    case JOp::Ifeq: {
        Int n = pop_int(s);
        return normal(std::move(s), n == 0 ? ins.x : i + 1);
    }
    case JOp::Goto:
        return normal(std::move(s), ins.x);
    case JOp::Return: {
        JvmStep r;
        r.final = true;
        r.result = pop(s);
        r.next = std::move(s);
        return r;
    }
    case JOp::New: {
        Loc l = s.h.alloc(prog.env.classes.make_default(ins.name));
        s.stack.push_back(Value::location(l));
        return normal(std::move(s), i + 1);
    }
    case JOp::Getfield: {
        Value l = pop_ref(s);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        Object& o = s.h.object(l.loc);
        auto f = o.fields.find(ins.name);
        if (f == o.fields.end()) throw MachineError("missing field '" + ins.name + "'");
        Value v = f->second;
        s.stack.push_back(v);
        return normal(std::move(s), i + 1);
    }
    case JOp::Putfield: {
        Value v = pop(s);
        Value l = pop_ref(s);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        Object& o = s.h.object(l.loc);
        auto f = o.fields.find(ins.name);
        if (f == o.fields.end()) throw MachineError("missing field '" + ins.name + "'");
        f->second = v;
        return normal(std::move(s), i + 1);
    }
    case JOp::Newarray: {
        Int n = pop_int(s);
        if (n < 0) throw MachineError("negative array size");
        Value dflt = ins.name == "ref" ? Value::null() : Value::integer(0);
        ArrayObj a{std::vector<Value>(static_cast<size_t>(n), dflt), m.id, i};
        Loc l = s.h.alloc(std::move(a));
        s.stack.push_back(Value::location(l));
        return normal(std::move(s), i + 1);
    }
    case JOp::Arraylength: {
        Value l = pop_ref(s);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        size_t len = s.h.array(l.loc).elems.size();
        s.stack.push_back(Value::integer(Int(len)));
        return normal(std::move(s), i + 1);
    }
    case JOp::Arrayload: {
        Int j = pop_int(s);
        Value l = pop_ref(s);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        ArrayObj& a = s.h.array(l.loc);
        Value v = a.elems[checked_index(a, j)];
        s.stack.push_back(v);
        return normal(std::move(s), i + 1);
    }
    case JOp::Arraystore: {
        Value v = pop(s);
        Int j = pop_int(s);
        Value l = pop_ref(s);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        ArrayObj& a = s.h.array(l.loc);
        a.elems[checked_index(a, j)] = v;
        return normal(std::move(s), i + 1);
    }
    case JOp::Invoke: {
        const JvmMethod& callee = prog.method(ins.name);
        std::vector<Value> args;  // args[0] is the top of the stack
        for (int k = 0; k < callee.nb_args; ++k) args.push_back(pop(s));
        Value l = pop_ref(s);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        std::vector<Value> locals(static_cast<size_t>(callee.n_locals), Value::integer(0));
        locals[0] = l;
        for (size_t k = 0; k < args.size(); ++k) locals[k + 1] = args[k];
        Outcome o = run_nested(prog, callee, std::move(locals), std::move(s.h), fuel);
        s.h = std::move(o.heap);
        if (o.tag == kNorm) {
            s.stack.push_back(o.value);
            return normal(std::move(s), i + 1);
        }
        if (o.tag != kNp && !callee.exc_analysis.count(o.tag))
            throw MachineError("exception " + o.tag + " escapes " + callee.id +
                               " outside its exception analysis");
        return raise(m, std::move(s), o.tag, o.value.loc);
    }
    case JOp::Throw: {
        Value l = pop_ref(s);
        if (l.is_null()) return null_pointer(prog, m, std::move(s));
        Tag cls = s.h.object(l.loc).cls;
        if (cls != kNp && !m.classes_at(i).count(cls))
            throw MachineError("thrown class " + cls + " outside the class analysis at " +
                               std::to_string(i));
        return raise(m, std::move(s), cls, l.loc);
    }
    }
    throw MachineError("unknown instruction");
}

Outcome run_jvm(const JvmProgram& prog, const std::string& method, std::vector<Value> locals,
                Heap h, std::uint64_t fuel)
{
    Outcome o;
    try {
        const JvmMethod& m = prog.method(method);
        return run_nested(prog, m, std::move(locals), std::move(h), fuel);
    } catch (const FuelExhausted&) {
        o.status = Outcome::Status::FuelExhausted;
    } catch (const MachineError& e) {
        o.status = Outcome::Status::Error;
        o.error = e.what();
    }
    return o;
}

namespace {

void exception_edge(std::vector<Succ>& out, const JvmMethod& m, int pp, const Tag& cls)
{
    if (auto t = find_handler(m.handlers, pp, cls))
        out.push_back({cls, *t});
    else
        out.push_back({cls, std::nullopt});
}

}  // namespace

std::vector<Succ> successors_jvm(const JvmProgram& prog, const JvmMethod& m, int pp)
{
    const JvmInsn& ins = m.at(pp);
    std::vector<Succ> out;
    switch (ins.op) {
    case JOp::Goto: out.push_back({kNorm, ins.x}); break;
    case JOp::Ifeq:
        out.push_back({kNorm, pp + 1});
        if (ins.x != pp + 1) out.push_back({kNorm, ins.x});
        break;
    case JOp::Return: out.push_back({kNorm, std::nullopt}); break;
    case JOp::Getfield:
    case JOp::Putfield:
    case JOp::Arraylength:
    case JOp::Arrayload:
    case JOp::Arraystore:
        out.push_back({kNorm, pp + 1});
        exception_edge(out, m, pp, kNp);
        break;
    case JOp::Throw: {
        std::set<Tag> classes = m.classes_at(pp);
        classes.insert(kNp);
        for (const auto& c : classes) exception_edge(out, m, pp, c);
        break;
    }
    case JOp::Invoke: {
        out.push_back({kNorm, pp + 1});
        std::set<Tag> classes;
        if (const JvmMethod* callee = prog.find(ins.name)) classes = callee->exc_analysis;
        classes.insert(kNp);
        for (const auto& c : classes) exception_edge(out, m, pp, c);
        break;
    }
    default: out.push_back({kNorm, pp + 1}); break;
    }
    return out;
}

Cfg cfg_of(const JvmProgram& prog, const JvmMethod& m)
{
    Cfg g;
    g.size = m.size();
    for (int pp = 1; pp <= m.size(); ++pp) g.succ[pp] = successors_jvm(prog, m, pp);
    return g;
}

void validate_jvm(const JvmProgram& prog)
{
    std::set<std::string> ids;
    for (const auto& m : prog.methods) {
        auto fail = [&](int pp, const std::string& what) {
            throw MachineError(m.id + ":" + std::to_string(pp) + ": " + what);
        };
        if (!ids.insert(m.id).second) fail(0, "duplicate method");
        if (m.code.empty()) fail(0, "empty method");
        if (m.n_locals < m.nb_args + 1) fail(0, "fewer locals than receiver plus arguments");
        const int n = m.size();
        for (const auto& h : m.handlers) {
            if (h.start < 1 || h.end <= h.start || h.end > n + 1 || h.target < 1 || h.target > n)
                fail(h.start, "handler range or target out of bounds");
        }
        for (int pp = 1; pp <= n; ++pp) {
            const JvmInsn& ins = m.at(pp);
            if ((ins.op == JOp::Goto || ins.op == JOp::Ifeq) && (ins.x < 1 || ins.x > n))
                fail(pp, "jump target out of range");
            if ((ins.op == JOp::Load || ins.op == JOp::Store) &&
                (ins.x < 0 || ins.x >= m.n_locals))
                fail(pp, "local variable out of range");
            if (ins.op == JOp::Invoke && !prog.find(ins.name))
                fail(pp, "unknown method '" + ins.name + "'");
            for (const auto& s : successors_jvm(prog, m, pp))
                if (s.target && *s.target > n) fail(pp, "execution falls off the end of the code");
        }
        std::vector<bool> seen(static_cast<size_t>(n + 1), false);
        std::deque<int> work{1};
        seen[1] = true;
        while (!work.empty()) {
            int pp = work.front();
            work.pop_front();
            for (const auto& s : successors_jvm(prog, m, pp))
                if (s.target && !seen[*s.target]) {
                    seen[*s.target] = true;
                    work.push_back(*s.target);
                }
        }
        for (int pp = 1; pp <= n; ++pp)
            if (!seen[pp]) fail(pp, "unreachable code");
    }
}

}  // namespace dexflow
