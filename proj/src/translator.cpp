#include "dexflow/translator.hpp"

#include <algorithm>
#include <deque>

namespace dexflow {

BasicBlock& BlockEnv::block(int label)
{
    auto it = BMap.find(label);
    if (it == BMap.end()) throw TranslationError("no block at label " + std::to_string(label));
    return it->second;
}

namespace {

bool may_throw(JOp op)
{
    switch (op) {
    case JOp::Getfield:
    case JOp::Putfield:
    case JOp::Arraylength:
    case JOp::Arrayload:
    case JOp::Arraystore:
    case JOp::Invoke:
    case JOp::Throw:
        return true;
    default:
        return false;
    }
}

bool dex_may_throw(DOp op)
{
    switch (op) {
    case DOp::Iget:
    case DOp::Iput:
    case DOp::Arraylength:
    case DOp::Aget:
    case DOp::Aput:
    case DOp::Invoke:
    case DOp::Throw:
        return true;
    default:
        return false;
    }
}

int callee_args(const JvmProgram& prog, const JvmMethod& m, int pp)
{
    const JvmMethod* callee = prog.find(m.at(pp).name);
    if (!callee) throw TranslationError(m.id + ":" + std::to_string(pp) + ": unknown method " + m.at(pp).name);
    return callee->nb_args;
}

// Handlers that catch some exception raised at pp, declaration order.
std::vector<int> associated_handlers(const JvmProgram& prog, const JvmMethod& m, int pp)
{
    std::set<int> out;
    for (const auto& s : successors_jvm(prog, m, pp)) {
        if (s.tag == kNorm || s.returns()) continue;
        for (size_t k = 0; k < m.handlers.size(); ++k) {
            const Handler& h = m.handlers[k];
            if (h.start <= pp && pp < h.end && h.cls == s.tag) {
                out.insert(static_cast<int>(k));
                break;
            }
        }
    }
    return {out.begin(), out.end()};
}

DexInsn make(DOp op, int r = 0, int a = 0, int b = 0)
{
    DexInsn d;
    d.op = op;
    d.r = r;
    d.a = a;
    d.b = b;
    return d;
}

}  // namespace

std::map<int, int> stack_tops(const JvmProgram& prog, const JvmMethod& m)
{
    std::map<int, int> ts;
    std::deque<int> work;
    auto flow = [&](int from, int to, int v) {
        if (v < m.n_locals)
            throw TranslationError(m.id + ":" + std::to_string(from) + ": stack underflow");
        auto [it, fresh] = ts.emplace(to, v);
        if (fresh) {
            work.push_back(to);
        } else if (it->second != v) {
            throw TranslationError(m.id + ":" + std::to_string(to) + ": stack heights " +
                                   std::to_string(it->second - m.n_locals) + " and " +
                                   std::to_string(v - m.n_locals) + " meet");
        }
    };
    ts[1] = m.n_locals;
    work.push_back(1);
    while (!work.empty()) {
        const int i = work.front();
        work.pop_front();
        const int t = ts.at(i);
        const JvmInsn& ins = m.at(i);
        int after = t;
        switch (ins.op) {
        case JOp::Push:
        case JOp::Load:
        case JOp::New: after = t + 1; break;
        case JOp::Pop:
        case JOp::Store:
        case JOp::Ifeq:
        case JOp::Binop:
        case JOp::Arrayload: after = t - 1; break;
        case JOp::Putfield: after = t - 2; break;
        case JOp::Arraystore: after = t - 3; break;
        case JOp::Invoke: after = t - callee_args(prog, m, i); break;
        default: break;
        }
        // Operands consumed by the instruction itself.
        int need = 0;
        switch (ins.op) {
        case JOp::Pop: case JOp::Store: case JOp::Ifeq: case JOp::Return: case JOp::Getfield:
        case JOp::Newarray: case JOp::Arraylength: case JOp::Throw: need = 1; break;
        case JOp::Binop: case JOp::Swap: case JOp::Putfield: case JOp::Arrayload: need = 2; break;
        case JOp::Arraystore: need = 3; break;
        case JOp::Invoke: need = callee_args(prog, m, i) + 1; break;
        default: break;
        }
        if (t - need < m.n_locals)
            throw TranslationError(m.id + ":" + std::to_string(i) + ": stack underflow");
        for (const auto& s : successors_jvm(prog, m, i)) {
            if (s.returns()) continue;
            flow(i, *s.target, s.tag == kNorm ? after : m.n_locals + 1);
        }
    }
    return ts;
}

BlockEnv start_block(const JvmProgram& prog, const JvmMethod& m)
{
    const int n = m.size();
    BlockEnv env;
    env.n_locals = m.n_locals;
    env.maxLabel = n + 1;
    int max_hpc = 0;
    for (const auto& h : m.handlers) max_hpc = std::max(max_hpc, h.target);
    env.retLabel = env.maxLabel + max_hpc + 1;
    env.next_label = env.retLabel + 1;

    auto mark = [&](int pp) {
        if (pp < 1 || pp > n) return;
        env.BMap.try_emplace(pp);
        env.PMap[pp] = pp;
    };
    mark(1);
    for (int i = 1; i <= n; ++i) {
        const JvmInsn& ins = m.at(i);
        switch (ins.op) {
        case JOp::Goto: mark(ins.x); break;
        case JOp::Ifeq:
            mark(ins.x);
            mark(i + 1);
            break;
        case JOp::Return: mark(i + 1); break;
        default:
            if (!may_throw(ins.op)) break;
            mark(i + 1);
            for (int k : associated_handlers(prog, m, i)) {
                const Handler& h = m.handlers[static_cast<size_t>(k)];
                mark(h.start);
                mark(h.end);
                mark(h.target);
                const int ipc = env.int_label(h.target);
                env.BMap.try_emplace(ipc);
                env.PMap[ipc] = ipc;
            }
        }
    }
    // Points inside a block share the label of its first point.
    for (int i = 1; i <= n; ++i)
        if (!env.BMap.count(i)) env.PMap[i] = env.PMap.at(i - 1);
    for (auto& [label, b] : env.BMap) {
        if (label > n) continue;
        b.first_pp = b.last_pp = label;
        while (b.last_pp < n && !env.BMap.count(b.last_pp + 1)) ++b.last_pp;
    }
    return env;
}

void trace_parent_child(const JvmProgram& prog, const JvmMethod& m, BlockEnv& env)
{
    const int n = m.size();
    auto link = [&](int from, int to) {
        env.block(from).succs.insert(to);
        env.block(to).parents.insert(from);
    };
    auto add_handlers = [&](int i) {
        const int cur = env.PMap.at(i);
        for (int k : associated_handlers(prog, m, i)) {
            const Handler& h = m.handlers[static_cast<size_t>(k)];
            const int ipc = env.int_label(h.target);
            BasicBlock& hb = env.block(ipc);
            hb.kind = BasicBlock::Kind::Moveexception;
            hb.gens.insert(i);
            link(cur, ipc);
            env.block(cur).handlers.push_back(k);
            link(ipc, h.target);
            hb.pSucc = h.target;
        }
        env.block(cur).throws = true;
    };
    for (int i = 1; i <= n; ++i) {
        const JvmInsn& ins = m.at(i);
        const int cur = env.PMap.at(i);
        BasicBlock& b = env.block(cur);
        if (b.last_pp == i) b.gens.insert(i);
        switch (ins.op) {
        case JOp::Goto:
            link(cur, ins.x);
            b.pSucc = ins.x;
            break;
        case JOp::Ifeq:
            link(cur, i + 1);
            link(cur, ins.x);
            b.pSucc = i + 1;
            break;
        case JOp::Return: {
            auto [it, fresh] = env.BMap.try_emplace(env.retLabel);
            if (fresh) it->second.kind = BasicBlock::Kind::Return;
            it->second.gens.insert(i);
            link(cur, env.retLabel);
            env.block(cur).pSucc = env.retLabel;
            break;
        }
        case JOp::Invoke: {
            const int l = env.getAvailableLabel();
            BasicBlock& rb = env.BMap[l];
            rb.kind = BasicBlock::Kind::Moveresult;
            rb.gens.insert(i);
            env.result_label[i] = l;
            link(cur, l);
            env.block(cur).pSucc = l;
            link(l, i + 1);
            rb.pSucc = i + 1;
            add_handlers(i);
            break;
        }
        case JOp::Throw: add_handlers(i); break;
        default:
            if (may_throw(ins.op)) {
                link(cur, i + 1);
                b.pSucc = i + 1;
                add_handlers(i);
            } else if (i < n && env.BMap.count(i + 1)) {
                link(cur, i + 1);
                b.pSucc = i + 1;
            }
        }
    }
}

void translate_instructions(const JvmProgram& prog, const JvmMethod& m, BlockEnv& env)
{
    env.TSMap = stack_tops(prog, m);
    int max_ts = m.n_locals;
    for (const auto& [pp, t] : env.TSMap) {
        max_ts = std::max(max_ts, t);
        if (m.at(pp).op == JOp::Swap) max_ts = std::max(max_ts, t + 1);
    }
    env.n_registers = std::max(m.n_locals + m.max_stack, max_ts) + 1;

    const int n = m.size();
    for (int i = 1; i <= n; ++i) {
        auto tsit = env.TSMap.find(i);
        if (tsit == env.TSMap.end()) throw TranslationError(m.id + ":" + std::to_string(i) + ": unreachable");
        const int t = tsit->second;
        const JvmInsn& ins = m.at(i);
        BasicBlock& b = env.block(env.PMap.at(i));
        auto put = [&](DexInsn d) {
            b.insn.push_back(std::move(d));
            b.origin.push_back(i);
        };
        switch (ins.op) {
        case JOp::Push: {
            DexInsn d = make(DOp::Const, t);
            d.c = ins.n;
            put(d);
            break;
        }
        case JOp::Pop:
        case JOp::Goto: break;
        case JOp::Load: put(make(DOp::Move, t, ins.x)); break;
        case JOp::Store: put(make(DOp::Move, ins.x, t - 1)); break;
        case JOp::Binop: {
            DexInsn d = make(DOp::Binop, t - 2, t - 2, t - 1);
            d.bop = ins.bop;
            put(d);
            break;
        }
        case JOp::Swap:
            put(make(DOp::Move, t, t - 2));
            put(make(DOp::Move, t + 1, t - 1));
            put(make(DOp::Move, t - 2, t + 1));
            put(make(DOp::Move, t - 1, t));
            break;
        case JOp::Ifeq: {
            DexInsn d = make(DOp::Ifeq, t - 1);
            d.target = ins.x;
            put(d);
            break;
        }
        case JOp::Return: {
            put(make(DOp::Move, 0, t - 1));
            BasicBlock& rb = env.block(env.retLabel);
            if (rb.insn.empty()) {
                rb.insn.push_back(make(DOp::Return, 0));
                rb.origin.push_back(0);
            }
            break;
        }
        case JOp::New: {
            DexInsn d = make(DOp::New, t);
            d.name = ins.name;
            put(d);
            break;
        }
        case JOp::Getfield: {
            DexInsn d = make(DOp::Iget, t - 1, t - 1);
            d.name = ins.name;
            put(d);
            break;
        }
        case JOp::Putfield: {
            DexInsn d = make(DOp::Iput, t - 1, t - 2);
            d.name = ins.name;
            put(d);
            break;
        }
        case JOp::Newarray: {
            DexInsn d = make(DOp::Newarray, t - 1, t - 1);
            d.name = ins.name;
            put(d);
            break;
        }
        case JOp::Arraylength: put(make(DOp::Arraylength, t - 1, t - 1)); break;
        case JOp::Arrayload: put(make(DOp::Aget, t - 2, t - 2, t - 1)); break;
        case JOp::Arraystore: put(make(DOp::Aput, t - 1, t - 3, t - 2)); break;
        case JOp::Invoke: {
            const int a = callee_args(prog, m, i);
            DexInsn d = make(DOp::Invoke);
            d.name = ins.name;
            // Receiver first, then the arguments from the top of the stack down.
            d.args.push_back(t - a - 1);
            for (int k = 1; k <= a; ++k) d.args.push_back(t - k);
            put(d);
            BasicBlock& rb = env.block(env.result_label.at(i));
            rb.insn = {make(DOp::Moveresult, t - a - 1)};
            rb.origin = {0};
            break;
        }
        case JOp::Throw: put(make(DOp::Throw, t - 1)); break;
        }
    }
    for (auto& [label, b] : env.BMap) {
        if (b.kind != BasicBlock::Kind::Moveexception) continue;
        b.insn = {make(DOp::Moveexception, m.n_locals)};
        b.origin = {0};
    }
}

void pick_order(BlockEnv& env)
{
    auto unordered = [&](int l) { return !env.block(l).order.has_value(); };
    auto starting_point = [&](int x) {
        std::set<int> loop{x};
        for (;;) {
            bool moved = false;
            for (int p : env.block(x).parents) {
                if (loop.count(p)) return x;
                const BasicBlock& bp = env.block(p);
                if (bp.pSucc == x && !bp.order) {
                    loop.insert(p);
                    x = p;
                    moved = true;
                    break;
                }
            }
            if (!moved) return x;
        }
    };
    auto trace = [&](int x, int order) {
        for (;;) {
            BasicBlock& b = env.block(x);
            b.order = order++;
            if (!b.pSucc) return order;
            if (unordered(*b.pSucc)) {
                x = *b.pSucc;
                continue;
            }
            std::optional<int> next;
            for (int s : b.succs)
                if (unordered(s)) {
                    next = s;
                    break;
                }
            if (!next) return order;
            x = *next;
        }
    };
    int order = 0;
    if (env.BMap.count(1)) order = trace(1, order);
    for (;;) {
        std::optional<int> x;
        for (const auto& [label, b] : env.BMap)
            if (!b.order) {
                x = label;
                break;
            }
        if (!x) break;
        order = trace(starting_point(*x), order);
    }
}

CompiledMethod emit(const JvmMethod& m, const BlockEnv& env)
{
    std::vector<int> order;
    for (const auto& [label, b] : env.BMap) {
        if (!b.order) throw TranslationError(m.id + ": block " + std::to_string(label) + " has no order");
        order.push_back(label);
    }
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return *env.BMap.at(a).order < *env.BMap.at(b).order; });

    CompiledMethod res;
    DexMethod& dm = res.method;
    AddressMap& am = res.amap;
    am.order = order;
    std::vector<int> origin;  // per output instruction, 0 for helpers
    std::map<int, int> block_end;
    int pc = 1;
    for (size_t k = 0; k < order.size(); ++k) {
        const int label = order[k];
        const BasicBlock& b = env.BMap.at(label);
        const int next = k + 1 < order.size() ? order[k + 1] : -1;
        am.blockOf[label] = pc;
        for (size_t j = 0; j < b.insn.size(); ++j) {
            const int o = b.origin[j];
            if (o != 0) {
                am.fwd[o].push_back(pc);
                am.back[pc] = o;
            } else {
                AddressMap::AuxPoint ap;
                ap.kind = b.kind == BasicBlock::Kind::Moveresult      ? AddressMap::Aux::Moveresult
                          : b.kind == BasicBlock::Kind::Moveexception ? AddressMap::Aux::Moveexception
                                                                      : AddressMap::Aux::Return;
                ap.gens = b.gens;
                ap.block = label;
                am.aux[pc] = ap;
            }
            dm.code.push_back(b.insn[j]);
            origin.push_back(o);
            ++pc;
        }
        // Points with an empty translation begin where the next one does.
        if (b.kind == BasicBlock::Kind::Code) {
            int resume = pc;
            for (int i = b.last_pp; i >= b.first_pp; --i) {
                auto f = am.fwd.find(i);
                if (f != am.fwd.end() && !f->second.empty()) resume = f->second.front();
                am.start[i] = resume;
            }
        }
        if (b.pSucc && b.pSucc != next) {
            const bool flip = next != -1 && !b.insn.empty() && dm.code.back().op == DOp::Ifeq &&
                              dm.code.back().target == next;
            if (flip) {
                dm.code.back().op = DOp::Ifneq;
                dm.code.back().target = *b.pSucc;
            } else {
                DexInsn g;
                g.op = DOp::Goto;
                g.target = *b.pSucc;
                dm.code.push_back(g);
                origin.push_back(0);
                AddressMap::AuxPoint ap;
                ap.kind = AddressMap::Aux::Goto;
                ap.gens = b.kind == BasicBlock::Kind::Code ? std::set<int>{b.last_pp} : b.gens;
                ap.block = label;
                am.aux[pc] = ap;
                ++pc;
            }
        }
        block_end[label] = pc;
    }
    // Empty code blocks at the very end would start past the code; they
    // cannot occur since such blocks always need a goto.
    for (auto& ins : dm.code) {
        if (!is_jump(ins)) continue;
        auto it = am.blockOf.find(ins.target);
        if (it == am.blockOf.end() || it->second >= pc)
            throw TranslationError(m.id + ": unresolved label " + std::to_string(ins.target));
        ins.target = it->second;
    }
    for (auto& [i, s] : am.start)
        if (s >= pc) throw TranslationError(m.id + ": point " + std::to_string(i) + " lands past the code");

    // Handler entries over runs of blocks sharing a handler list.
    std::vector<int> cH;
    int cS = 0, cE = 0;
    auto flush = [&]() {
        for (int k : cH) {
            const Handler& h = m.handlers[static_cast<size_t>(k)];
            dm.handlers.push_back(
                {cS, cE, am.blockOf.at(env.int_label(h.target)), h.cls});
        }
        cH.clear();
    };
    for (int label : order) {
        const BasicBlock& b = env.BMap.at(label);
        if (!b.handlers.empty()) {
            if (b.handlers == cH) {
                cE = block_end.at(label);
            } else {
                flush();
                cS = am.blockOf.at(label);
                cE = block_end.at(label);
                cH = b.handlers;
            }
        } else if (b.throws) {
            flush();
        }
    }
    flush();

    dm.id = m.id;
    dm.n_registers = env.n_registers;
    dm.n_locals = m.n_locals;
    dm.nb_args = m.nb_args;
    dm.exc_analysis = m.exc_analysis;
    dm.kinds = m.kinds;
    for (const auto& [i, cls] : m.class_analysis)
        for (int d : am.fwd[i])
            if (dex_may_throw(dm.at(d).op)) dm.class_analysis[d] = cls;
    for (const auto& [i, name] : m.labels) {
        auto it = am.blockOf.find(i);
        if (it != am.blockOf.end() && env.PMap.at(i) == i) dm.labels.emplace(it->second, name);
    }
    if (auto rb = am.blockOf.find(env.retLabel); rb != am.blockOf.end() && !dm.labels.count(rb->second)) {
        bool taken = false;
        for (const auto& [pp, name] : dm.labels) taken = taken || name == "ret";
        if (!taken) dm.labels[rb->second] = "ret";
    }
    for (auto it = am.fwd.begin(); it != am.fwd.end();)
        it = it->second.empty() ? am.fwd.erase(it) : std::next(it);
    return res;
}

CompiledMethod compile_method(const JvmProgram& prog, const JvmMethod& m)
{
    BlockEnv env = start_block(prog, m);
    trace_parent_child(prog, m, env);
    translate_instructions(prog, m, env);
    pick_order(env);
    return emit(m, env);
}

CompiledProgram compile_program(const JvmProgram& prog)
{
    CompiledProgram out;
    out.prog.env = prog.env;
    out.prog.env.policy.at.clear();
    for (const auto& m : prog.methods) {
        CompiledMethod cm = compile_method(prog, m);
        auto at = prog.env.policy.at.find(m.id);
        if (at != prog.env.policy.at.end())
            for (const auto& [pp, lvl] : at->second)
                for (int d : cm.amap.fwd[pp])
                    if (cm.method.at(d).op == DOp::Newarray) out.prog.env.policy.at[m.id][d] = lvl;
        out.amaps[m.id] = std::move(cm.amap);
        out.prog.methods.push_back(std::move(cm.method));
    }
    for (auto& [id, am] : out.amaps)
        for (auto it = am.fwd.begin(); it != am.fwd.end();)
            it = it->second.empty() ? am.fwd.erase(it) : std::next(it);
    return out;
}

RegisterTyping compile_stack_type(const Lattice& lat, const StackType& st,
                                  const std::vector<ExtLevel>& ka, int n_locals, int n_registers)
{
    const int h = static_cast<int>(st.size());
    if (n_locals + h > n_registers)
        throw TranslationError("stack of height " + std::to_string(h) + " does not fit in " +
                               std::to_string(n_registers - n_locals) + " registers");
    RegisterTyping rt(static_cast<size_t>(n_registers + 2), ExtLevel::simple(lat.top()));
    for (int r = 0; r < n_locals; ++r)
        rt[static_cast<size_t>(r)] =
            r < static_cast<int>(ka.size()) ? ka[static_cast<size_t>(r)] : ExtLevel::simple(lat.bottom());
    for (int j = 0; j < h; ++j) rt[static_cast<size_t>(n_locals + h - 1 - j)] = st[static_cast<size_t>(j)];
    return rt;
}

Cdr translate_cdr(const Cdr& cdr, const JvmMethod& m, const AddressMap& amap,
                  const DexProgram& dprog, const DexMethod& dm)
{
    const Cfg g = cfg_of(dprog, dm);
    std::set<std::pair<int, Tag>> keys;
    for (const auto& [k, v] : cdr.region) keys.insert(k);
    for (const auto& [k, v] : cdr.jun) keys.insert(k);

    auto branch_point = [&](int i) {
        auto f = amap.fwd.find(i);
        if (f != amap.fwd.end())
            for (int d : f->second)
                if (is_branching(g, d)) return d;
        throw TranslationError(m.id + ":" + std::to_string(i) + ": no branching instruction in its translation");
    };
    // Helper blocks hanging off a DEX point: moveresult after an invoke and
    // the moveexception entries of its handlers, with their gotos.
    auto helper_points = [&](int label) {
        std::set<int> out;
        for (const auto& [pp, ap] : amap.aux)
            if (ap.block == label) out.insert(pp);
        return out;
    };

    Cdr out;
    for (const auto& key : keys) {
        const auto& [i, tag] = key;
        if (i < 1 || i > m.size())
            throw TranslationError(m.id + ": region entry at unknown point " + std::to_string(i));
        const int ib = branch_point(i);
        const std::set<int>& reg = cdr.region_of(i, tag);
        std::set<int> r;
        for (int j : reg) {
            auto f = amap.fwd.find(j);
            if (f != amap.fwd.end()) r.insert(f->second.begin(), f->second.end());
        }
        for (const auto& [pp, ap] : amap.aux) {
            if (ap.kind == AddressMap::Aux::Goto) continue;
            for (int gpp : ap.gens)
                if (reg.count(gpp)) r.insert(pp);
        }
        // A tag that leaves the method covers every other region at ib, so it
        // takes the helper entries of all tags.
        bool leaves = false;
        for (const auto& s : g.at(ib))
            if (s.tag == tag && s.returns()) leaves = true;
        for (const auto& s : g.at(ib)) {
            if ((s.tag != tag && !leaves) || s.returns()) continue;
            auto ap = amap.aux.find(*s.target);
            if (ap == amap.aux.end()) continue;
            if (ap->second.kind == AddressMap::Aux::Moveresult ||
                ap->second.kind == AddressMap::Aux::Moveexception)
                r.insert(*s.target);
        }
        // Appended gotos follow their block.
        for (const auto& [pp, ap] : amap.aux) {
            if (ap.kind != AddressMap::Aux::Goto) continue;
            bool in = false;
            for (int q : helper_points(ap.block))
                if (q != pp && r.count(q)) in = true;
            if (amap.aux.count(pp - 1) == 0 || amap.aux.at(pp - 1).block != ap.block)
                for (int gpp : ap.gens)
                    if (reg.count(gpp)) in = true;
            if (in) r.insert(pp);
        }
        if (!r.empty() || cdr.region.count(key)) out.region[{ib, tag}] = std::move(r);
        if (auto j = cdr.jun_of(i, tag)) {
            auto st = amap.start.find(*j);
            if (st == amap.start.end())
                throw TranslationError(m.id + ": junction " + std::to_string(*j) + " has no address");
            out.jun[{ib, tag}] = st->second;
        }
    }
    return out;
}

SecurityEnv translate_se(const Lattice& lat, const SecurityEnv& se, const AddressMap& amap,
                         const DexMethod& dm)
{
    auto level = [&](int i) {
        auto it = se.find(i);
        if (it == se.end()) throw TranslationError("se has no level for point " + std::to_string(i));
        return it->second;
    };
    SecurityEnv out;
    for (int pp = 1; pp <= dm.size(); ++pp) {
        if (auto b = amap.back.find(pp); b != amap.back.end()) {
            out[pp] = level(b->second);
        } else if (auto a = amap.aux.find(pp); a != amap.aux.end()) {
            Level l = lat.bottom();
            for (int gpp : a->second.gens) l = lat.lub(l, level(gpp));
            out[pp] = l;
        } else {
            throw TranslationError(dm.id + ": point " + std::to_string(pp) + " has no origin");
        }
    }
    return out;
}

TranslatedCertificate translate_certificate(const JvmProgram& jprog, const JvmMethod& jm,
                                            const MethodPolicy& sgn, const JvmCertificate& cert,
                                            const DexProgram& dprog, const DexMethod& dm,
                                            const AddressMap& amap)
{
    const Lattice& lat = dprog.env.lat;
    (void)jprog;
    TranslatedCertificate out;
    DexCertificate& dc = out.cert;
    dc.cdr = translate_cdr(cert.cdr, jm, amap, dprog, dm);
    dc.se = translate_se(lat, cert.se, amap, dm);

    std::map<int, Typing> pinned;
    for (const auto& [i, pps] : amap.fwd) {
        auto s = cert.S.find(i);
        if (s == cert.S.end() || pps.empty()) continue;
        pinned[pps.front()] = compile_stack_type(lat, s->second, sgn.ka, dm.n_locals, dm.n_registers);
    }
    const Cfg g = cfg_of(dprog, dm);
    const TransferFn tf = dex_transfer(dprog, dm, sgn);
    const RegisterTyping entry = entry_typing(lat, dm, sgn);
    const int limit = (lat.size() + 1) * (dm.size() + 1) + 2;
    for (int round = 0;; ++round) {
        if (round > limit) throw CheckerError("se translation did not stabilise");
        dc.RT.clear();
        propagate(lat, g, entry, tf, dc.se, dc.RT, pinned);
        if (!raise_se(lat, g, dc.RT, tf, dc.cdr, dc.se)) break;
    }
    for (const auto& [pp, i] : amap.back)
        if (auto s = cert.se.find(i); s != cert.se.end() && dc.se.at(pp) != s->second) ++out.raised;
    return out;
}

}  // namespace dexflow
