#include "dexflow/jvm_checker.hpp"

namespace dexflow {

namespace {

using K = Violation::Kind;

StackType drop(const StackType& st, size_t n)
{
    return StackType(st.begin() + static_cast<long>(n), st.end());
}

StackType push(ExtLevel top, const StackType& rest)
{
    StackType out;
    out.reserve(rest.size() + 1);
    out.push_back(std::move(top));
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

const char* rule_name(JOp op)
{
    switch (op) {
    case JOp::Binop: return "binop";
    case JOp::Push: return "push";
    case JOp::Pop: return "pop";
    case JOp::Swap: return "swap";
    case JOp::Load: return "load";
    case JOp::Store: return "store";
    case JOp::Ifeq: return "ifeq";
    case JOp::Goto: return "goto";
    case JOp::Return: return "return";
    case JOp::New: return "new";
    case JOp::Getfield: return "getfield";
    case JOp::Putfield: return "putfield";
    case JOp::Newarray: return "newarray";
    case JOp::Arraylength: return "arraylength";
    case JOp::Arrayload: return "arrayload";
    case JOp::Arraystore: return "arraystore";
    case JOp::Invoke: return "invoke";
    case JOp::Throw: return "throw";
    }
    return "?";
}

}  // namespace

TransferResult transfer_jvm(const JvmProgram& prog, const JvmMethod& m, const MethodPolicy& sgn,
                            int pp, const Succ& edge, const StackType& st, const SecurityEnv& se)
{
    const Lattice& lat = prog.env.lat;
    const JvmInsn& ins = m.at(pp);
    TransferResult res;
    RuleCheck rc(lat, res, pp, edge.tag, rule_name(ins.op));
    const Level sei = se.count(pp) ? se.at(pp) : lat.bottom();
    const ExtLevel se_e = ExtLevel::simple(sei);
    const bool norm = edge.tag == kNorm;
    const bool caught = !edge.returns();

    auto need = [&](size_t n) {
        if (st.size() < n) {
            rc.fail(K::Shape, "stack of height " + std::to_string(st.size()) + ", rule needs " +
                                  std::to_string(n));
            return false;
        }
        return true;
    };
    auto simple = [&](const ExtLevel& e, const char* what) {
        if (e.is_array()) rc.fail(K::Shape, std::string(what) + " has array level " + lat.render(e));
        return e.outer();
    };
    auto array = [&](const ExtLevel& e, const char* what) {
        if (!e.is_array()) {
            rc.fail(K::Shape, std::string(what) + " has non-array level " + lat.render(e));
            return std::pair<Level, ExtLevel>{e.outer(), ExtLevel::simple(lat.top())};
        }
        return std::pair<Level, ExtLevel>{e.outer(), e.content()};
    };
    auto kr_of = [&](const Tag& t) -> std::optional<Level> {
        auto r = sgn.result(t);
        if (!r) rc.fail(K::Constraint, "policy has no result level for " + t);
        return r;
    };
    auto ka_of = [&](int x) {
        if (x < 0 || x >= static_cast<int>(sgn.ka.size())) {
            rc.fail(K::Shape, "policy has no level for local " + std::to_string(x));
            return ExtLevel::simple(lat.top());
        }
        return sgn.ka[static_cast<size_t>(x)];
    };
    // Shared tail of the null-pointer edges: caught yields (k ⊔ se) :: ε.
    auto np_edge = [&](Level k) {
        rc.guard(k);
        if (caught) {
            res.out = {ExtLevel::simple(lat.lub(k, sei))};
        } else {
            res.returns = true;
            if (auto r = kr_of(kNp)) rc.leq(std::vector<Level>{k}, *r);
        }
    };

    switch (ins.op) {
    case JOp::Push:
    case JOp::New:
        res.out = push(se_e, st);
        break;
    case JOp::Pop:
        if (need(1)) res.out = drop(st, 1);
        break;
    case JOp::Swap:
        if (need(2)) {
            res.out = st;
            std::swap(res.out[0], res.out[1]);
        }
        break;
    case JOp::Load:
        res.out = push(lat.ext_lub(ka_of(ins.x), sei), st);
        break;
    case JOp::Store:
        if (need(1)) {
            rc.leq({se_e, st[0]}, ka_of(ins.x));
            res.out = drop(st, 1);
        }
        break;
    case JOp::Binop:
        if (need(2)) res.out = push(join_all(lat, {st[0], st[1], se_e}), drop(st, 2));
        break;
    case JOp::Ifeq:
        if (need(1)) {
            Level k = simple(st[0], "condition");
            rc.guard(k);
            res.out = lat.lift(k, drop(st, 1));
        }
        break;
    case JOp::Goto:
        res.out = st;
        break;
    case JOp::Return:
        res.returns = true;
        if (need(1))
            if (auto r = kr_of(kNorm)) rc.leq({se_e, st[0]}, ExtLevel::simple(*r));
        break;
    case JOp::Newarray:
        if (need(1)) {
            Level k = simple(st[0], "array size");
            res.out = push(ExtLevel::array(k, prog.env.policy.array_at(lat, m.id, pp)), drop(st, 1));
        }
        break;
    case JOp::Getfield:
        if (need(1)) {
            Level k = simple(st[0], "receiver");
            if (norm) {
                rc.guard(k);
                ExtLevel v = lat.ext_lub(ExtLevel::simple(lat.lub(k, sei)),
                                         prog.env.policy.field(lat, ins.name));
                res.out = lat.lift(k, push(v, drop(st, 1)));
            } else {
                np_edge(k);
            }
        }
        break;
    case JOp::Putfield:
        if (need(2)) {
            const ExtLevel& k1 = st[0];
            Level k2 = simple(st[1], "receiver");
            ExtLevel ft = prog.env.policy.field(lat, ins.name);
            rc.leq({se_e, ExtLevel::simple(k2), k1}, ft);
            if (norm) {
                rc.leq({ExtLevel::simple(sgn.kh)}, ft);
                rc.guard(k2);
                res.out = lat.lift(k2, drop(st, 2));
            } else {
                np_edge(k2);
            }
        }
        break;
    case JOp::Arraylength:
        if (need(1)) {
            auto [k, kc] = array(st[0], "array");
            if (norm) {
                rc.guard(k);
                res.out = lat.lift(k, push(ExtLevel::simple(k), drop(st, 1)));
            } else {
                np_edge(k);
            }
        }
        break;
    case JOp::Arrayload:
        if (need(2)) {
            Level k1 = simple(st[0], "index");
            auto [k2, kc] = array(st[1], "array");
            if (norm) {
                rc.guard(k2);
                ExtLevel v = lat.ext_lub(ExtLevel::simple(lat.lub(k1, k2)), kc);
                res.out = lat.lift(k2, push(v, drop(st, 2)));
            } else {
                np_edge(k2);
            }
        }
        break;
    case JOp::Arraystore:
        if (need(3)) {
            const ExtLevel& k1 = st[0];
            Level k2 = simple(st[1], "index");
            auto [k3, kc] = array(st[2], "array");
            rc.leq({ExtLevel::simple(k2), ExtLevel::simple(k3), k1}, kc);
            if (norm) {
                rc.guard(k3);
                res.out = lat.lift(k3, drop(st, 3));
            } else {
                np_edge(k3);
            }
        }
        break;
    case JOp::Invoke: {
        const JvmMethod* callee = prog.find(ins.name);
        if (!callee) {
            rc.fail(K::Shape, "unknown method " + ins.name);
            break;
        }
        const size_t nargs = static_cast<size_t>(callee->nb_args);
        if (!need(nargs + 1)) break;
        Level k = simple(st[nargs], "receiver");
        const MethodPolicy* p = nullptr;
        try {
            p = &prog.env.policy.gamma.lookup(lat, callee->id, k);
        } catch (const PolicyError& e) {
            rc.fail(K::Constraint, e.what());
            break;
        }
        auto callee_ka = [&](size_t j) {
            if (j >= p->ka.size()) {
                rc.fail(K::Shape, "callee policy has no level for argument " + std::to_string(j));
                return ExtLevel::simple(lat.top());
            }
            return p->ka[j];
        };
        for (size_t j = 0; j < nargs; ++j) rc.leq({st[j]}, callee_ka(j + 1));
        rc.leq({ExtLevel::simple(k)}, callee_ka(0));
        rc.leq(std::vector<Level>{k, sgn.kh, sei}, p->kh);
        auto callee_kr = [&](const Tag& e) -> std::optional<Level> {
            if (auto r = p->result(e)) return r;
            if (e == kNp && !callee->exc_analysis.count(kNp)) return lat.bottom();
            rc.fail(K::Constraint, "callee policy has no result level for " + e);
            return std::nullopt;
        };
        if (norm) {
            Level ke = lat.bottom();
            for (const auto& e : callee->exc_analysis)
                if (auto r = callee_kr(e)) ke = lat.lub(ke, *r);
            Level g = lat.lub(k, ke);
            rc.guard(g);
            Level rn = lat.bottom();
            if (auto r = callee_kr(kNorm)) rn = *r;
            res.out = lat.lift(g, push(ExtLevel::simple(lat.lub(rn, sei)), drop(st, nargs + 1)));
        } else {
            Level re = lat.bottom();
            if (auto r = callee_kr(edge.tag)) re = *r;
            rc.guard(lat.lub(k, re));
            if (caught) {
                res.out = {ExtLevel::simple(lat.lub(k, re))};
            } else {
                res.returns = true;
                if (auto r = kr_of(edge.tag)) rc.leq(std::vector<Level>{k, sei, re}, *r);
            }
        }
        break;
    }
    case JOp::Throw:
        if (need(1)) {
            Level k = simple(st[0], "exception");
            rc.guard(k);
            if (caught) {
                res.out = {ExtLevel::simple(lat.lub(k, sei))};
            } else {
                res.returns = true;
                if (auto r = kr_of(edge.tag)) rc.leq(std::vector<Level>{k}, *r);
            }
        }
        break;
    }
    if (!res.returns && m.max_stack > 0 && static_cast<int>(res.out.size()) > m.max_stack)
        rc.fail(K::Shape, "stack exceeds declared maximum " + std::to_string(m.max_stack));
    return res;
}

TransferFn jvm_transfer(const JvmProgram& prog, const JvmMethod& m, const MethodPolicy& sgn)
{
    return [&prog, &m, &sgn](int pp, const Succ& edge, const Typing& in, const SecurityEnv& se) {
        return transfer_jvm(prog, m, sgn, pp, edge, in, se);
    };
}

Verdict check_typable_jvm(const JvmProgram& prog, const JvmMethod& m, const MethodPolicy& sgn,
                          const JvmCertificate& cert)
{
    auto s1 = cert.S.find(1);
    if (s1 == cert.S.end() || !s1->second.empty()) {
        Verdict v;
        v.witness = Violation{Violation::Kind::Missing, 1, kNorm, "entry", "S_1 must be empty"};
        return v;
    }
    return check_edges(prog.env.lat, cfg_of(prog, m), cert.S, jvm_transfer(prog, m, sgn),
                       cert.cdr, cert.se);
}

JvmInference infer_certificate_jvm(const JvmProgram& prog, const JvmMethod& m,
                                   const MethodPolicy& sgn, const Cdr& cdr)
{
    const Lattice& lat = prog.env.lat;
    const Cfg g = cfg_of(prog, m);
    const TransferFn tf = jvm_transfer(prog, m, sgn);
    JvmInference res;
    res.cert.cdr = cdr;
    for (int pp = 1; pp <= m.size(); ++pp) res.cert.se[pp] = lat.bottom();
    // se only grows, bounded by the lattice height times the code size.
    const int limit = (lat.size() + 1) * (m.size() + 1) + 2;
    for (int round = 0;; ++round) {
        if (round > limit) throw CheckerError("se inference did not stabilise");
        if (auto bad = propagate(lat, g, {}, tf, res.cert.se, res.cert.S)) {
            res.verdict.typable = false;
            res.verdict.witness = bad;
            return res;
        }
        if (!raise_se(lat, g, res.cert.S, tf, cdr, res.cert.se)) break;
    }
    res.verdict = check_typable_jvm(prog, m, sgn, res.cert);
    return res;
}

std::vector<MethodVerdict> check_program_jvm(const JvmProgram& prog)
{
    std::vector<MethodVerdict> out;
    for (const auto& m : prog.methods) {
        const Cdr cdr = compute_cdr(cfg_of(prog, m));
        auto it = prog.env.policy.gamma.entries.find(m.id);
        if (it == prog.env.policy.gamma.entries.end()) {
            MethodVerdict mv{m.id, prog.env.lat.bottom(), {}};
            mv.verdict.witness = Violation{Violation::Kind::Missing, 0, kNorm, "policy",
                                           "no policy for " + m.id};
            out.push_back(std::move(mv));
            continue;
        }
        for (const auto& [lvl, pol] : it->second)
            out.push_back({m.id, lvl, infer_certificate_jvm(prog, m, pol, cdr).verdict});
    }
    return out;
}

}  // namespace dexflow
