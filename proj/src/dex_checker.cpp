#include "dexflow/dex_checker.hpp"

namespace dexflow {

namespace {

using K = Violation::Kind;

const char* rule_name(DOp op)
{
    switch (op) {
    case DOp::Binop: return "binop";
    case DOp::Const: return "const";
    case DOp::Move: return "move";
    case DOp::Ifeq: return "ifeq";
    case DOp::Ifneq: return "ifneq";
    case DOp::Goto: return "goto";
    case DOp::Return: return "return";
    case DOp::New: return "new";
    case DOp::Iget: return "iget";
    case DOp::Iput: return "iput";
    case DOp::Newarray: return "newarray";
    case DOp::Arraylength: return "arraylength";
    case DOp::Aget: return "aget";
    case DOp::Aput: return "aput";
    case DOp::Invoke: return "invoke";
    case DOp::Moveresult: return "moveresult";
    case DOp::Throw: return "throw";
    case DOp::Moveexception: return "moveexception";
    }
    return "?";
}

// ka extended to every register by the entry typing.
ExtLevel ka_ext(const Lattice& lat, const DexMethod& m, const MethodPolicy& sgn, int r)
{
    if (r < m.n_locals && r < static_cast<int>(sgn.ka.size())) return sgn.ka[static_cast<size_t>(r)];
    if (r < m.n_locals) return ExtLevel::simple(lat.bottom());
    return ExtLevel::simple(lat.top());
}

}  // namespace

RegisterTyping entry_typing(const Lattice& lat, const DexMethod& m, const MethodPolicy& sgn)
{
    RegisterTyping rt(static_cast<size_t>(m.n_registers + 2), ExtLevel::simple(lat.top()));
    for (int r = 0; r < m.n_locals && r < m.n_registers; ++r) rt[static_cast<size_t>(r)] = ka_ext(lat, m, sgn, r);
    return rt;
}

bool rt_leq(const Lattice& lat, const RegisterTyping& a, const RegisterTyping& b)
{
    if (a.size() != b.size()) throw CheckerError("register typings over different register sets");
    return lat.stack_leq(a, b);
}

TransferResult transfer_dex(const DexProgram& prog, const DexMethod& m, const MethodPolicy& sgn,
                            int pp, const Succ& edge, const RegisterTyping& rt,
                            const SecurityEnv& se)
{
    const Lattice& lat = prog.env.lat;
    const DexInsn& ins = m.at(pp);
    TransferResult res;
    RuleCheck rc(lat, res, pp, edge.tag, rule_name(ins.op));
    const Level sei = se.count(pp) ? se.at(pp) : lat.bottom();
    const ExtLevel se_e = ExtLevel::simple(sei);
    const bool norm = edge.tag == kNorm;
    const bool caught = !edge.returns();

    if (rt.size() != static_cast<size_t>(m.n_registers + 2)) {
        rc.fail(K::Shape, "register typing has " + std::to_string(rt.size()) + " entries");
        return res;
    }
    auto get = [&](int r) -> const ExtLevel& { return rt.at(static_cast<size_t>(r)); };
    auto with = [&](int r, ExtLevel v) {
        RegisterTyping out = rt;
        out.at(static_cast<size_t>(r)) = std::move(v);
        return out;
    };
    auto simple = [&](int r, const char* what) {
        if (get(r).is_array())
            rc.fail(K::Shape, std::string(what) + " r" + std::to_string(r) + " has array level " +
                                  lat.render(get(r)));
        return get(r).outer();
    };
    auto array = [&](int r) {
        const ExtLevel& e = get(r);
        if (!e.is_array()) {
            rc.fail(K::Shape, "r" + std::to_string(r) + " has non-array level " + lat.render(e));
            return std::pair<Level, ExtLevel>{e.outer(), ExtLevel::simple(lat.top())};
        }
        return std::pair<Level, ExtLevel>{e.outer(), e.content()};
    };
    auto kr_of = [&](const Tag& t) -> std::optional<Level> {
        auto r = sgn.result(t);
        if (!r) rc.fail(K::Constraint, "policy has no result level for " + t);
        return r;
    };
    // ka ⊕ {ex ↦ level}: locals from ka, everything else at top.
    auto handler_typing = [&](Level ex) {
        RegisterTyping out = entry_typing(lat, m, sgn);
        out[static_cast<size_t>(ex_slot(m))] = ExtLevel::simple(ex);
        return out;
    };
    auto np_edge = [&](Level k) {
        rc.guard(k);
        if (caught) {
            res.out = handler_typing(lat.lub(k, sei));
        } else {
            res.returns = true;
            if (auto r = kr_of(kNp)) rc.leq(std::vector<Level>{sei, k}, *r);
        }
    };

    switch (ins.op) {
    case DOp::Const:
    case DOp::New:
        res.out = with(ins.r, se_e);
        break;
    case DOp::Move:
        res.out = with(ins.r, lat.ext_lub(get(ins.a), sei));
        break;
    case DOp::Binop:
        res.out = with(ins.r, join_all(lat, {get(ins.a), get(ins.b), se_e}));
        break;
    case DOp::Ifeq:
    case DOp::Ifneq:
        rc.guard(lat.lub(sei, simple(ins.r, "condition")));
        res.out = rt;
        break;
    case DOp::Goto:
        res.out = rt;
        break;
    case DOp::Return:
        res.returns = true;
        if (auto r = kr_of(kNorm)) rc.leq({se_e, get(ins.r)}, ExtLevel::simple(*r));
        break;
    case DOp::Iget: {
        Level k = simple(ins.a, "receiver");
        if (norm) {
            rc.guard(k);
            res.out = with(ins.r, lat.ext_lub(ExtLevel::simple(lat.lub(k, sei)),
                                              prog.env.policy.field(lat, ins.name)));
        } else {
            np_edge(k);
        }
        break;
    }
    case DOp::Iput: {
        Level k = simple(ins.a, "receiver");
        ExtLevel ft = prog.env.policy.field(lat, ins.name);
        rc.leq({se_e, ExtLevel::simple(k), get(ins.r)}, ft);
        if (norm) {
            rc.leq({ExtLevel::simple(sgn.kh)}, ft);
            rc.guard(k);
            res.out = rt;
        } else {
            np_edge(k);
        }
        break;
    }
    case DOp::Newarray: {
        Level k = simple(ins.a, "array size");
        ExtLevel v = ExtLevel::array(k, prog.env.policy.array_at(lat, m.id, pp));
        rc.leq({v}, ka_ext(lat, m, sgn, ins.r));
        res.out = with(ins.r, v);
        break;
    }
    case DOp::Arraylength: {
        auto [k, kc] = array(ins.a);
        if (norm) {
            rc.guard(k);
            res.out = with(ins.r, ExtLevel::simple(k));
        } else {
            rc.leq({ExtLevel::simple(k)}, ka_ext(lat, m, sgn, ins.r));
            np_edge(k);
        }
        break;
    }
    case DOp::Aget: {
        auto [k, kc] = array(ins.a);
        Level ki = simple(ins.b, "index");
        if (norm) {
            rc.guard(k);
            res.out = with(ins.r, lat.ext_lub(ExtLevel::simple(lat.lub(lat.lub(sei, k), ki)), kc));
        } else {
            np_edge(k);
        }
        break;
    }
    case DOp::Aput: {
        auto [k, kc] = array(ins.a);
        Level ki = simple(ins.b, "index");
        rc.leq({ExtLevel::simple(k), ExtLevel::simple(ki), get(ins.r)}, kc);
        if (norm) {
            rc.guard(k);
            res.out = rt;
        } else {
            np_edge(k);
        }
        break;
    }
    case DOp::Invoke: {
        const DexMethod* callee = prog.find(ins.name);
        if (!callee || ins.args.empty()) {
            rc.fail(K::Shape, "unknown method or missing receiver " + ins.name);
            break;
        }
        Level k = simple(ins.args[0], "receiver");
        const MethodPolicy* p = nullptr;
        try {
            p = &prog.env.policy.gamma.lookup(lat, callee->id, k);
        } catch (const PolicyError& e) {
            rc.fail(K::Constraint, e.what());
            break;
        }
        rc.leq(std::vector<Level>{k, sgn.kh, sei}, p->kh);
        for (size_t j = 0; j < ins.args.size(); ++j) {
            if (j >= p->ka.size()) {
                rc.fail(K::Shape, "callee policy has no level for argument " + std::to_string(j));
                continue;
            }
            rc.leq({get(ins.args[j])}, p->ka[j]);
        }
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
            rc.guard(lat.lub(k, ke));
            Level rn = lat.bottom();
            if (auto r = callee_kr(kNorm)) rn = *r;
            res.out = with(ret_slot(m), ExtLevel::simple(lat.lub(rn, sei)));
        } else {
            Level re = lat.bottom();
            if (auto r = callee_kr(edge.tag)) re = *r;
            rc.guard(lat.lub(k, re));
            if (caught) {
                res.out = handler_typing(lat.lub(k, re));
            } else {
                res.returns = true;
                if (auto r = kr_of(edge.tag)) rc.leq(std::vector<Level>{k, sei, re}, *r);
            }
        }
        break;
    }
    case DOp::Moveresult:
        res.out = with(ins.r, lat.ext_lub(get(ret_slot(m)), sei));
        break;
    case DOp::Throw: {
        Level k = simple(ins.r, "exception");
        rc.guard(k);
        if (caught) {
            res.out = with(ex_slot(m), ExtLevel::simple(lat.lub(k, sei)));
        } else {
            res.returns = true;
            if (auto r = kr_of(edge.tag)) rc.leq(std::vector<Level>{sei, k}, *r);
        }
        break;
    }
    case DOp::Moveexception:
        res.out = with(ins.r, lat.ext_lub(get(ex_slot(m)), sei));
        break;
    }
    return res;
}

TransferFn dex_transfer(const DexProgram& prog, const DexMethod& m, const MethodPolicy& sgn)
{
    return [&prog, &m, &sgn](int pp, const Succ& edge, const Typing& in, const SecurityEnv& se) {
        return transfer_dex(prog, m, sgn, pp, edge, in, se);
    };
}

Verdict check_typable_dex(const DexProgram& prog, const DexMethod& m, const MethodPolicy& sgn,
                          const DexCertificate& cert)
{
    auto rt1 = cert.RT.find(1);
    if (rt1 == cert.RT.end() || rt1->second != entry_typing(prog.env.lat, m, sgn)) {
        Verdict v;
        v.witness = Violation{Violation::Kind::Missing, 1, kNorm, "entry",
                              "RT_1 must be the entry typing"};
        return v;
    }
    return check_edges(prog.env.lat, cfg_of(prog, m), cert.RT, dex_transfer(prog, m, sgn),
                       cert.cdr, cert.se);
}

DexInference infer_certificate_dex(const DexProgram& prog, const DexMethod& m,
                                   const MethodPolicy& sgn, const Cdr& cdr)
{
    const Lattice& lat = prog.env.lat;
    const Cfg g = cfg_of(prog, m);
    const TransferFn tf = dex_transfer(prog, m, sgn);
    DexInference res;
    res.cert.cdr = cdr;
    for (int pp = 1; pp <= m.size(); ++pp) res.cert.se[pp] = lat.bottom();
    const RegisterTyping entry = entry_typing(lat, m, sgn);
    const int limit = (lat.size() + 1) * (m.size() + 1) + 2;
    for (int round = 0;; ++round) {
        if (round > limit) throw CheckerError("se inference did not stabilise");
        if (auto bad = propagate(lat, g, entry, tf, res.cert.se, res.cert.RT)) {
            res.verdict.typable = false;
            res.verdict.witness = bad;
            return res;
        }
        if (!raise_se(lat, g, res.cert.RT, tf, cdr, res.cert.se)) break;
    }
    res.verdict = check_typable_dex(prog, m, sgn, res.cert);
    return res;
}

std::vector<MethodVerdict> check_program_dex(const DexProgram& prog)
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
            out.push_back({m.id, lvl, infer_certificate_dex(prog, m, pol, cdr).verdict});
    }
    return out;
}

}  // namespace dexflow
