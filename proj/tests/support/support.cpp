#include "support.hpp"

#include <algorithm>
#include <deque>
#include <filesystem>
#include <functional>
#include <sstream>

namespace dexflow::testing {

std::string PropResult::summary() const
{
    std::string s = name + ": " + std::to_string(cases) + " cases, " + std::to_string(failures) + " failures";
    if (!ok()) s += " (first: " + first + ")";
    return s;
}

std::string corpus_dir() { return DEXFLOW_CORPUS_DIR; }

std::vector<std::string> corpus_files(const std::string& subdir)
{
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(corpus_dir() + "/" + subdir))
        if (e.path().extension() == ".jvm") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Lattice> sample_lattices()
{
    std::vector<Lattice> out;
    out.push_back(Lattice::two_point());
    out.push_back(Lattice::from_hasse({"L", "M", "H"}, {{"L", "M"}, {"M", "H"}}));
    out.push_back(Lattice::from_hasse({"L", "A", "B", "H"}, {{"L", "A"}, {"L", "B"}, {"A", "H"}, {"B", "H"}}));
    out.push_back(Lattice::from_hasse({"bot", "a", "b", "c", "top"},
                                      {{"bot", "a"}, {"bot", "b"}, {"bot", "c"}, {"a", "top"}, {"b", "top"}, {"c", "top"}}));
    std::vector<std::string> sets{"0", "x", "y", "z", "xy", "xz", "yz", "xyz"};
    std::vector<std::pair<std::string, std::string>> covers;
    for (const auto& a : sets)
        for (const auto& b : sets) {
            std::string sa = a == "0" ? "" : a;
            if (b.size() != sa.size() + 1) continue;
            if (std::all_of(sa.begin(), sa.end(), [&](char c) { return b.find(c) != std::string::npos; }))
                covers.emplace_back(a, b);
        }
    out.push_back(Lattice::from_hasse(sets, covers));
    return out;
}

namespace {

int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

}  // namespace

Level random_level(const Lattice& lat, std::mt19937_64& rng) { return pick(rng, 0, lat.size() - 1); }

ExtLevel random_ext(const Lattice& lat, std::mt19937_64& rng)
{
    if (pick(rng, 0, 2) < 2) return ExtLevel::simple(random_level(lat, rng));
    return ExtLevel::array(random_level(lat, rng), ExtLevel::simple(random_level(lat, rng)));
}

ExtLevel raise_ext(const Lattice& lat, const ExtLevel& e, std::mt19937_64& rng)
{
    return e.with_outer(lat.lub(e.outer(), random_level(lat, rng)));
}

JvmProgram random_jvm_program(std::mt19937_64& rng)
{
    auto lats = sample_lattices();
    JvmProgram p;
    p.env.lat = lats[static_cast<size_t>(pick(rng, 0, static_cast<int>(lats.size()) - 1))];
    const Lattice& lat = p.env.lat;
    p.env.classes.classes["C"] = {{"f", false}, {"g", true}};
    p.env.classes.classes["D"] = {{"f", false}};
    p.env.classes.classes["E"] = {};
    p.env.policy.kobs = random_level(lat, rng);
    p.env.policy.ft["f"] = ExtLevel::simple(random_level(lat, rng));
    p.env.policy.ft["g"] = ExtLevel::simple(random_level(lat, rng));

    const int nm = pick(rng, 1, 3);
    std::vector<std::string> ids;
    for (int k = 0; k < nm; ++k) ids.push_back("m" + std::to_string(k));
    const std::vector<JOp> mid{JOp::Binop, JOp::Push, JOp::Pop, JOp::Swap, JOp::Load, JOp::Store, JOp::Ifeq,
                               JOp::Goto, JOp::New, JOp::Getfield, JOp::Putfield, JOp::Newarray,
                               JOp::Arraylength, JOp::Arrayload, JOp::Arraystore, JOp::Invoke};
    const std::vector<JOp> last{JOp::Return, JOp::Goto, JOp::Throw};

    for (const auto& id : ids) {
        JvmMethod m;
        m.id = id;
        m.n_locals = pick(rng, 1, 4);
        m.nb_args = pick(rng, 0, m.n_locals - 1);
        m.max_stack = pick(rng, 0, 4);
        const int n = pick(rng, 1, 10);
        for (int i = 1; i <= n; ++i) {
            JvmInsn ins;
            ins.op = i < n ? mid[static_cast<size_t>(pick(rng, 0, static_cast<int>(mid.size()) - 1))]
                           : last[static_cast<size_t>(pick(rng, 0, 2))];
            switch (ins.op) {
            case JOp::Binop: ins.bop = static_cast<BinOp>(pick(rng, 0, 3)); break;
            case JOp::Push: ins.n = pick(rng, -5, 5); break;
            case JOp::Load:
            case JOp::Store: ins.x = pick(rng, 0, m.n_locals - 1); break;
            case JOp::Ifeq: ins.x = pick(rng, 1, n); break;
            case JOp::Goto: ins.x = i < n ? i + 1 : pick(rng, 1, n); break;
            case JOp::New: ins.name = coin(rng) ? "C" : "E"; break;
            case JOp::Getfield:
            case JOp::Putfield: ins.name = coin(rng) ? "f" : "g"; break;
            case JOp::Newarray:
                ins.name = coin(rng) ? "int" : "ref";
                if (coin(rng)) p.env.policy.at[id][i] = random_ext(lat, rng);
                break;
            case JOp::Invoke: ins.name = ids[static_cast<size_t>(pick(rng, 0, nm - 1))]; break;
            case JOp::Throw: m.class_analysis[i] = {"E"}; break;
            default: break;
            }
            m.code.push_back(ins);
            if (coin(rng, 0.3)) m.labels[i] = "x" + std::to_string(i);
        }
        for (int h = pick(rng, 0, 2); h > 0; --h) {
            int s = pick(rng, 1, n);
            m.handlers.push_back({s, pick(rng, s + 1, n + 1), pick(rng, 1, n), coin(rng) ? kNp : "E"});
        }
        if (coin(rng)) m.exc_analysis = {"E"};
        for (int x = 0; x < m.n_locals; ++x) {
            if (coin(rng, 0.6)) continue;
            int k = pick(rng, 0, 2);
            m.kinds[x] = k == 0 ? SlotKind{SlotKind::Kind::Int, ""}
                         : k == 1 ? SlotKind{SlotKind::Kind::Ref, "C"}
                                  : SlotKind{SlotKind::Kind::Array, coin(rng) ? "int" : "ref"};
        }
        for (int e = pick(rng, 1, 2); e > 0; --e) {
            MethodPolicy sgn;
            for (int x = 0; x < m.n_locals; ++x) sgn.ka.push_back(random_ext(lat, rng));
            sgn.kh = random_level(lat, rng);
            sgn.kr[kNorm] = random_level(lat, rng);
            if (coin(rng)) sgn.kr[kNp] = random_level(lat, rng);
            if (coin(rng)) sgn.kr["E"] = random_level(lat, rng);
            p.env.policy.gamma.entries[id][random_level(lat, rng)] = sgn;
        }
        p.methods.push_back(std::move(m));
    }
    validate_jvm(p);
    return p;
}

Heap random_heap(const Lattice& lat, std::mt19937_64& rng, int cells)
{
    Heap h;
    int n = pick(rng, 0, cells);
    for (int k = 0; k < n; ++k) {
        if (coin(rng)) {
            Object o{coin(rng) ? "C" : "D", {}};
            o.fields["f"] = Value::integer(pick(rng, -2, 2));
            if (o.cls == "C") o.fields["g"] = Value::null();
            h.alloc(std::move(o));
        } else {
            std::vector<Value> e;
            for (int i = pick(rng, 0, 3); i > 0; --i) e.push_back(Value::integer(pick(rng, -2, 2)));
            h.alloc(ArrayObj{e, "m", pick(rng, 1, 3)});
        }
    }
    // Some reference fields point into the heap.
    for (auto& [l, c] : h.cells)
        if (auto* o = std::get_if<Object>(&c); o && o->cls == "C" && coin(rng))
            o->fields["g"] = Value::location(static_cast<Loc>(pick(rng, 1, static_cast<int>(h.next) - 1)));
    (void)lat;
    return h;
}

Value random_value(const Heap& h, std::mt19937_64& rng)
{
    int k = pick(rng, 0, 2);
    if (k == 0 || h.cells.empty()) return Value::integer(pick(rng, -2, 2));
    if (k == 1) return Value::null();
    auto it = h.cells.begin();
    std::advance(it, pick(rng, 0, static_cast<int>(h.cells.size()) - 1));
    return Value::location(it->first);
}

PropResult check_lattice_laws(const Lattice& lat)
{
    PropResult r{"lattice laws (" + std::to_string(lat.size()) + " points)"};
    const int n = lat.size();
    auto expect = [&](bool ok, const std::string& what) {
        ++r.cases;
        if (!ok) r.fail(what);
    };
    for (int a = 0; a < n; ++a) {
        expect(lat.leq(a, a), "reflexivity " + lat.name(a));
        expect(lat.leq(lat.bottom(), a) && lat.leq(a, lat.top()), "bounds " + lat.name(a));
        expect(lat.lub(a, a) == a, "idempotence " + lat.name(a));
        for (int b = 0; b < n; ++b) {
            std::string ab = lat.name(a) + "," + lat.name(b);
            if (a != b) expect(!(lat.leq(a, b) && lat.leq(b, a)), "antisymmetry " + ab);
            Level j = lat.lub(a, b);
            expect(j == lat.lub(b, a), "commutativity " + ab);
            expect(lat.leq(a, j) && lat.leq(b, j), "upper bound " + ab);
            expect(lat.leq(a, b) == (j == b), "order from lub " + ab);
            expect(lat.ext_leq(ExtLevel::simple(a), ExtLevel::simple(b)) == lat.leq(a, b), "ext on simple " + ab);
            for (int c = 0; c < n; ++c) {
                std::string abc = ab + "," + lat.name(c);
                if (lat.leq(a, b) && lat.leq(b, c)) expect(lat.leq(a, c), "transitivity " + abc);
                if (lat.leq(a, c) && lat.leq(b, c)) expect(lat.leq(j, c), "least " + abc);
                expect(lat.lub(j, c) == lat.lub(a, lat.lub(b, c)), "associativity " + abc);
                auto arr = [&](Level o, Level k) { return ExtLevel::array(o, ExtLevel::simple(k)); };
                expect(lat.ext_leq(arr(a, c), arr(b, c)) == lat.leq(a, b), "ext on arrays " + abc);
                if (c != b) expect(!lat.ext_leq(arr(a, b), arr(a, c)), "ext contents " + abc);
                expect(lat.ext_leq(arr(a, c), ExtLevel::simple(b)) == lat.leq(a, b), "ext mixed " + abc);
            }
        }
    }
    return r;
}

PropResult check_lift(const Lattice& lat, int cases, std::uint64_t seed)
{
    PropResult r{"lift laws (" + std::to_string(lat.size()) + " points)"};
    std::mt19937_64 rng(seed);
    for (int t = 0; t < cases; ++t) {
        StackType st, st2;
        for (int i = pick(rng, 0, 4); i > 0; --i) st.push_back(random_ext(lat, rng));
        for (const auto& e : st) st2.push_back(raise_ext(lat, e, rng));
        Level k = random_level(lat, rng);
        Level k2 = lat.lub(k, random_level(lat, rng));
        StackType l = lat.lift(k, st);
        ++r.cases;
        if (l.size() != st.size()) r.fail("length");
        else if (lat.lift(k, l) != l) r.fail("idempotence");
        else if (lat.lift(lat.bottom(), st) != st) r.fail("bottom is identity");
        else if (!lat.stack_leq(st, l)) r.fail("extensive");
        else if (!lat.stack_leq(l, lat.lift(k, st2))) r.fail("monotone in the stack");
        else if (!lat.stack_leq(l, lat.lift(k2, st))) r.fail("monotone in the level");
    }
    return r;
}

namespace {

const char* kTransferJvm = R"(.levels L A B H
.cover L A
.cover L B
.cover A H
.cover B H
.kobs A
.class C f g:ref
.class E
.field f A
.field g L

.method callee
.locals 2
.stack 1
.args 1
.policy H ka=H,B kh=L kr=Norm:A,np:B,E:H
.excanalysis E
    push 0
    return
.end

.method all
.locals 3
.stack 4
.args 1
.policy L ka=A,B,L[A] kh=L kr=Norm:A,np:B,E:H
.excanalysis E
.handler s1 s2 hh np
.at na A
.classanalysis t E
    push 1
    push 2
    binop add
    swap
    pop
    load 1
    store 2
    ifeq s1
s1: goto s0
s0: new C
    getfield f
    load 0
    putfield f
    load 1
na: newarray int
    arraylength
    arrayload
    arraystore
s2: invoke callee
    ifeq t
    return
t:  throw
hh: return
.end
)";

const char* kTransferDex = R"(.levels L A B H
.cover L A
.cover L B
.cover A H
.cover B H
.kobs A
.class C f g:ref
.class E
.field f A
.field g L

.method callee
.locals 2
.registers 2
.args 1
.policy H ka=H,B kh=L kr=Norm:A,np:B,E:H
.excanalysis E
    const r0 0
    return r0
.end

.method all
.locals 3
.registers 6
.args 1
.policy L ka=A,B,L[A] kh=L kr=Norm:A,np:B,E:H
.excanalysis E
.handler s1 s2 hh np
.at na A
.classanalysis t E
    const r3 1
    move r4 r3
    binop add r3 r3 r4
    ifeq r3 s1
s1: ifneq r3 s0
s0: goto s3
s3: new r3 C
    iget r4 r3 f
    iput r4 r3 f
na: newarray r5 r4 int
    arraylength r4 r5
    aget r4 r5 r3
    aput r4 r5 r3
s2: invoke callee r3 r4
    moveresult r4
    ifeq r4 t
    return r4
t:  throw r3
hh: moveexception r3
    return r4
.end
)";

bool defined(const TransferResult& r)
{
    if (r.returns) return false;
    for (const auto& v : r.violations)
        if (v.kind == Violation::Kind::Shape || v.kind == Violation::Kind::Missing) return false;
    return true;
}

template <class Edges, class Transfer, class Gen>
PropResult transfer_monotone(const std::string& name, const Lattice& lat, int size, int cases,
                             std::uint64_t seed, Edges edges, Transfer transfer, Gen gen)
{
    PropResult r{name};
    std::mt19937_64 rng(seed);
    long attempts = 0;
    while (r.cases < cases && attempts < 50L * cases) {
        ++attempts;
        int pp = pick(rng, 1, size);
        auto succ = edges(pp);
        const Succ& e = succ[static_cast<size_t>(pick(rng, 0, static_cast<int>(succ.size()) - 1))];
        SecurityEnv se, se2;
        for (int i = 1; i <= size; ++i) {
            se[i] = random_level(lat, rng);
            se2[i] = lat.lub(se[i], random_level(lat, rng));
        }
        Typing a = gen(rng), b;
        for (const auto& x : a) b.push_back(raise_ext(lat, x, rng));
        try {
            TransferResult ra = transfer(pp, e, a, se);
            TransferResult rb = transfer(pp, e, b, se);
            TransferResult rc = transfer(pp, e, a, se2);
            if (!defined(ra) || !defined(rb) || !defined(rc)) continue;
            ++r.cases;
            if (!typing_leq(lat, ra.out, rb.out))
                r.fail("pp " + std::to_string(pp) + " tag " + e.tag + ": raising the input lowered the output");
            else if (!typing_leq(lat, ra.out, rc.out))
                r.fail("pp " + std::to_string(pp) + " tag " + e.tag + ": raising se lowered the output");
        } catch (const LatticeError&) {
        } catch (const PolicyError&) {
        }
    }
    return r;
}

}  // namespace

PropResult check_jvm_transfer_monotone(int cases, std::uint64_t seed)
{
    JvmProgram prog = parse_jvm(kTransferJvm);
    const JvmMethod& m = prog.method("all");
    const Lattice& lat = prog.env.lat;
    const MethodPolicy& sgn = prog.env.policy.gamma.entries.at("all").begin()->second;
    return transfer_monotone(
        "JVM transfer monotonicity", lat, m.size(), cases, seed,
        [&](int pp) { return successors_jvm(prog, m, pp); },
        [&](int pp, const Succ& e, const Typing& st, const SecurityEnv& se) {
            return transfer_jvm(prog, m, sgn, pp, e, st, se);
        },
        [&](std::mt19937_64& rng) {
            Typing st;
            for (int i = pick(rng, 0, 4); i > 0; --i) st.push_back(random_ext(lat, rng));
            return st;
        });
}

PropResult check_dex_transfer_monotone(int cases, std::uint64_t seed)
{
    DexProgram prog = parse_dex(kTransferDex);
    const DexMethod& m = prog.method("all");
    const Lattice& lat = prog.env.lat;
    const MethodPolicy& sgn = prog.env.policy.gamma.entries.at("all").begin()->second;
    return transfer_monotone(
        "DEX transfer monotonicity", lat, m.size(), cases, seed,
        [&](int pp) { return successors_dex(prog, m, pp); },
        [&](int pp, const Succ& e, const Typing& rt, const SecurityEnv& se) {
            return transfer_dex(prog, m, sgn, pp, e, rt, se);
        },
        [&](std::mt19937_64& rng) {
            Typing rt;
            for (int i = 0; i < m.n_registers + 2; ++i) rt.push_back(random_ext(lat, rng));
            return rt;
        });
}

PropResult check_register_order(int cases, std::uint64_t seed)
{
    PropResult r{"registers above the shorter stack"};
    std::mt19937_64 rng(seed);
    auto lats = sample_lattices();
    for (int t = 0; t < cases; ++t) {
        const Lattice& lat = lats[static_cast<size_t>(t) % lats.size()];
        int nl = pick(rng, 1, 4), budget = pick(rng, 1, 5);
        int nr = nl + budget + 1;
        std::vector<ExtLevel> ka;
        for (int x = 0; x < nl; ++x) ka.push_back(random_ext(lat, rng));
        int h1 = pick(rng, 1, budget), h2 = pick(rng, 0, h1 - 1);
        StackType s1, s2;
        for (int i = 0; i < h1; ++i) s1.push_back(random_ext(lat, rng));
        for (int i = 0; i < h2; ++i) s2.push_back(random_ext(lat, rng));
        RegisterTyping rt1 = compile_stack_type(lat, s1, ka, nl, nr);
        RegisterTyping rt2 = compile_stack_type(lat, s2, ka, nl, nr);
        ++r.cases;
        for (int x = nl + h2; x < nr + 2; ++x)
            if (!lat.ext_leq(rt1[x], rt2[x])) {
                r.fail("register " + std::to_string(x) + " with heights " + std::to_string(h1) + " and " +
                       std::to_string(h2));
                break;
            }
        for (int x = 0; x < nl; ++x)
            if (rt1[x] != ka[x] || rt2[x] != ka[x]) r.fail("locals differ from ka");
    }
    return r;
}

PropResult check_indist_laws(int cases, std::uint64_t seed)
{
    PropResult r{"indistinguishability symmetry and reflexivity"};
    std::mt19937_64 rng(seed);
    auto lats = sample_lattices();
    for (int t = 0; t < cases; ++t) {
        const Lattice& lat = lats[static_cast<size_t>(t) % lats.size()];
        Policy pol;
        pol.ft["f"] = ExtLevel::simple(random_level(lat, rng));
        pol.ft["g"] = ExtLevel::simple(random_level(lat, rng));
        for (int c = 1; c <= 3; ++c) pol.at["m"][c] = ExtLevel::simple(random_level(lat, rng));
        Level kobs = random_level(lat, rng);
        Heap h1 = random_heap(lat, rng, 3), h2 = random_heap(lat, rng, 3);
        Beta id;
        for (const auto& [l, c] : h1.cells) id[l] = l;
        // Random partial injection between the two domains.
        Beta beta;
        std::vector<Loc> rng2;
        for (const auto& [l, c] : h2.cells) rng2.push_back(l);
        std::shuffle(rng2.begin(), rng2.end(), rng);
        size_t k = 0;
        for (const auto& [l, c] : h1.cells)
            if (k < rng2.size() && coin(rng, 0.7)) beta[l] = rng2[k++];
        Beta inv = invert(beta);

        std::vector<Value> rho1, rho2;
        std::vector<ExtLevel> ka;
        Typing rt1, rt2;
        for (int x = pick(rng, 0, 4); x > 0; --x) {
            rho1.push_back(random_value(h1, rng));
            rho2.push_back(coin(rng) ? rho1.back() : random_value(h2, rng));
            ka.push_back(ExtLevel::simple(random_level(lat, rng)));
            rt1.push_back(ExtLevel::simple(random_level(lat, rng)));
            rt2.push_back(coin(rng) ? rt1.back() : ExtLevel::simple(random_level(lat, rng)));
        }
        std::vector<Value> self1 = rho1;
        MethodPolicy sgn;
        sgn.kr = {{kNorm, random_level(lat, rng)}, {kNp, random_level(lat, rng)}, {"E", random_level(lat, rng)}};
        auto outcome = [&](const Heap& h) {
            Outcome o;
            o.status = Outcome::Status::Final;
            o.heap = h;
            int kind = pick(rng, 0, 2);
            o.tag = kind == 0 ? kNorm : kind == 1 ? kNp : "E";
            o.value = kind == 0 ? random_value(h, rng) : Value::location(h.cells.empty() ? 1 : h.cells.begin()->first);
            return o;
        };
        Outcome o1 = outcome(h1), o2 = outcome(h2);

        r.cases += 6;
        auto sym = [&](bool a, bool b, const std::string& what) {
            if (a != b) r.fail(what + " is not symmetric");
        };
        if (!heap_indist(lat, pol, h1, h1, id, kobs)) r.fail("heap not reflexive");
        if (!locals_indist(lat, self1, self1, ka, kobs, id)) r.fail("locals not reflexive");
        for (const auto& v : self1)
            if (!value_indist(v, v, id)) r.fail("value not reflexive");
        sym(heap_indist(lat, pol, h1, h2, beta, kobs), heap_indist(lat, pol, h2, h1, inv, kobs), "heap");
        sym(locals_indist(lat, rho1, rho2, ka, kobs, beta), locals_indist(lat, rho2, rho1, ka, kobs, inv), "locals");
        sym(registers_indist(lat, rho1, rho2, rt1, rt2, kobs, beta), registers_indist(lat, rho2, rho1, rt2, rt1, kobs, inv),
            "registers");
        sym(output_indist(lat, pol, o1, o2, beta, kobs, sgn), output_indist(lat, pol, o2, o1, inv, kobs, sgn), "output");
        if (!o1.value.is_loc() || h1.contains(o1.value.loc))
            if (!output_indist(lat, pol, o1, o1, id, kobs, sgn)) r.fail("output not reflexive");
    }
    return r;
}

PropResult check_roundtrip(int cases, std::uint64_t seed)
{
    PropResult r{"text format round trip"};
    std::mt19937_64 rng(seed);
    for (int t = 0; t < cases; ++t) {
        JvmProgram p = random_jvm_program(rng);
        ++r.cases;
        try {
            std::string s1 = serialize(p);
            JvmProgram q = parse_jvm(s1);
            if (serialize(q) != s1 || q.methods != p.methods) {
                r.fail("JVM unit changed:\n" + s1);
                continue;
            }
            const Lattice& lat = p.env.lat;
            for (const auto& m : p.methods)
                for (const auto& [k, sgn] : p.env.policy.gamma.entries.at(m.id)) {
                    JvmInference inf = infer_certificate_jvm(p, m, sgn, compute_cdr(cfg_of(p, m)));
                    std::string c = serialize_certificate(lat, m.id, k, inf.cert);
                    auto back = parse_jvm_certificates(lat, c);
                    if (back.size() != 1 || back[0].cert.S != inf.cert.S || back[0].cert.se != inf.cert.se ||
                        back[0].cert.cdr != inf.cert.cdr)
                        r.fail("JVM certificate changed:\n" + c);
                }
            CompiledProgram cp;
            try {
                cp = compile_program(p);
            } catch (const TranslationError&) {
                continue;  // inconsistent stack heights
            }
            std::string d1 = serialize(cp.prog);
            DexProgram dq = parse_dex(d1);
            if (serialize(dq) != d1 || dq.methods != cp.prog.methods) r.fail("DEX unit changed:\n" + d1);
            if (parse_amaps(serialize_amaps(cp.amaps)) != cp.amaps) r.fail("address map changed");
            for (const auto& m : cp.prog.methods)
                for (const auto& [k, sgn] : cp.prog.env.policy.gamma.entries.at(m.id)) {
                    DexInference inf = infer_certificate_dex(cp.prog, m, sgn, compute_cdr(cfg_of(cp.prog, m)));
                    std::string c = serialize_certificate(lat, m.id, k, inf.cert);
                    auto back = parse_dex_certificates(lat, c);
                    if (back.size() != 1 || back[0].cert.RT != inf.cert.RT || back[0].cert.se != inf.cert.se ||
                        back[0].cert.cdr != inf.cert.cdr)
                        r.fail("DEX certificate changed:\n" + c);
                }
        } catch (const std::exception& e) {
            r.fail(std::string(e.what()) + "\n" + serialize(p));
        }
    }
    return r;
}

std::map<int, int> oracle_ipdom(const Cfg& g)
{
    const int n = g.size;
    // Whether the exit is reachable from `from` without entering `removed`.
    auto exits = [&](int from, int removed) {
        if (from == removed) return false;
        std::vector<bool> seen(static_cast<size_t>(n + 1), false);
        std::vector<int> stack{from};
        seen[from] = true;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (const auto& s : g.at(v)) {
                if (!s.target) return true;
                if (*s.target != removed && !seen[*s.target]) {
                    seen[*s.target] = true;
                    stack.push_back(*s.target);
                }
            }
        }
        return false;
    };
    auto strict = [&](int i) {
        std::set<int> d{0};
        for (int k = 1; k <= n; ++k)
            if (k != i && !exits(i, k)) d.insert(k);
        return d;
    };
    std::map<int, int> out;
    for (int i = 1; i <= n; ++i) {
        if (!exits(i, -1)) continue;
        std::set<int> di = strict(i);
        for (int d : di) {
            if (d == 0) continue;
            std::set<int> dd = strict(d);
            bool immediate = std::all_of(di.begin(), di.end(), [&](int e) { return e == d || dd.count(e); });
            if (immediate) {
                out[i] = d;
                break;
            }
        }
    }
    return out;
}

Cdr oracle_cdr(const Cfg& g)
{
    Cdr cdr;
    auto ipdom = oracle_ipdom(g);
    for (int i = 1; i <= g.size; ++i) {
        std::set<std::optional<int>> dests;
        for (const auto& s : g.at(i)) dests.insert(s.target);
        if (dests.size() < 2) continue;
        std::optional<int> j;
        if (ipdom.count(i)) j = ipdom.at(i);
        std::map<Tag, std::set<int>> regions;
        std::set<Tag> leaving;
        std::set<int> all;
        for (const auto& s : g.at(i)) {
            auto& reg = regions[s.tag];
            if (!s.target) {
                leaving.insert(s.tag);
                continue;
            }
            // Every node on a simple path from the successor that avoids j.
            std::vector<bool> on(static_cast<size_t>(g.size + 1), false);
            std::function<void(int)> walk = [&](int v) {
                if (v == j || on[v]) return;
                on[v] = true;
                reg.insert(v);
                for (const auto& t : g.at(v))
                    if (t.target) walk(*t.target);
                on[v] = false;
            };
            walk(*s.target);
        }
        for (auto& [tag, reg] : regions) {
            all.insert(reg.begin(), reg.end());
            if (j) cdr.jun[{i, tag}] = *j;
        }
        for (auto& [tag, reg] : regions) cdr.region[{i, tag}] = leaving.count(tag) ? all : reg;
    }
    return cdr;
}

namespace {

bool all_reachable(const Cfg& g)
{
    std::vector<bool> seen(static_cast<size_t>(g.size + 1), false);
    std::deque<int> work{1};
    seen[1] = true;
    while (!work.empty()) {
        int v = work.front();
        work.pop_front();
        for (const auto& s : g.at(v))
            if (s.target && !seen[*s.target]) {
                seen[*s.target] = true;
                work.push_back(*s.target);
            }
    }
    return std::all_of(seen.begin() + 1, seen.end(), [](bool b) { return b; });
}

void compare(PropResult& r, const Cfg& g)
{
    ++r.cases;
    auto describe = [&] {
        std::ostringstream os;
        for (int i = 1; i <= g.size; ++i) {
            os << i << "->";
            for (const auto& s : g.at(i)) os << " " << s.tag << ":" << (s.target ? std::to_string(*s.target) : "exit");
            os << "; ";
        }
        return os.str();
    };
    if (immediate_postdominators(g) != oracle_ipdom(g)) return r.fail("postdominators differ on " + describe());
    Cdr c = compute_cdr(g);
    if (c != oracle_cdr(g)) return r.fail("regions differ on " + describe());
    SoapReport s = check_soap(g, c);
    if (!s.ok()) r.fail("SOAP fails on " + describe() + s.failures.front());
}

}  // namespace

PropResult check_cdr_oracle(int exhaustive_nodes, int random_cases, std::uint64_t seed)
{
    PropResult r{"regions against the path oracle"};
    for (int n = 1; n <= exhaustive_nodes; ++n) {
        // Successor choices: one or two destinations among exit and 1..n.
        std::vector<std::vector<std::optional<int>>> choices;
        for (int a = 0; a <= n; ++a) {
            auto dest = [](int d) { return d == 0 ? std::optional<int>{} : std::optional<int>{d}; };
            choices.push_back({dest(a)});
            for (int b = a + 1; b <= n; ++b) choices.push_back({dest(a), dest(b)});
        }
        std::vector<size_t> idx(static_cast<size_t>(n), 0);
        while (true) {
            Cfg g;
            g.size = n;
            for (int i = 1; i <= n; ++i)
                for (const auto& d : choices[idx[static_cast<size_t>(i - 1)]]) g.succ[i].push_back({kNorm, d});
            if (all_reachable(g)) compare(r, g);
            size_t k = 0;
            while (k < idx.size() && ++idx[k] == choices.size()) idx[k++] = 0;
            if (k == idx.size()) break;
        }
    }
    std::mt19937_64 rng(seed);
    for (int t = 0; t < random_cases;) {
        Cfg g;
        g.size = pick(rng, 5, 8);
        auto dest = [&] {
            int d = pick(rng, 0, g.size);
            return d == 0 ? std::optional<int>{} : std::optional<int>{d};
        };
        for (int i = 1; i <= g.size; ++i) {
            g.succ[i].push_back({kNorm, dest()});
            if (coin(rng)) {
                auto d = dest();
                if (d != g.succ[i][0].target) g.succ[i].push_back({kNorm, d});
            }
            if (coin(rng, 0.3)) g.succ[i].push_back({kNp, dest()});
        }
        if (!all_reachable(g)) continue;
        ++t;
        compare(r, g);
    }
    return r;
}

}  // namespace dexflow::testing
