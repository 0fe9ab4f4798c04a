#include <doctest.h>

#include "dexflow/text_format.hpp"
#include "support/support.hpp"

using namespace dexflow;

namespace {

const Level Lo = 0;
const Level Hi = 1;
const ExtLevel L = ExtLevel::simple(Lo);
const ExtLevel H = ExtLevel::simple(Hi);

Value I(int n) { return Value::integer(n); }

Outcome final_norm(Value v, Heap h = {})
{
    Outcome o;
    o.status = Outcome::Status::Final;
    o.tag = kNorm;
    o.value = std::move(v);
    o.heap = std::move(h);
    return o;
}

Outcome final_exc(const std::string& cls)
{
    Outcome o;
    o.status = Outcome::Status::Final;
    o.tag = cls;
    Loc l = o.heap.alloc(Object{cls, {}});
    o.value = Value::location(l);
    return o;
}

Policy fields_policy()
{
    Policy p;
    p.ft["f"] = L;
    p.ft["h"] = H;
    return p;
}

Heap one_object(int f, int h)
{
    Heap x;
    x.alloc(Object{"C", {{"f", I(f)}, {"h", I(h)}}});
    return x;
}

JvmProgram golden(const std::string& name)
{
    return parse_jvm(read_file(testing::corpus_dir() + "/golden/" + name));
}

NiReport ni_jvm(const JvmProgram& p, const std::string& id, NiConfig cfg)
{
    const JvmMethod& m = p.method(id);
    const MethodPolicy& sgn = p.env.policy.gamma.entries.at(id).begin()->second;
    return ni_test(p.env.lat, p.env, shape_of(m), sgn, jvm_runner(p, id, cfg.fuel), cfg);
}

}  // namespace

TEST_CASE("value indistinguishability")
{
    CHECK(value_indist(Value::null(), Value::null(), {}));
    CHECK(value_indist(I(3), I(3), {}));
    CHECK_FALSE(value_indist(I(3), I(4), {}));
    CHECK_FALSE(value_indist(Value::location(1), Value::location(2), {{1, 3}}));
    CHECK(value_indist(Value::location(1), Value::location(3), {{1, 3}}));
    CHECK_FALSE(value_indist(Value::null(), I(0), {}));
}

TEST_CASE("register indistinguishability")
{
    Lattice lat = Lattice::two_point();
    CHECK(registers_indist(lat, {I(0), I(1)}, {I(5), I(6)}, {H, H}, {H, H}, Lo, {}));
    CHECK(registers_indist(lat, {I(0), I(1)}, {I(0), I(6)}, {L, H}, {L, H}, Lo, {}));
    CHECK_FALSE(registers_indist(lat, {I(0), I(1)}, {I(1), I(6)}, {L, H}, {L, H}, Lo, {}));
    CHECK(registers_indist(lat, {I(0), I(1)}, {I(1), I(6)}, {L, H}, {L, H}, Lo, {}, {0}));
    CHECK_THROWS_AS(registers_indist(lat, {I(0)}, {I(0), I(1)}, {L}, {L, L}, Lo, {}), std::invalid_argument);
}

TEST_CASE("local variable indistinguishability")
{
    Lattice lat = Lattice::two_point();
    CHECK(locals_indist(lat, {I(0), I(0), I(5)}, {I(0), I(9), I(5)}, {L, H, L}, Lo, {}));
    CHECK_FALSE(locals_indist(lat, {I(0), I(0), I(5)}, {I(0), I(9), I(6)}, {L, H, L}, Lo, {}));
    CHECK(locals_indist(lat, {}, {}, {}, Lo, {}));
    CHECK_THROWS_AS(locals_indist(lat, {I(0)}, {}, {L}, Lo, {}), std::invalid_argument);
}

TEST_CASE("heap indistinguishability")
{
    Lattice lat = Lattice::two_point();
    Policy pol = fields_policy();
    CHECK(heap_indist(lat, pol, {}, {}, {}, Lo));
    CHECK(heap_indist(lat, pol, one_object(1, 2), one_object(1, 7), {{1, 1}}, Lo));
    CHECK_FALSE(heap_indist(lat, pol, one_object(1, 2), one_object(3, 2), {{1, 1}}, Lo));
    // An observer at H sees every field.
    CHECK_FALSE(heap_indist(lat, pol, one_object(1, 2), one_object(1, 7), {{1, 1}}, Hi));

    pol.at["m"][1] = L;
    Heap a, b;
    a.alloc(ArrayObj{{I(0), I(0)}, "m", 1});
    b.alloc(ArrayObj{{I(0), I(0), I(0)}, "m", 1});
    CHECK_FALSE(heap_indist(lat, pol, a, b, {{1, 1}}, Lo));
    Heap c;
    c.alloc(ArrayObj{{I(0), I(1)}, "m", 1});
    CHECK_FALSE(heap_indist(lat, pol, a, c, {{1, 1}}, Lo));
    pol.at["m"][1] = H;
    CHECK(heap_indist(lat, pol, a, c, {{1, 1}}, Lo));
    // Locations outside the heap cannot be related.
    CHECK_FALSE(heap_indist(lat, pol, a, c, {{2, 1}}, Lo));
}

TEST_CASE("output indistinguishability")
{
    Lattice lat = Lattice::two_point();
    Policy pol = fields_policy();
    MethodPolicy sgn{{}, Lo, {{kNorm, Lo}, {"E", Hi}, {kNp, Lo}}};
    CHECK(output_indist(lat, pol, final_norm(I(5)), final_norm(I(5)), {}, Lo, sgn));
    CHECK_FALSE(output_indist(lat, pol, final_norm(I(5)), final_norm(I(6)), {}, Lo, sgn));
    CHECK(output_indist(lat, pol, final_norm(I(5)), final_exc("E"), {}, Lo, sgn));
    CHECK(output_indist(lat, pol, final_exc("E"), final_norm(I(5)), {}, Lo, sgn));
    CHECK_FALSE(output_indist(lat, pol, final_norm(I(5)), final_exc(kNp), {}, Lo, sgn));
    CHECK(output_indist(lat, pol, final_exc(kNp), final_exc(kNp), {{1, 1}}, Lo, sgn));
    CHECK_THROWS_AS(output_indist(lat, pol, final_exc("F"), final_norm(I(0)), {}, Lo, sgn), PolicyError);

    MethodPolicy high{{}, Lo, {{kNorm, Hi}}};
    CHECK(output_indist(lat, pol, final_norm(I(5)), final_norm(I(6)), {}, Lo, high));
}

TEST_CASE("side effect preorder")
{
    Lattice lat = Lattice::two_point();
    Policy pol = fields_policy();
    Heap h = one_object(1, 2);
    CHECK(side_effect_preorder(lat, pol, h, h, Hi));
    Heap bigger = h;
    bigger.alloc(Object{"C", {{"f", I(0)}, {"h", I(0)}}});
    CHECK(side_effect_preorder(lat, pol, h, bigger, Hi));
    CHECK_FALSE(side_effect_preorder(lat, pol, bigger, h, Hi));
    CHECK_FALSE(side_effect_preorder(lat, pol, h, one_object(9, 2), Hi));
    CHECK(side_effect_preorder(lat, pol, h, one_object(1, 9), Hi));
    CHECK(side_effect_preorder(lat, pol, h, one_object(9, 9), Lo));
}

TEST_CASE("side effect preorder is transitive")
{
    Lattice lat = Lattice::two_point();
    Policy pol;
    pol.ft["f"] = L;
    pol.ft["g"] = H;
    std::mt19937_64 rng(11);
    auto mutate = [&](Heap h) {
        for (auto& [l, c] : h.cells)
            if (auto* o = std::get_if<Object>(&c); o && rng() % 3 == 0) {
                const char* f = rng() % 2 ? "f" : "g";
                if (o->fields.count(f)) o->fields[f] = I(static_cast<int>(rng() % 3));
            }
        if (rng() % 2) h.alloc(Object{"D", {{"f", I(0)}}});
        return h;
    };
    long chains = 0;
    for (int i = 0; i < 3000; ++i) {
        Heap a = testing::random_heap(lat, rng, 3);
        Heap b = mutate(a);
        Heap c = mutate(b);
        Level k = static_cast<Level>(rng() % 2);
        CHECK(side_effect_preorder(lat, pol, a, a, k));
        if (side_effect_preorder(lat, pol, a, b, k) && side_effect_preorder(lat, pol, b, c, k)) {
            ++chains;
            CHECK(side_effect_preorder(lat, pol, a, c, k));
        }
    }
    CHECK(chains > 500);
}

TEST_CASE("the first example interferes at the fixed first trial")
{
    JvmProgram p = golden("ex1.jvm");
    NiConfig cfg;
    NiReport r = ni_jvm(p, "main", cfg);
    REQUIRE(r.interference());
    const NiWitness& w = *r.witness;
    CHECK(w.trial == 0);
    CHECK(w.inputs.a.locals[1] == I(0));
    CHECK(w.inputs.b.locals[1] == I(1));
    CHECK(w.out1.value == I(0));
    CHECK(w.out2.value == I(1));
    CHECK(r.str(p.env.lat).find("verdict interference") != std::string::npos);

    cfg.trials = 0;
    NiReport none = ni_jvm(p, "main", cfg);
    CHECK_FALSE(none.interference());
    CHECK(none.trials == 0);
}

TEST_CASE("witnesses replay from their seed")
{
    JvmProgram p = golden("ex3.jvm");
    NiConfig cfg;
    cfg.seed = 99;
    NiReport a = ni_jvm(p, "main", cfg);
    NiReport b = ni_jvm(p, "main", cfg);
    REQUIRE(a.interference());
    CHECK(a.str(p.env.lat) == b.str(p.env.lat));
    const MethodPolicy& sgn = p.env.policy.gamma.entries.at("main").begin()->second;
    InputPair again = generate_pair(p.env.lat, p.env, shape_of(p.method("main")), sgn.ka, p.env.policy.kobs, cfg.gen,
                                    a.witness->seed, a.witness->trial);
    CHECK(again.a.locals == a.witness->inputs.a.locals);
    CHECK(again.b.locals == a.witness->inputs.b.locals);
    CHECK(again.a.heap == a.witness->inputs.a.heap);
    CHECK(again.b.heap == a.witness->inputs.b.heap);
}

TEST_CASE("generated pairs are indistinguishable inputs")
{
    for (const auto& f : testing::corpus_files("typable")) {
        JvmProgram p = parse_jvm(read_file(f));
        for (const auto& m : p.methods) {
            const MethodPolicy& sgn = p.env.policy.gamma.entries.at(m.id).begin()->second;
            Policy pol = policy_with_inputs(p.env.lat, p.env.policy, sgn.ka);
            for (int t = 0; t < 30; ++t) {
                InputPair in = generate_pair(p.env.lat, p.env, shape_of(m), sgn.ka, p.env.policy.kobs, {}, 3, t);
                INFO(m.id << " trial " << t);
                CHECK(injective(in.beta));
                CHECK(locals_indist(p.env.lat, in.a.locals, in.b.locals, sgn.ka, p.env.policy.kobs, in.beta));
                CHECK(heap_indist(p.env.lat, pol, in.a.heap, in.b.heap, in.beta, p.env.policy.kobs));
            }
        }
    }
}

TEST_CASE("a low straight-line method shows no interference")
{
    JvmProgram p = parse_jvm(read_file(testing::corpus_dir() + "/typable/arith.jvm"));
    NiConfig cfg;
    NiReport r = ni_jvm(p, "add", cfg);
    CHECK_FALSE(r.interference());
    CHECK(r.trials == 100);
    CHECK(r.completed == 100);
    // Exhaustive sweep over the integer band: equal low inputs, equal results.
    for (int x = -3; x <= 3; ++x)
        for (int y = -3; y <= 3; ++y) {
            std::vector<Value> in{I(0), I(x), I(y)};
            in.resize(p.method("add").n_locals, I(0));
            CHECK(run_jvm(p, "add", in, {}).value == run_jvm(p, "add", in, {}).value);
        }
}

TEST_CASE("side effect safety")
{
    JvmProgram arith = parse_jvm(read_file(testing::corpus_dir() + "/typable/arith.jvm"));
    JvmProgram heap = parse_jvm(read_file(testing::corpus_dir() + "/typable/heap.jvm"));
    JvmProgram bad = parse_jvm(read_file(testing::corpus_dir() + "/violations/side_effect.jvm"));
    NiConfig cfg;
    auto safety = [&](const JvmProgram& p, const std::string& id) {
        const MethodPolicy& sgn = p.env.policy.gamma.entries.at(id).begin()->second;
        return side_effect_safety_test(p.env.lat, p.env, shape_of(p.method(id)), sgn, jvm_runner(p, id, cfg.fuel),
                                       cfg);
    };
    CHECK(safety(arith, "add").safe());
    for (const auto& m : heap.methods) {
        INFO(m.id);
        CHECK(safety(heap, m.id).safe());
    }
    SafetyReport r = safety(bad, "clobber");
    CHECK_FALSE(r.safe());
    REQUIRE(r.witness);
    CHECK(r.witness->trial == 0);
}

TEST_CASE("preservation")
{
    NiConfig cfg;
    cfg.trials = 30;
    for (const auto& f : testing::corpus_files("typable")) {
        for (const auto& e : preservation_test(parse_jvm(read_file(f)), cfg)) {
            INFO(e.method << ": " << e.detail);
            CHECK(e.passed());
            CHECK(e.dex_inferred);
        }
    }

    JvmProgram ex2 = golden("ex2.jvm");
    auto entries = preservation_test(ex2, cfg);
    REQUIRE(entries.size() == 1);
    CHECK_FALSE(entries[0].jvm_typable);
    CHECK_FALSE(entries[0].passed());
    CompiledProgram c = compile_program(ex2);
    for (const auto& mv : check_program_dex(c.prog)) CHECK_FALSE(mv.verdict.typable);
}

TEST_CASE("compiled runs agree with the source runs")
{
    NiConfig cfg;
    cfg.trials = 40;
    for (const auto& f : testing::corpus_files("typable")) {
        JvmProgram p = parse_jvm(read_file(f));
        CompiledProgram c = compile_program(p);
        for (const auto& m : p.methods) {
            const MethodPolicy& sgn = p.env.policy.gamma.entries.at(m.id).begin()->second;
            AgreementReport r = agreement_test(p, c.prog, m.id, sgn, cfg);
            INFO(m.id << ": " << r.disagreement.value_or(""));
            CHECK(r.ok());
            CHECK(r.compared + r.inconclusive == r.trials);
        }
    }
}
