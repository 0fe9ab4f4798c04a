#include <doctest.h>

#include "dexflow/text_format.hpp"
#include "support/support.hpp"

using namespace dexflow;

namespace {

JvmProgram unit(const std::string& body, const std::string& header = "")
{
    return parse_jvm(".levels L H\n.cover L H\n.class C f\n" + header + ".method m\n.locals 3\n.stack 3\n.args 0\n" +
                     ".policy L ka=L,L,L kh=L kr=Norm:L\n" + body + ".end\n");
}

}  // namespace

TEST_CASE("push and binop")
{
    JvmProgram p = unit("    push 7\n    push 5\n    push 2\n    binop sub\n    return\n");
    const JvmMethod& m = p.method("m");
    std::uint64_t fuel = 10;
    JvmState s{1, {Value::integer(0), Value::integer(0), Value::integer(0)}, {}, {}};
    JvmStep a = step_jvm(p, m, s, fuel);
    CHECK_FALSE(a.final);
    CHECK(a.tag == kNorm);
    CHECK(a.next.pc == 2);
    CHECK(a.next.stack == std::vector<Value>{Value::integer(7)});
    JvmStep b = step_jvm(p, m, step_jvm(p, m, a.next, fuel).next, fuel);
    JvmStep c = step_jvm(p, m, b.next, fuel);
    CHECK(c.next.stack.back() == Value::integer(3));
}

TEST_CASE("null dereference with a handler")
{
    JvmProgram p = unit(".handler l1 l2 h np\nl1: load 1\n    getfield f\nl2: return\nh:  return\n");
    const JvmMethod& m = p.method("m");
    std::uint64_t fuel = 10;
    JvmState s{2, {Value::integer(0), Value::null(), Value::integer(0)}, {Value::null()}, {}};
    JvmStep st = step_jvm(p, m, s, fuel);
    CHECK(st.tag == kNp);
    CHECK(st.next.pc == 4);
    REQUIRE(st.next.stack.size() == 1);
    Loc l = st.next.stack[0].loc;
    CHECK(st.next.h.object(l).cls == kNp);
}

TEST_CASE("runs")
{
    JvmProgram p = unit("    push 1\n    return\n");
    Outcome o = run_jvm(p, "m", {Value::integer(0), Value::integer(0), Value::integer(0)}, {});
    CHECK(o.done());
    CHECK(o.tag == kNorm);
    CHECK(o.value == Value::integer(1));
    CHECK(run_jvm(p, "m", {}, {}, 0).status == Outcome::Status::FuelExhausted);

    JvmProgram d = unit("    push 1\n    push 0\n    binop div\n    return\n");
    CHECK(run_jvm(d, "m", {}, {}).status == Outcome::Status::Error);
}

TEST_CASE("ex1 traces")
{
    JvmProgram p = parse_jvm(read_file(testing::corpus_dir() + "/golden/ex1.jvm"));
    auto run = [&](int x) { return run_jvm(p, "main", {Value::integer(0), Value::integer(x), Value::integer(5)}, {}); };
    // ifeq jumps on zero, so the store of 1 only happens for a non-zero guard.
    CHECK(run(0).value == Value::integer(0));
    CHECK(run(1).value == Value::integer(1));
    CHECK(run(-3).value == Value::integer(1));
}

TEST_CASE("successor relation")
{
    JvmProgram p = unit(
        "    load 1\n    ifeq t\n    new C\nt:  throw\n", ".class E\n");
    JvmMethod& m = p.methods[0];
    m.class_analysis[4] = {"E"};
    CHECK(successors_jvm(p, m, 2) == std::vector<Succ>{{kNorm, 3}, {kNorm, 4}});
    auto th = successors_jvm(p, m, 4);
    CHECK(std::find(th.begin(), th.end(), Succ{"E", std::nullopt}) != th.end());
    CHECK(std::find(th.begin(), th.end(), Succ{kNp, std::nullopt}) != th.end());
    JvmProgram r = unit("    push 0\n    return\n");
    CHECK(successors_jvm(r, r.methods[0], 2) == std::vector<Succ>{{kNorm, std::nullopt}});
}

TEST_CASE("steps stay within the successor relation and the heap only grows")
{
    std::mt19937_64 rng(11);
    long checked = 0;
    for (const auto& f : testing::corpus_files("typable")) {
        JvmProgram p = parse_jvm(read_file(f));
        for (const auto& m : p.methods) {
            for (int t = 0; t < 20; ++t) {
                auto pair = generate_pair(p.env.lat, p.env, shape_of(m), p.env.policy.gamma.entries.at(m.id).begin()->second.ka,
                                          p.env.policy.kobs, {}, rng(), t);
                JvmState s{1, pair.a.locals, {}, pair.a.heap};
                std::uint64_t fuel = 10000;
                for (int k = 0; k < 200; ++k) {
                    JvmStep st;
                    try {
                        st = step_jvm(p, m, s, fuel);
                    } catch (const MachineError&) {
                        break;
                    }
                    auto succ = successors_jvm(p, m, s.pc);
                    std::optional<int> to = st.final ? std::nullopt : std::optional<int>{st.next.pc};
                    CHECK(std::find(succ.begin(), succ.end(), Succ{st.tag, to}) != succ.end());
                    for (const auto& [l, c] : s.h.cells) CHECK(st.next.h.contains(l));
                    ++checked;
                    if (st.final) break;
                    s = st.next;
                }
            }
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("validation")
{
    CHECK_THROWS_AS(unit("    push 0\n    return\n    return\n"), ParseError);  // unreachable
    CHECK_THROWS_AS(unit("    push 0\n"), ParseError);                          // falls off the end
    CHECK_THROWS_AS(unit("    load 7\n    return\n"), ParseError);
}
