#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sys/wait.h>

#include "support/support.hpp"

namespace {

struct Result {
    int code = -1;
    std::string out;
};

// Runs the command line tool with the given arguments, merging stderr.
Result cli(const std::string& args)
{
    std::string cmd = std::string(DEXFLOW_CLI) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    Result r;
    std::array<char, 4096> buf{};
    size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string golden(const std::string& name) { return dexflow::testing::corpus_dir() + "/golden/" + name; }
std::string typable(const std::string& name) { return dexflow::testing::corpus_dir() + "/typable/" + name; }

std::string scratch()
{
    auto dir = std::filesystem::temp_directory_path() / "dexflow_cli_test";
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("check-jvm")
{
    Result r = cli("check-jvm " + golden("ex1.jvm"));
    CHECK(r.code == 1);
    CHECK(r.out.find("store: H ⊔ H ≤ L") != std::string::npos);
    CHECK(cli("check-jvm " + typable("arith.jvm")).code == 0);
    CHECK(cli("check-jvm /nonexistent.jvm").code == 2);
}

TEST_CASE("compile then check-dex")
{
    std::string out = scratch() + "/arith.dex";
    Result c = cli("compile " + typable("arith.jvm") + " -o " + out);
    REQUIRE(c.code == 0);
    CHECK(cli("check-dex " + out + " --infer").code == 0);

    std::string cert = scratch() + "/exceptions.dcert";
    std::string dex = scratch() + "/exceptions.dex";
    REQUIRE(cli("compile " + typable("exceptions.jvm") + " -o " + dex + " --cert " + cert).code == 0);
    CHECK(cli("check-dex " + dex + " --cert " + cert).code == 0);

    std::string bad = scratch() + "/ex1.dex";
    REQUIRE(cli("compile " + golden("ex1.jvm") + " -o " + bad).code == 0);
    CHECK(cli("check-dex " + bad + " --infer").code == 1);
}

TEST_CASE("runs")
{
    Result r = cli("run-jvm " + golden("ex1.jvm") + " --entry main --arg 0 --arg 1 --arg 0");
    CHECK(r.code == 0);
    CHECK(r.out == "tag Norm\nvalue 1\n");
    CHECK(cli("run-jvm " + golden("ex1.jvm")).code == 2);
    CHECK(cli("run-jvm " + golden("ex1.jvm") + " --entry nope").code == 2);
    CHECK(cli("frobnicate").code == 2);
}

TEST_CASE("analyses")
{
    CHECK(cli("soap " + typable("exceptions.jvm")).code == 0);
    Result ni = cli("ni-test " + golden("ex1.jvm") + " --trials 50");
    CHECK(ni.code == 1);
    CHECK(ni.out.find("verdict interference") != std::string::npos);
    CHECK(cli("ni-test " + typable("arith.jvm") + " --method add --trials 50").code == 0);
    CHECK(cli("side-effect " + dexflow::testing::corpus_dir() + "/violations/side_effect.jvm").code == 1);
    CHECK(cli("preserve " + typable("heap.jvm") + " --trials 20").code == 0);
}
