// Command-line driver: checking, compilation, execution and the NI drivers.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dexflow/ni.hpp"
#include "dexflow/text_format.hpp"

using namespace dexflow;

namespace {

constexpr int kAccept = 0;
constexpr int kReject = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write " + path);
    out << text;
}

void emit(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_file(path, text);
}

// "3", "-1", "null", "new:C", "array:int:2"
Value parse_arg(const std::string& s, const ClassTable& classes, Heap& h, int slot)
{
    if (s == "null") return Value::null();
    if (s.rfind("new:", 0) == 0) return Value::location(h.alloc(classes.make_default(s.substr(4))));
    if (s.rfind("array:", 0) == 0) {
        auto colon = s.find(':', 6);
        if (colon == std::string::npos) throw UsageError("bad array argument '" + s + "'");
        std::string type = s.substr(6, colon - 6);
        int len = std::stoi(s.substr(colon + 1));
        if (len < 0 || (type != "int" && type != "ref")) throw UsageError("bad array argument '" + s + "'");
        Value d = type == "ref" ? Value::null() : Value::integer(0);
        return Value::location(h.alloc(ArrayObj{std::vector<Value>(len, d), kInputArrays, slot}));
    }
    try {
        return Value::integer(Int(s));
    } catch (const std::exception&) {
        throw UsageError("bad argument '" + s + "'");
    }
}

std::string render_outcome(const Outcome& o)
{
    switch (o.status) {
    case Outcome::Status::FuelExhausted: return "fuel exhausted\n";
    case Outcome::Status::Error: return "error: " + o.error + "\n";
    case Outcome::Status::Final: break;
    }
    std::string s = "tag " + o.tag + "\nvalue " + o.value.str() + "\n";
    for (const auto& [l, c] : o.heap.cells) {
        s += "heap @" + std::to_string(l) + " ";
        if (const auto* ob = std::get_if<Object>(&c)) {
            s += ob->cls;
            for (const auto& [f, v] : ob->fields) s += " " + f + "=" + v.str();
        } else {
            s += "array";
            for (const auto& v : std::get<ArrayObj>(c).elems) s += " " + v.str();
        }
        s += "\n";
    }
    return s;
}

template <class Prog>
std::vector<std::pair<std::string, Level>> selected(const Prog& prog, const std::string& method)
{
    std::vector<std::pair<std::string, Level>> out;
    for (const auto& m : prog.methods) {
        if (!method.empty() && m.id != method) continue;
        auto it = prog.env.policy.gamma.entries.find(m.id);
        if (it == prog.env.policy.gamma.entries.end()) continue;
        for (const auto& [k, p] : it->second) out.emplace_back(m.id, k);
    }
    if (!method.empty() && out.empty()) throw UsageError("no policy for method '" + method + "'");
    return out;
}

std::string verdict_line(const Lattice& lat, const std::string& m, Level recv, const Verdict& v)
{
    std::string s = m + " " + lat.name(recv) + ": ";
    return s + (v.typable ? "typable" : "rejected: " + (v.witness ? v.witness->str() : std::string("?"))) + "\n";
}

struct Options {
    std::string file, method, cert, out, amap_out, cert_out, entry, kobs;
    std::vector<std::string> args;
    std::uint64_t fuel = kDefaultFuel, seed = 1;
    int trials = 100;
    bool infer = false, dex = false, by_order = false;
};

int check_jvm(const Options& o)
{
    JvmProgram prog = parse_jvm(read_file(o.file));
    const Lattice& lat = prog.env.lat;
    std::vector<NamedCertificate<JvmCertificate>> certs;
    if (!o.cert.empty()) certs = parse_jvm_certificates(lat, read_file(o.cert));
    bool ok = true;
    for (const auto& [id, recv] : selected(prog, o.method)) {
        const JvmMethod& m = prog.method(id);
        const MethodPolicy& sgn = prog.env.policy.gamma.entries.at(id).at(recv);
        Verdict v;
        if (o.cert.empty()) {
            v = infer_certificate_jvm(prog, m, sgn, compute_cdr(cfg_of(prog, m))).verdict;
        } else {
            auto c = std::find_if(certs.begin(), certs.end(),
                                  [&](const auto& n) { return n.method == id && n.receiver == recv; });
            if (c == certs.end()) throw UsageError("no certificate for " + id + " " + lat.name(recv));
            v = check_typable_jvm(prog, m, sgn, c->cert);
        }
        ok = ok && v.typable;
        std::cout << verdict_line(lat, id, recv, v);
    }
    return ok ? kAccept : kReject;
}

int check_dex(const Options& o)
{
    DexProgram prog = parse_dex(read_file(o.file));
    const Lattice& lat = prog.env.lat;
    if (!o.infer && o.cert.empty()) throw UsageError("check-dex needs --cert or --infer");
    std::vector<NamedCertificate<DexCertificate>> certs;
    if (!o.infer) certs = parse_dex_certificates(lat, read_file(o.cert));
    bool ok = true;
    for (const auto& [id, recv] : selected(prog, o.method)) {
        const DexMethod& m = prog.method(id);
        const MethodPolicy& sgn = prog.env.policy.gamma.entries.at(id).at(recv);
        Verdict v;
        if (o.infer) {
            v = infer_certificate_dex(prog, m, sgn, compute_cdr(cfg_of(prog, m))).verdict;
        } else {
            auto c = std::find_if(certs.begin(), certs.end(),
                                  [&](const auto& n) { return n.method == id && n.receiver == recv; });
            if (c == certs.end()) throw UsageError("no certificate for " + id + " " + lat.name(recv));
            v = check_typable_dex(prog, m, sgn, c->cert);
        }
        ok = ok && v.typable;
        std::cout << verdict_line(lat, id, recv, v);
    }
    return ok ? kAccept : kReject;
}

// Certificates are translated from inferred JVM ones. Methods the JVM
// checker rejects still get a certificate built from the partial fixpoint,
// which the DEX checker then rejects.
int compile(const Options& o)
{
    JvmProgram prog = parse_jvm(read_file(o.file));
    CompiledProgram cp = compile_program(prog);
    emit(o.out, serialize(cp.prog));
    if (!o.amap_out.empty()) write_file(o.amap_out, serialize_amaps(cp.amaps));
    if (!o.cert_out.empty()) {
        std::string text;
        for (const auto& [id, recv] : selected(prog, "")) {
            const JvmMethod& m = prog.method(id);
            const MethodPolicy& sgn = prog.env.policy.gamma.entries.at(id).at(recv);
            JvmInference inf = infer_certificate_jvm(prog, m, sgn, compute_cdr(cfg_of(prog, m)));
            TranslatedCertificate tc = translate_certificate(prog, m, sgn, inf.cert, cp.prog,
                                                             cp.prog.method(id), cp.amaps.at(id));
            text += serialize_certificate(prog.env.lat, id, recv, tc.cert);
        }
        write_file(o.cert_out, text);
    }
    return kAccept;
}

template <class Prog>
int run(const Options& o, const Prog& prog, bool dex)
{
    if (!prog.find(o.entry)) throw UsageError("unknown method '" + o.entry + "'");
    Heap h;
    std::vector<Value> locals;
    for (size_t i = 0; i < o.args.size(); ++i)
        locals.push_back(parse_arg(o.args[i], prog.env.classes, h, static_cast<int>(i)));
    int n = prog.method(o.entry).n_locals;
    if (static_cast<int>(locals.size()) > n) throw UsageError("too many arguments");
    locals.resize(static_cast<size_t>(n), Value::integer(0));
    Outcome out;
    if constexpr (std::is_same_v<Prog, DexProgram>)
        out = run_dex(prog, o.entry, locals, h, o.fuel);
    else
        out = run_jvm(prog, o.entry, locals, h, o.fuel);
    (void)dex;
    std::cout << render_outcome(out);
    return out.done() ? kAccept : kReject;
}

template <class Prog>
int soap(const Prog& prog, const std::string& method)
{
    bool ok = true;
    for (const auto& m : prog.methods) {
        if (!method.empty() && m.id != method) continue;
        SoapReport r = check_soap(cfg_of(prog, m), compute_cdr(cfg_of(prog, m)));
        std::cout << m.id << ": " << (r.ok() ? "ok" : "failed") << "\n";
        for (const auto& f : r.failures) std::cout << "  " << f << "\n";
        ok = ok && r.ok();
    }
    return ok ? kAccept : kReject;
}

NiConfig ni_config(const Options& o, const Lattice& lat)
{
    NiConfig cfg;
    cfg.trials = o.trials;
    cfg.seed = o.seed;
    cfg.fuel = o.fuel;
    if (!o.kobs.empty()) cfg.kobs = lat.level(o.kobs);
    if (o.by_order) cfg.beta_search = NiConfig::BetaSearch::AllocationOrder;
    return cfg;
}

template <class Prog>
int ni(const Options& o, const Prog& prog, bool safety)
{
    const Lattice& lat = prog.env.lat;
    NiConfig cfg = ni_config(o, lat);
    bool ok = true;
    for (const auto& [id, recv] : selected(prog, o.method)) {
        const MethodPolicy& sgn = prog.env.policy.gamma.entries.at(id).at(recv);
        const auto& m = prog.method(id);
        Runner r;
        if constexpr (std::is_same_v<Prog, DexProgram>)
            r = dex_runner(prog, id, cfg.fuel);
        else
            r = jvm_runner(prog, id, cfg.fuel);
        std::cout << "method " << id << " " << lat.name(recv) << "\n";
        if (safety) {
            SafetyReport rep = side_effect_safety_test(lat, prog.env, shape_of(m), sgn, r, cfg);
            std::cout << rep.str();
            ok = ok && rep.safe();
        } else {
            NiReport rep = ni_test(lat, prog.env, shape_of(m), sgn, r, cfg);
            std::cout << rep.str(lat);
            ok = ok && !rep.interference();
        }
    }
    return ok ? kAccept : kReject;
}

int preserve(const Options& o)
{
    JvmProgram prog = parse_jvm(read_file(o.file));
    NiConfig cfg = ni_config(o, prog.env.lat);
    bool ok = true;
    for (const auto& e : preservation_test(prog, cfg)) {
        // Methods the JVM checker rejects are outside the gate.
        bool pass = !e.jvm_typable || e.passed();
        std::cout << e.method << " " << prog.env.lat.name(e.receiver) << ": "
                  << (!e.jvm_typable ? "excluded" : pass ? "pass" : "FAIL") << " jvm_typable=" << e.jvm_typable
                  << " dex_typable=" << e.dex_typable << " dex_inferred=" << e.dex_inferred
                  << " soap=" << e.jvm_soap << "/" << e.dex_soap << " raised=" << e.raised
                  << " runs=" << e.agreement.compared << "/" << e.agreement.trials << "\n";
        if (!e.detail.empty()) std::cout << "  " << e.detail << "\n";
        if (e.agreement.disagreement) std::cout << "  " << *e.agreement.disagreement << "\n";
        ok = ok && pass;
    }
    return ok ? kAccept : kReject;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Information-flow checking and JVM to DEX compilation"};
    app.require_subcommand(1);
    Options o;

    auto file_opt = [&](CLI::App* c) { c->add_option("file", o.file, "Assembly unit")->required()->check(CLI::ExistingFile); };
    auto method_opt = [&](CLI::App* c) { c->add_option("--method", o.method, "Restrict to one method"); };

    auto* cj = app.add_subcommand("check-jvm", "Type check a JVM unit");
    file_opt(cj);
    method_opt(cj);
    cj->add_option("--cert", o.cert, "Certificate file; inferred when absent");

    auto* cd = app.add_subcommand("check-dex", "Type check a DEX unit");
    file_opt(cd);
    method_opt(cd);
    cd->add_option("--cert", o.cert, "Certificate file");
    cd->add_flag("--infer", o.infer, "Infer the certificate");

    auto* co = app.add_subcommand("compile", "Compile a JVM unit to DEX");
    file_opt(co);
    co->add_option("-o,--out", o.out, "DEX output, stdout by default");
    co->add_option("--amap", o.amap_out, "Address map output");
    co->add_option("--cert", o.cert_out, "Translated certificate output");

    std::vector<CLI::App*> runs;
    for (const char* name : {"run-jvm", "run-dex"}) {
        auto* r = app.add_subcommand(name, std::string("Execute a method on the ") + (name[4] == 'j' ? "JVM" : "DEX") + " machine");
        file_opt(r);
        r->add_option("--entry", o.entry, "Method to run")->required();
        r->add_option("--arg", o.args, "Local variable values: integer, null, new:C, array:int:N");
        r->add_option("--fuel", o.fuel, "Step budget");
        runs.push_back(r);
    }

    auto* so = app.add_subcommand("soap", "Compute regions and check the SOAP properties");
    file_opt(so);
    method_opt(so);
    so->add_flag("--dex", o.dex, "Input is a DEX unit");

    std::vector<CLI::App*> nis;
    for (const char* name : {"ni-test", "side-effect"}) {
        auto* n = app.add_subcommand(name, name[0] == 'n' ? "Randomized non-interference test"
                                                          : "Randomized side-effect safety test");
        file_opt(n);
        method_opt(n);
        n->add_flag("--dex", o.dex, "Input is a DEX unit");
        n->add_option("--trials", o.trials, "Number of input pairs")->check(CLI::NonNegativeNumber);
        n->add_option("--seed", o.seed, "RNG seed");
        n->add_option("--kobs", o.kobs, "Observer level");
        n->add_option("--fuel", o.fuel, "Step budget per run");
        n->add_flag("--by-order", o.by_order, "Pair fresh allocations in allocation order");
        nis.push_back(n);
    }

    auto* pr = app.add_subcommand("preserve", "Compile, translate certificates and compare runs");
    file_opt(pr);
    pr->add_option("--trials", o.trials, "Random inputs per method")->check(CLI::NonNegativeNumber);
    pr->add_option("--seed", o.seed, "RNG seed");
    pr->add_option("--fuel", o.fuel, "Step budget per run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kAccept : kUsage;
    }

    try {
        if (cj->parsed()) return check_jvm(o);
        if (cd->parsed()) return check_dex(o);
        if (co->parsed()) return compile(o);
        if (runs[0]->parsed()) return run(o, parse_jvm(read_file(o.file)), false);
        if (runs[1]->parsed()) return run(o, parse_dex(read_file(o.file)), true);
        if (so->parsed())
            return o.dex ? soap(parse_dex(read_file(o.file)), o.method) : soap(parse_jvm(read_file(o.file)), o.method);
        for (int i = 0; i < 2; ++i)
            if (nis[i]->parsed())
                return o.dex ? ni(o, parse_dex(read_file(o.file)), i == 1)
                             : ni(o, parse_jvm(read_file(o.file)), i == 1);
        if (pr->parsed()) return preserve(o);
    } catch (const ParseError& e) {
        std::cerr << o.file << ":" << e.what() << "\n";
        return kUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const LatticeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kReject;
    }
    return kUsage;
}
