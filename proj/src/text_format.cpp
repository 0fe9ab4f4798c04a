#include "dexflow/text_format.hpp"

#include <cctype>
#include <charconv>
#include <functional>
#include <optional>
#include <set>
#include <fstream>
#include <sstream>

namespace dexflow {

namespace {

struct Token {
    std::string text;
    int col = 1;
};

struct Line {
    int no = 0;
    std::vector<Token> toks;
};

std::vector<Line> split_lines(const std::string& text)
{
    std::vector<Line> out;
    std::istringstream in(text);
    std::string raw;
    int no = 0;
    while (std::getline(in, raw)) {
        ++no;
        if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
        Line l;
        l.no = no;
        size_t i = 0;
        while (i < raw.size()) {
            while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
            if (i >= raw.size()) break;
            size_t j = i;
            while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
            l.toks.push_back({raw.substr(i, j - i), static_cast<int>(i) + 1});
            i = j;
        }
        if (!l.toks.empty()) out.push_back(std::move(l));
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    if (s.empty()) return out;
    size_t i = 0;
    for (;;) {
        size_t j = s.find(sep, i);
        out.push_back(s.substr(i, j == std::string::npos ? std::string::npos : j - i));
        if (j == std::string::npos) break;
        i = j + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep)
{
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

const char* binop_name(BinOp op)
{
    switch (op) {
    case BinOp::Add: return "add";
    case BinOp::Sub: return "sub";
    case BinOp::Mul: return "mul";
    case BinOp::Div: return "div";
    }
    return "?";
}

// Shared cursor over the lines of a unit.
class Reader {
public:
    explicit Reader(const std::string& text) : lines_(split_lines(text)) {}

    bool done() const { return pos_ >= lines_.size(); }
    const Line& peek() const { return lines_[pos_]; }
    const Line& next() { return lines_[pos_++]; }

    [[noreturn]] static void fail(const Line& l, const Token& t, const std::string& msg)
    {
        throw ParseError(l.no, t.col, msg);
    }
    [[noreturn]] static void fail(const Line& l, const std::string& msg)
    {
        throw ParseError(l.no, l.toks.empty() ? 1 : l.toks.front().col, msg);
    }
    static void arity(const Line& l, size_t lo, size_t hi)
    {
        if (l.toks.size() < lo + 1 || l.toks.size() > hi + 1)
            fail(l, "'" + l.toks[0].text + "' expects " +
                        (lo == hi ? std::to_string(lo) : std::to_string(lo) + " to " + std::to_string(hi)) +
                        " operands");
    }
    static long integer(const Line& l, const Token& t)
    {
        long v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc() || p != t.text.data() + t.text.size()) fail(l, t, "expected an integer, got '" + t.text + "'");
        return v;
    }
    static Int big(const Line& l, const Token& t)
    {
        const std::string& s = t.text;
        size_t k = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
        if (k >= s.size() || s.find_first_not_of("0123456789", k) != std::string::npos)
            fail(l, t, "expected an integer, got '" + s + "'");
        return Int(s);
    }
    static int reg(const Line& l, const Token& t)
    {
        if (t.text.size() < 2 || t.text[0] != 'r') fail(l, t, "expected a register, got '" + t.text + "'");
        Token rest{t.text.substr(1), t.col + 1};
        long v = integer(l, rest);
        if (v < 0) fail(l, t, "negative register");
        return static_cast<int>(v);
    }
    static Level level(const Lattice& lat, const Line& l, const Token& t, const std::string& s)
    {
        if (!lat.has_level(s)) fail(l, t, "unknown level '" + s + "'");
        return lat.level(s);
    }
    static ExtLevel ext(const Lattice& lat, const Line& l, const Token& t, const std::string& s)
    {
        try {
            return lat.parse_ext(s);
        } catch (const std::exception& e) {
            fail(l, t, e.what());
        }
    }

private:
    std::vector<Line> lines_;
    size_t pos_ = 0;
};

// A label or numeric point waiting for the method's label table.
struct PendingRef {
    int line;
    Token tok;
};

template <class Method>
struct MethodBuilder {
    Method m;
    std::map<std::string, std::pair<int, int>> labels;  // name -> (pp, line)
    std::vector<std::pair<PendingRef, std::function<void(int)>>> refs;

    void ref(const Line& l, const Token& t, std::function<void(int)> set)
    {
        refs.push_back({{l.no, t}, std::move(set)});
    }
    void resolve()
    {
        const int n = static_cast<int>(m.code.size());
        for (auto& [r, set] : refs) {
            int pp = 0;
            auto it = labels.find(r.tok.text);
            if (it != labels.end()) {
                pp = it->second.first;
            } else {
                long v = 0;
                auto [p, ec] = std::from_chars(r.tok.text.data(), r.tok.text.data() + r.tok.text.size(), v);
                if (ec != std::errc() || p != r.tok.text.data() + r.tok.text.size())
                    throw ParseError(r.line, r.tok.col, "undefined label '" + r.tok.text + "'");
                pp = static_cast<int>(v);
            }
            if (pp < 1 || pp > n + 1)
                throw ParseError(r.line, r.tok.col, "point " + std::to_string(pp) + " outside the method");
            set(pp);
        }
    }
};

struct TopLevel {
    bool lattice_declared = false;
    bool dirty = false;
    int decl_line = 0;
    std::vector<std::string> names;
    std::vector<std::pair<std::string, std::string>> covers;
};

// The lattice is built once its declaration lines are complete.
template <class Program>
void finish_lattice(Program& prog, TopLevel& top)
{
    if (!top.dirty) return;
    top.dirty = false;
    try {
        prog.env.lat = Lattice::from_hasse(top.names, top.covers);
    } catch (const std::exception& e) {
        throw ParseError(top.decl_line, 1, e.what());
    }
}

// Directives shared by both units. Returns false when the line is not one.
template <class Program>
bool parse_global(Program& prog, TopLevel& top, const Line& l)
{
    const std::string& d = l.toks[0].text;
    Lattice& lat = prog.env.lat;
    if (d == ".levels") {
        if (top.lattice_declared) Reader::fail(l, "lattice declared twice");
        if (l.toks.size() < 2) Reader::fail(l, ".levels needs at least one level");
        top.lattice_declared = true;
        top.dirty = true;
        top.decl_line = l.no;
        for (size_t k = 1; k < l.toks.size(); ++k) top.names.push_back(l.toks[k].text);
        return true;
    }
    if (d == ".cover") {
        Reader::arity(l, 2, 2);
        if (!top.lattice_declared) Reader::fail(l, ".cover before .levels");
        top.covers.emplace_back(l.toks[1].text, l.toks[2].text);
        return true;
    }
    finish_lattice(prog, top);
    if (d == ".class") {
        if (l.toks.size() < 2) Reader::fail(l, ".class needs a name");
        auto& fields = prog.env.classes.classes[l.toks[1].text];
        for (size_t k = 2; k < l.toks.size(); ++k) {
            std::string f = l.toks[k].text;
            bool ref = false;
            if (f.size() > 4 && f.ends_with(":ref")) {
                f.resize(f.size() - 4);
                ref = true;
            }
            fields.push_back({f, ref});
        }
        return true;
    }
    if (d == ".field") {
        Reader::arity(l, 2, 2);
        prog.env.policy.ft[l.toks[1].text] = Reader::ext(lat, l, l.toks[2], l.toks[2].text);
        return true;
    }
    if (d == ".kobs") {
        Reader::arity(l, 1, 1);
        prog.env.policy.kobs = Reader::level(lat, l, l.toks[1], l.toks[1].text);
        return true;
    }
    return false;
}

template <class Program, class Method>
bool parse_method_directive(Program& prog, MethodBuilder<Method>& mb, const Line& l)
{
    const std::string& d = l.toks[0].text;
    const Lattice& lat = prog.env.lat;
    Method& m = mb.m;
    if (d == ".locals") {
        Reader::arity(l, 1, 1);
        m.n_locals = static_cast<int>(Reader::integer(l, l.toks[1]));
    } else if (d == ".args") {
        Reader::arity(l, 1, 1);
        m.nb_args = static_cast<int>(Reader::integer(l, l.toks[1]));
    } else if (d == ".policy") {
        Reader::arity(l, 1, 4);
        const Level recv = Reader::level(lat, l, l.toks[1], l.toks[1].text);
        MethodPolicy p;
        p.kh = lat.bottom();
        for (size_t k = 2; k < l.toks.size(); ++k) {
            const Token& t = l.toks[k];
            auto eq = t.text.find('=');
            if (eq == std::string::npos) Reader::fail(l, t, "expected key=value");
            const std::string key = t.text.substr(0, eq), val = t.text.substr(eq + 1);
            if (key == "ka") {
                for (const auto& s : split(val, ',')) p.ka.push_back(Reader::ext(lat, l, t, s));
            } else if (key == "kh") {
                p.kh = Reader::level(lat, l, t, val);
            } else if (key == "kr") {
                for (const auto& s : split(val, ',')) {
                    auto c = s.find(':');
                    if (c == std::string::npos) Reader::fail(l, t, "expected Tag:Level in kr");
                    p.kr[s.substr(0, c)] = Reader::level(lat, l, t, s.substr(c + 1));
                }
            } else {
                Reader::fail(l, t, "unknown policy key '" + key + "'");
            }
        }
        if (!prog.env.policy.gamma.entries[m.id].emplace(recv, p).second)
            Reader::fail(l, "second policy for receiver level " + l.toks[1].text);
    } else if (d == ".at") {
        Reader::arity(l, 2, 2);
        ExtLevel e = Reader::ext(lat, l, l.toks[2], l.toks[2].text);
        auto id = m.id;
        mb.ref(l, l.toks[1], [&prog, id, e](int pp) { prog.env.policy.at[id][pp] = e; });
    } else if (d == ".handler") {
        Reader::arity(l, 4, 4);
        const size_t idx = m.handlers.size();
        m.handlers.push_back({0, 0, 0, l.toks[4].text});
        mb.ref(l, l.toks[1], [&mb, idx](int pp) { mb.m.handlers[idx].start = pp; });
        mb.ref(l, l.toks[2], [&mb, idx](int pp) { mb.m.handlers[idx].end = pp; });
        mb.ref(l, l.toks[3], [&mb, idx](int pp) { mb.m.handlers[idx].target = pp; });
    } else if (d == ".classanalysis") {
        Reader::arity(l, 1, 2);
        std::set<Tag> cls;
        if (l.toks.size() == 3)
            for (const auto& c : split(l.toks[2].text, ',')) cls.insert(c);
        mb.ref(l, l.toks[1], [&mb, cls](int pp) { mb.m.class_analysis[pp] = cls; });
    } else if (d == ".excanalysis") {
        Reader::arity(l, 0, 1);
        if (l.toks.size() == 2)
            for (const auto& c : split(l.toks[1].text, ',')) m.exc_analysis.insert(c);
    } else if (d == ".kind") {
        Reader::arity(l, 2, 3);
        SlotKind k;
        const std::string& kind = l.toks[2].text;
        if (kind == "int") {
            Reader::arity(l, 2, 2);
        } else if (kind == "ref" || kind == "array") {
            Reader::arity(l, 3, 3);
            k.kind = kind == "ref" ? SlotKind::Kind::Ref : SlotKind::Kind::Array;
            k.cls = l.toks[3].text;
            if (kind == "array" && k.cls != "int" && k.cls != "ref")
                Reader::fail(l, l.toks[3], "array element type must be int or ref");
        } else {
            Reader::fail(l, l.toks[2], "unknown slot kind '" + kind + "'");
        }
        m.kinds[static_cast<int>(Reader::integer(l, l.toks[1]))] = k;
    } else {
        return false;
    }
    return true;
}

JvmInsn parse_jvm_insn(MethodBuilder<JvmMethod>& mb, const Line& l, size_t first)
{
    const Token& op = l.toks[first];
    const size_t nops = l.toks.size() - first - 1;
    auto want = [&](size_t n) {
        if (nops != n)
            Reader::fail(l, op, "'" + op.text + "' expects " + std::to_string(n) + " operand" + (n == 1 ? "" : "s"));
    };
    auto operand = [&](size_t k) -> const Token& { return l.toks[first + 1 + k]; };
    JvmInsn ins;
    const std::string& o = op.text;
    const int pp = static_cast<int>(mb.m.code.size()) + 1;
    auto target = [&]() {
        mb.ref(l, operand(0), [&mb, pp](int t) { mb.m.code[static_cast<size_t>(pp - 1)].x = t; });
    };
    if (o == "push") { want(1); ins.op = JOp::Push; ins.n = Reader::big(l, operand(0)); }
    else if (o == "pop") { want(0); ins.op = JOp::Pop; }
    else if (o == "swap") { want(0); ins.op = JOp::Swap; }
    else if (o == "load" || o == "store") {
        want(1);
        ins.op = o == "load" ? JOp::Load : JOp::Store;
        ins.x = static_cast<int>(Reader::integer(l, operand(0)));
    }
    else if (o == "binop") {
        want(1);
        ins.op = JOp::Binop;
        const std::string& b = operand(0).text;
        if (b == "add") ins.bop = BinOp::Add;
        else if (b == "sub") ins.bop = BinOp::Sub;
        else if (b == "mul") ins.bop = BinOp::Mul;
        else if (b == "div") ins.bop = BinOp::Div;
        else Reader::fail(l, operand(0), "unknown operator '" + b + "'");
    }
    else if (o == "ifeq") { want(1); ins.op = JOp::Ifeq; target(); }
    else if (o == "goto") { want(1); ins.op = JOp::Goto; target(); }
    else if (o == "return") { want(0); ins.op = JOp::Return; }
    else if (o == "new") { want(1); ins.op = JOp::New; ins.name = operand(0).text; }
    else if (o == "getfield") { want(1); ins.op = JOp::Getfield; ins.name = operand(0).text; }
    else if (o == "putfield") { want(1); ins.op = JOp::Putfield; ins.name = operand(0).text; }
    else if (o == "newarray") { want(1); ins.op = JOp::Newarray; ins.name = operand(0).text; }
    else if (o == "arraylength") { want(0); ins.op = JOp::Arraylength; }
    else if (o == "arrayload") { want(0); ins.op = JOp::Arrayload; }
    else if (o == "arraystore") { want(0); ins.op = JOp::Arraystore; }
    else if (o == "invoke") { want(1); ins.op = JOp::Invoke; ins.name = operand(0).text; }
    else if (o == "throw") { want(0); ins.op = JOp::Throw; }
    else Reader::fail(l, op, "unknown instruction '" + o + "'");
    return ins;
}

DexInsn parse_dex_insn(MethodBuilder<DexMethod>& mb, const Line& l, size_t first)
{
    const Token& op = l.toks[first];
    const size_t nops = l.toks.size() - first - 1;
    auto want = [&](size_t n) {
        if (nops != n)
            Reader::fail(l, op, "'" + op.text + "' expects " + std::to_string(n) + " operand" + (n == 1 ? "" : "s"));
    };
    auto operand = [&](size_t k) -> const Token& { return l.toks[first + 1 + k]; };
    auto reg = [&](size_t k) { return Reader::reg(l, operand(k)); };
    DexInsn ins;
    const std::string& o = op.text;
    const int pp = static_cast<int>(mb.m.code.size()) + 1;
    auto target = [&](size_t k) {
        mb.ref(l, operand(k), [&mb, pp](int t) { mb.m.code[static_cast<size_t>(pp - 1)].target = t; });
    };
    if (o == "const") { want(2); ins.op = DOp::Const; ins.r = reg(0); ins.c = Reader::big(l, operand(1)); }
    else if (o == "move") { want(2); ins.op = DOp::Move; ins.r = reg(0); ins.a = reg(1); }
    else if (o == "binop") {
        want(4);
        ins.op = DOp::Binop;
        const std::string& b = operand(0).text;
        if (b == "add") ins.bop = BinOp::Add;
        else if (b == "sub") ins.bop = BinOp::Sub;
        else if (b == "mul") ins.bop = BinOp::Mul;
        else if (b == "div") ins.bop = BinOp::Div;
        else Reader::fail(l, operand(0), "unknown operator '" + b + "'");
        ins.r = reg(1);
        ins.a = reg(2);
        ins.b = reg(3);
    }
    else if (o == "ifeq" || o == "ifneq") {
        want(2);
        ins.op = o == "ifeq" ? DOp::Ifeq : DOp::Ifneq;
        ins.r = reg(0);
        target(1);
    }
    else if (o == "goto") { want(1); ins.op = DOp::Goto; target(0); }
    else if (o == "return") { want(1); ins.op = DOp::Return; ins.r = reg(0); }
    else if (o == "new") { want(2); ins.op = DOp::New; ins.r = reg(0); ins.name = operand(1).text; }
    else if (o == "iget" || o == "iput") {
        want(3);
        ins.op = o == "iget" ? DOp::Iget : DOp::Iput;
        ins.r = reg(0);
        ins.a = reg(1);
        ins.name = operand(2).text;
    }
    else if (o == "newarray") { want(3); ins.op = DOp::Newarray; ins.r = reg(0); ins.a = reg(1); ins.name = operand(2).text; }
    else if (o == "arraylength") { want(2); ins.op = DOp::Arraylength; ins.r = reg(0); ins.a = reg(1); }
    else if (o == "aget" || o == "aput") {
        want(3);
        ins.op = o == "aget" ? DOp::Aget : DOp::Aput;
        ins.r = reg(0);
        ins.a = reg(1);
        ins.b = reg(2);
    }
    else if (o == "invoke") {
        if (nops < 2) Reader::fail(l, op, "'invoke' expects a method and at least one register");
        ins.op = DOp::Invoke;
        ins.name = operand(0).text;
        for (size_t k = 1; k < nops; ++k) ins.args.push_back(reg(k));
    }
    else if (o == "moveresult") { want(1); ins.op = DOp::Moveresult; ins.r = reg(0); }
    else if (o == "throw") { want(1); ins.op = DOp::Throw; ins.r = reg(0); }
    else if (o == "moveexception") { want(1); ins.op = DOp::Moveexception; ins.r = reg(0); }
    else Reader::fail(l, op, "unknown instruction '" + o + "'");
    return ins;
}

template <class Program, class Method, class InsnParser, class SizeDirective>
Program parse_unit(const std::string& text, InsnParser parse_insn, SizeDirective size_directive)
{
    Program prog;
    TopLevel top;
    Reader rd(text);
    std::set<std::string> ids;
    while (!rd.done()) {
        const Line& l = rd.next();
        if (parse_global(prog, top, l)) continue;
        finish_lattice(prog, top);
        if (l.toks[0].text != ".method") Reader::fail(l, "unexpected '" + l.toks[0].text + "' outside a method");
        Reader::arity(l, 1, 1);
        MethodBuilder<Method> mb;
        mb.m.id = l.toks[1].text;
        if (!ids.insert(mb.m.id).second) Reader::fail(l, l.toks[1], "duplicate method '" + mb.m.id + "'");
        std::optional<std::string> pending_label;
        bool closed = false;
        while (!rd.done()) {
            const Line& ml = rd.next();
            const std::string& d = ml.toks[0].text;
            if (d == ".end") {
                closed = true;
                break;
            }
            if (size_directive(mb, ml) || parse_method_directive(prog, mb, ml)) continue;
            if (d[0] == '.') Reader::fail(ml, "unknown directive '" + d + "'");
            size_t first = 0;
            if (d.back() == ':') {
                const std::string name = d.substr(0, d.size() - 1);
                if (name.empty()) Reader::fail(ml, "empty label");
                const int pp = static_cast<int>(mb.m.code.size()) + 1;
                auto [it, fresh] = mb.labels.emplace(name, std::make_pair(pp, ml.no));
                if (!fresh)
                    Reader::fail(ml, "duplicate label '" + name + "' (lines " + std::to_string(it->second.second) +
                                         " and " + std::to_string(ml.no) + ")");
                if (mb.m.labels.count(pp)) Reader::fail(ml, "second label for one instruction");
                mb.m.labels[pp] = name;
                first = 1;
                if (ml.toks.size() == 1) continue;
            }
            mb.m.code.push_back(parse_insn(mb, ml, first));
        }
        if (!closed) Reader::fail(l, "method '" + mb.m.id + "' lacks .end");
        mb.resolve();
        prog.methods.push_back(std::move(mb.m));
    }
    finish_lattice(prog, top);
    return prog;
}

template <class Program>
void serialize_globals(std::ostringstream& os, const Program& prog)
{
    const Lattice& lat = prog.env.lat;
    os << ".levels " << join(lat.names(), " ") << "\n";
    for (const auto& [lo, hi] : lat.hasse()) os << ".cover " << lo << " " << hi << "\n";
    os << ".kobs " << lat.name(prog.env.policy.kobs) << "\n";
    for (const auto& [cls, fields] : prog.env.classes.classes) {
        os << ".class " << cls;
        for (const auto& f : fields) os << " " << f.name << (f.ref ? ":ref" : "");
        os << "\n";
    }
    for (const auto& [f, lvl] : prog.env.policy.ft) os << ".field " << f << " " << lat.render(lvl) << "\n";
}

template <class Method>
std::string ref_of(const Method& m, int pp)
{
    auto it = m.labels.find(pp);
    return it != m.labels.end() ? it->second : std::to_string(pp);
}

template <class Program, class Method>
void serialize_method_header(std::ostringstream& os, const Program& prog, const Method& m)
{
    const Lattice& lat = prog.env.lat;
    os << ".args " << m.nb_args << "\n";
    if (auto it = prog.env.policy.gamma.entries.find(m.id); it != prog.env.policy.gamma.entries.end()) {
        for (const auto& [recv, p] : it->second) {
            std::vector<std::string> ka, kr;
            for (const auto& e : p.ka) ka.push_back(lat.render(e));
            for (const auto& [t, k] : p.kr) kr.push_back(t + ":" + lat.name(k));
            os << ".policy " << lat.name(recv) << " ka=" << join(ka, ",") << " kh=" << lat.name(p.kh)
               << " kr=" << join(kr, ",") << "\n";
        }
    }
    if (!m.exc_analysis.empty())
        os << ".excanalysis " << join({m.exc_analysis.begin(), m.exc_analysis.end()}, ",") << "\n";
    for (const auto& h : m.handlers)
        os << ".handler " << ref_of(m, h.start) << " " << ref_of(m, h.end) << " " << ref_of(m, h.target) << " "
           << h.cls << "\n";
    for (const auto& [pp, cls] : m.class_analysis) {
        os << ".classanalysis " << ref_of(m, pp);
        if (!cls.empty()) os << " " << join({cls.begin(), cls.end()}, ",");
        os << "\n";
    }
    if (auto it = prog.env.policy.at.find(m.id); it != prog.env.policy.at.end())
        for (const auto& [pp, e] : it->second) os << ".at " << ref_of(m, pp) << " " << lat.render(e) << "\n";
    for (const auto& [slot, k] : m.kinds) {
        os << ".kind " << slot << " ";
        switch (k.kind) {
        case SlotKind::Kind::Int: os << "int"; break;
        case SlotKind::Kind::Ref: os << "ref " << k.cls; break;
        case SlotKind::Kind::Array: os << "array " << k.cls; break;
        }
        os << "\n";
    }
}

template <class Method>
void serialize_code(std::ostringstream& os, const Method& m)
{
    for (int pp = 1; pp <= m.size(); ++pp) {
        auto it = m.labels.find(pp);
        os << (it != m.labels.end() ? it->second + ": " : std::string("    ")) << format_insn(m.at(pp), m) << "\n";
    }
    if (auto it = m.labels.find(m.size() + 1); it != m.labels.end()) os << it->second << ":\n";
}

std::string typing_line(const Lattice& lat, const Typing& t)
{
    std::string out;
    for (const auto& e : t) out += " " + lat.render(e);
    return out;
}

template <class Cert>
std::string serialize_cert(const Lattice& lat, const std::string& method, Level receiver, const Cert& cert,
                           const std::map<int, Typing>& typing, const char* section)
{
    std::ostringstream os;
    os << ".cert " << method << " " << lat.name(receiver) << "\n" << section << ":\n";
    for (const auto& [pp, t] : typing) os << "  " << pp << " =" << typing_line(lat, t) << "\n";
    os << "se:\n";
    for (const auto& [pp, k] : cert.se) os << "  " << pp << " " << lat.name(k) << "\n";
    os << "region:\n";
    for (const auto& [key, reg] : cert.cdr.region) {
        os << "  " << key.first << " " << key.second << " =";
        for (int j : reg) os << " " << j;
        os << "\n";
    }
    os << "jun:\n";
    for (const auto& [key, j] : cert.cdr.jun) os << "  " << key.first << " " << key.second << " " << j << "\n";
    os << ".end\n";
    return os.str();
}

template <class Cert>
std::vector<NamedCertificate<Cert>> parse_certs(const Lattice& lat, const std::string& text, const char* section,
                                                std::map<int, Typing> Cert::*typing)
{
    std::vector<NamedCertificate<Cert>> out;
    Reader rd(text);
    while (!rd.done()) {
        const Line& l = rd.next();
        if (l.toks[0].text != ".cert") Reader::fail(l, "expected .cert");
        Reader::arity(l, 2, 2);
        NamedCertificate<Cert> nc;
        nc.method = l.toks[1].text;
        nc.receiver = Reader::level(lat, l, l.toks[2], l.toks[2].text);
        std::string sec;
        bool closed = false;
        while (!rd.done()) {
            const Line& cl = rd.next();
            const std::string& d = cl.toks[0].text;
            if (d == ".end") {
                closed = true;
                break;
            }
            if (d.back() == ':' && cl.toks.size() == 1) {
                sec = d.substr(0, d.size() - 1);
                if (sec != section && sec != "se" && sec != "region" && sec != "jun")
                    Reader::fail(cl, "unknown section '" + sec + "'");
                continue;
            }
            const int pp = static_cast<int>(Reader::integer(cl, cl.toks[0]));
            if (sec == section) {
                if (cl.toks.size() < 2 || cl.toks[1].text != "=") Reader::fail(cl, "expected 'pp = levels'");
                Typing t;
                for (size_t k = 2; k < cl.toks.size(); ++k) t.push_back(Reader::ext(lat, cl, cl.toks[k], cl.toks[k].text));
                (nc.cert.*typing)[pp] = std::move(t);
            } else if (sec == "se") {
                Reader::arity(cl, 1, 1);
                nc.cert.se[pp] = Reader::level(lat, cl, cl.toks[1], cl.toks[1].text);
            } else if (sec == "region") {
                if (cl.toks.size() < 3 || cl.toks[2].text != "=") Reader::fail(cl, "expected 'pp Tag = points'");
                auto& reg = nc.cert.cdr.region[{pp, cl.toks[1].text}];
                for (size_t k = 3; k < cl.toks.size(); ++k) reg.insert(static_cast<int>(Reader::integer(cl, cl.toks[k])));
            } else if (sec == "jun") {
                Reader::arity(cl, 2, 2);
                nc.cert.cdr.jun[{pp, cl.toks[1].text}] = static_cast<int>(Reader::integer(cl, cl.toks[2]));
            } else {
                Reader::fail(cl, "line outside a section");
            }
        }
        if (!closed) Reader::fail(l, "certificate lacks .end");
        out.push_back(std::move(nc));
    }
    return out;
}

const char* aux_name(AddressMap::Aux a)
{
    switch (a) {
    case AddressMap::Aux::Goto: return "goto";
    case AddressMap::Aux::Moveresult: return "moveresult";
    case AddressMap::Aux::Moveexception: return "moveexception";
    case AddressMap::Aux::Return: return "return";
    }
    return "?";
}

std::vector<int> int_list(const Line& l, const Token& t)
{
    std::vector<int> out;
    for (const auto& s : split(t.text, ',')) out.push_back(static_cast<int>(Reader::integer(l, Token{s, t.col})));
    return out;
}

std::string int_join(const std::vector<int>& v)
{
    std::vector<std::string> s;
    for (int x : v) s.push_back(std::to_string(x));
    return join(s, ",");
}

}  // namespace

std::string format_insn(const JvmInsn& ins, const JvmMethod& m)
{
    switch (ins.op) {
    case JOp::Binop: return std::string("binop ") + binop_name(ins.bop);
    case JOp::Push: return "push " + ins.n.str();
    case JOp::Pop: return "pop";
    case JOp::Swap: return "swap";
    case JOp::Load: return "load " + std::to_string(ins.x);
    case JOp::Store: return "store " + std::to_string(ins.x);
    case JOp::Ifeq: return "ifeq " + ref_of(m, ins.x);
    case JOp::Goto: return "goto " + ref_of(m, ins.x);
    case JOp::Return: return "return";
    case JOp::New: return "new " + ins.name;
    case JOp::Getfield: return "getfield " + ins.name;
    case JOp::Putfield: return "putfield " + ins.name;
    case JOp::Newarray: return "newarray " + ins.name;
    case JOp::Arraylength: return "arraylength";
    case JOp::Arrayload: return "arrayload";
    case JOp::Arraystore: return "arraystore";
    case JOp::Invoke: return "invoke " + ins.name;
    case JOp::Throw: return "throw";
    }
    return "?";
}

std::string format_insn(const DexInsn& ins, const DexMethod& m)
{
    auto r = [](int x) { return "r" + std::to_string(x); };
    switch (ins.op) {
    case DOp::Binop: return std::string("binop ") + binop_name(ins.bop) + " " + r(ins.r) + " " + r(ins.a) + " " + r(ins.b);
    case DOp::Const: return "const " + r(ins.r) + " " + ins.c.str();
    case DOp::Move: return "move " + r(ins.r) + " " + r(ins.a);
    case DOp::Ifeq: return "ifeq " + r(ins.r) + " " + ref_of(m, ins.target);
    case DOp::Ifneq: return "ifneq " + r(ins.r) + " " + ref_of(m, ins.target);
    case DOp::Goto: return "goto " + ref_of(m, ins.target);
    case DOp::Return: return "return " + r(ins.r);
    case DOp::New: return "new " + r(ins.r) + " " + ins.name;
    case DOp::Iget: return "iget " + r(ins.r) + " " + r(ins.a) + " " + ins.name;
    case DOp::Iput: return "iput " + r(ins.r) + " " + r(ins.a) + " " + ins.name;
    case DOp::Newarray: return "newarray " + r(ins.r) + " " + r(ins.a) + " " + ins.name;
    case DOp::Arraylength: return "arraylength " + r(ins.r) + " " + r(ins.a);
    case DOp::Aget: return "aget " + r(ins.r) + " " + r(ins.a) + " " + r(ins.b);
    case DOp::Aput: return "aput " + r(ins.r) + " " + r(ins.a) + " " + r(ins.b);
    case DOp::Invoke: {
        std::string s = "invoke " + ins.name;
        for (int a : ins.args) s += " " + r(a);
        return s;
    }
    case DOp::Moveresult: return "moveresult " + r(ins.r);
    case DOp::Throw: return "throw " + r(ins.r);
    case DOp::Moveexception: return "moveexception " + r(ins.r);
    }
    return "?";
}

JvmProgram parse_jvm(const std::string& text)
{
    auto size = [](MethodBuilder<JvmMethod>& mb, const Line& l) {
        if (l.toks[0].text != ".stack") return false;
        Reader::arity(l, 1, 1);
        mb.m.max_stack = static_cast<int>(Reader::integer(l, l.toks[1]));
        return true;
    };
    JvmProgram prog = parse_unit<JvmProgram, JvmMethod>(text, parse_jvm_insn, size);
    try {
        validate_jvm(prog);
    } catch (const MachineError& e) {
        throw ParseError(0, 0, e.what());
    }
    return prog;
}

DexProgram parse_dex(const std::string& text)
{
    auto size = [](MethodBuilder<DexMethod>& mb, const Line& l) {
        if (l.toks[0].text != ".registers") return false;
        Reader::arity(l, 1, 1);
        mb.m.n_registers = static_cast<int>(Reader::integer(l, l.toks[1]));
        return true;
    };
    DexProgram prog = parse_unit<DexProgram, DexMethod>(text, parse_dex_insn, size);
    try {
        validate_dex(prog);
    } catch (const MachineError& e) {
        throw ParseError(0, 0, e.what());
    }
    return prog;
}

std::string serialize(const JvmProgram& prog)
{
    std::ostringstream os;
    serialize_globals(os, prog);
    for (const auto& m : prog.methods) {
        os << "\n.method " << m.id << "\n.locals " << m.n_locals << "\n.stack " << m.max_stack << "\n";
        serialize_method_header(os, prog, m);
        serialize_code(os, m);
        os << ".end\n";
    }
    return os.str();
}

std::string serialize(const DexProgram& prog)
{
    std::ostringstream os;
    serialize_globals(os, prog);
    for (const auto& m : prog.methods) {
        os << "\n.method " << m.id << "\n.locals " << m.n_locals << "\n.registers " << m.n_registers << "\n";
        serialize_method_header(os, prog, m);
        serialize_code(os, m);
        os << ".end\n";
    }
    return os.str();
}

std::string serialize_certificate(const Lattice& lat, const std::string& method, Level receiver,
                                  const JvmCertificate& cert)
{
    return serialize_cert(lat, method, receiver, cert, cert.S, "S");
}

std::string serialize_certificate(const Lattice& lat, const std::string& method, Level receiver,
                                  const DexCertificate& cert)
{
    return serialize_cert(lat, method, receiver, cert, cert.RT, "RT");
}

std::vector<NamedCertificate<JvmCertificate>> parse_jvm_certificates(const Lattice& lat, const std::string& text)
{
    return parse_certs<JvmCertificate>(lat, text, "S", &JvmCertificate::S);
}

std::vector<NamedCertificate<DexCertificate>> parse_dex_certificates(const Lattice& lat, const std::string& text)
{
    return parse_certs<DexCertificate>(lat, text, "RT", &DexCertificate::RT);
}

std::string serialize_amaps(const std::map<std::string, AddressMap>& amaps)
{
    std::ostringstream os;
    for (const auto& [id, am] : amaps) {
        os << ".amap " << id << "\n";
        os << "order " << int_join(am.order) << "\n";
        for (const auto& [label, pp] : am.blockOf) os << "block " << label << " " << pp << "\n";
        for (const auto& [i, pps] : am.fwd) os << i << " -> " << int_join(pps) << "\n";
        for (const auto& [i, pp] : am.start) os << "start " << i << " " << pp << "\n";
        for (const auto& [pp, ap] : am.aux)
            os << "aux " << pp << " " << aux_name(ap.kind) << " " << ap.block << " "
               << int_join({ap.gens.begin(), ap.gens.end()}) << "\n";
        os << ".end\n";
    }
    return os.str();
}

std::map<std::string, AddressMap> parse_amaps(const std::string& text)
{
    std::map<std::string, AddressMap> out;
    Reader rd(text);
    while (!rd.done()) {
        const Line& l = rd.next();
        if (l.toks[0].text != ".amap") Reader::fail(l, "expected .amap");
        Reader::arity(l, 1, 1);
        AddressMap& am = out[l.toks[1].text];
        bool closed = false;
        while (!rd.done()) {
            const Line& al = rd.next();
            const std::string& d = al.toks[0].text;
            if (d == ".end") {
                closed = true;
                break;
            }
            if (d == "order") {
                Reader::arity(al, 0, 1);
                if (al.toks.size() == 2) am.order = int_list(al, al.toks[1]);
            } else if (d == "block") {
                Reader::arity(al, 2, 2);
                am.blockOf[static_cast<int>(Reader::integer(al, al.toks[1]))] =
                    static_cast<int>(Reader::integer(al, al.toks[2]));
            } else if (d == "start") {
                Reader::arity(al, 2, 2);
                am.start[static_cast<int>(Reader::integer(al, al.toks[1]))] =
                    static_cast<int>(Reader::integer(al, al.toks[2]));
            } else if (d == "aux") {
                Reader::arity(al, 3, 4);
                AddressMap::AuxPoint ap;
                const std::string& k = al.toks[2].text;
                if (k == "goto") ap.kind = AddressMap::Aux::Goto;
                else if (k == "moveresult") ap.kind = AddressMap::Aux::Moveresult;
                else if (k == "moveexception") ap.kind = AddressMap::Aux::Moveexception;
                else if (k == "return") ap.kind = AddressMap::Aux::Return;
                else Reader::fail(al, al.toks[2], "unknown helper kind '" + k + "'");
                ap.block = static_cast<int>(Reader::integer(al, al.toks[3]));
                if (al.toks.size() == 5)
                    for (int g : int_list(al, al.toks[4])) ap.gens.insert(g);
                am.aux[static_cast<int>(Reader::integer(al, al.toks[1]))] = ap;
            } else {
                Reader::arity(al, 2, 2);
                if (al.toks[1].text != "->") Reader::fail(al, al.toks[1], "expected '->'");
                const int i = static_cast<int>(Reader::integer(al, al.toks[0]));
                am.fwd[i] = int_list(al, al.toks[2]);
                for (int pp : am.fwd[i]) am.back[pp] = i;
            }
        }
        if (!closed) Reader::fail(l, "address map lacks .end");
    }
    return out;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace dexflow
