#include "dexflow/ni.hpp"

#include <random>
#include <sstream>
#include <stdexcept>

#include "dexflow/cdr.hpp"
#include "dexflow/dex_checker.hpp"
#include "dexflow/jvm_checker.hpp"

namespace dexflow {

bool injective(const Beta& beta)
{
    std::set<Loc> seen;
    for (const auto& [a, b] : beta)
        if (!seen.insert(b).second) return false;
    return true;
}

Beta invert(const Beta& beta)
{
    Beta out;
    for (const auto& [a, b] : beta) out[b] = a;
    return out;
}

bool value_indist(const Value& v1, const Value& v2, const Beta& beta)
{
    if (v1.is_null() || v2.is_null()) return v1.is_null() && v2.is_null();
    if (v1.is_int() || v2.is_int()) return v1.is_int() && v2.is_int() && v1.n == v2.n;
    auto it = beta.find(v1.loc);
    return it != beta.end() && it->second == v2.loc;
}

bool registers_indist(const Lattice& lat, const std::vector<Value>& rho1, const std::vector<Value>& rho2,
                      const Typing& rt1, const Typing& rt2, Level kobs, const Beta& beta,
                      const std::set<int>& locR)
{
    if (rho1.size() != rho2.size() || rt1.size() != rt2.size() || rt1.size() < rho1.size())
        throw std::invalid_argument("register universes differ");
    for (size_t x = 0; x < rho1.size(); ++x) {
        if (locR.count(static_cast<int>(x))) continue;
        Level k1 = rt1[x].outer(), k2 = rt2[x].outer();
        bool high = k1 == k2 && !lat.leq(k1, kobs);
        bool low = lat.leq(k1, kobs) && lat.leq(k2, kobs) && value_indist(rho1[x], rho2[x], beta);
        if (!high && !low) return false;
    }
    return true;
}

bool locals_indist(const Lattice& lat, const std::vector<Value>& rho1, const std::vector<Value>& rho2,
                   const std::vector<ExtLevel>& ka, Level kobs, const Beta& beta)
{
    if (rho1.size() != rho2.size()) throw std::invalid_argument("local variable domains differ");
    for (size_t x = 0; x < rho1.size(); ++x) {
        Level k = x < ka.size() ? ka[x].outer() : lat.bottom();
        if (lat.leq(k, kobs) && !value_indist(rho1[x], rho2[x], beta)) return false;
    }
    return true;
}

namespace {

std::string cell_str(const Cell& c)
{
    std::ostringstream os;
    if (const auto* o = std::get_if<Object>(&c)) {
        os << o->cls << "{";
        bool first = true;
        for (const auto& [f, v] : o->fields) {
            os << (first ? "" : ",") << f << "=" << v.str();
            first = false;
        }
        os << "}";
    } else {
        const auto& a = std::get<ArrayObj>(c);
        os << "[";
        for (size_t i = 0; i < a.elems.size(); ++i) os << (i ? "," : "") << a.elems[i].str();
        os << "]";
    }
    return os.str();
}

std::string heap_str(const Heap& h)
{
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (const auto& [l, c] : h.cells) {
        os << (first ? "" : " ") << "@" << l << "=" << cell_str(c);
        first = false;
    }
    os << "}";
    return os.str();
}

std::string values_str(const std::vector<Value>& vs)
{
    std::string s = "[";
    for (size_t i = 0; i < vs.size(); ++i) s += (i ? "," : "") + vs[i].str();
    return s + "]";
}

std::string outcome_str(const Outcome& o)
{
    switch (o.status) {
    case Outcome::Status::FuelExhausted: return "fuel exhausted";
    case Outcome::Status::Error: return "error: " + o.error;
    case Outcome::Status::Final: break;
    }
    return "tag=" + o.tag + " value=" + o.value.str() + " heap=" + heap_str(o.heap);
}

bool level_low(const Lattice& lat, Level k, Level kobs) { return lat.leq(k, kobs); }

// Contents are observable when either creation point is low, which keeps
// the relation symmetric for arrays from different creation points.
bool array_low(const Lattice& lat, const Policy& pol, const ArrayObj& a1, const ArrayObj& a2, Level kobs)
{
    return level_low(lat, pol.array_at(lat, a1.method, a1.creation).outer(), kobs) ||
           level_low(lat, pol.array_at(lat, a2.method, a2.creation).outer(), kobs);
}

// First difference between two related heaps, if any.
std::optional<std::string> heap_diff(const Lattice& lat, const Policy& pol, const Heap& h1, const Heap& h2,
                                     const Beta& beta, Level kobs)
{
    if (!injective(beta)) return "location map is not injective";
    for (const auto& [a, b] : beta) {
        std::string where = "@" + std::to_string(a) + "~@" + std::to_string(b);
        if (!h1.contains(a) || !h2.contains(b)) return where + ": location outside the heap";
        const Cell& c1 = h1.cells.at(a);
        const Cell& c2 = h2.cells.at(b);
        if (c1.index() != c2.index()) return where + ": object against array";
        if (const auto* o1 = std::get_if<Object>(&c1)) {
            const auto& o2 = std::get<Object>(c2);
            if (o1->cls != o2.cls) return where + ": classes " + o1->cls + " and " + o2.cls;
            for (const auto& [f, v1] : o1->fields) {
                if (!level_low(lat, pol.field(lat, f).outer(), kobs)) continue;
                auto it = o2.fields.find(f);
                if (it == o2.fields.end()) return where + ": field " + f + " missing";
                if (!value_indist(v1, it->second, beta))
                    return where + ": low field " + f + " is " + v1.str() + " against " + it->second.str();
            }
        } else {
            const auto& a1 = std::get<ArrayObj>(c1);
            const auto& a2 = std::get<ArrayObj>(c2);
            if (a1.elems.size() != a2.elems.size()) return where + ": array lengths differ";
            if (!array_low(lat, pol, a1, a2, kobs)) continue;
            for (size_t i = 0; i < a1.elems.size(); ++i)
                if (!value_indist(a1.elems[i], a2.elems[i], beta))
                    return where + ": low element " + std::to_string(i) + " is " + a1.elems[i].str() +
                           " against " + a2.elems[i].str();
        }
    }
    return std::nullopt;
}

Level result_level(const MethodPolicy& sgn, const Tag& tag)
{
    auto k = sgn.result(tag);
    if (!k) throw PolicyError("no result level for tag '" + tag + "'");
    return *k;
}

std::optional<std::string> output_diff(const Lattice& lat, const Policy& pol, const Outcome& o1,
                                       const Outcome& o2, const Beta& beta, Level kobs,
                                       const MethodPolicy& sgn)
{
    if (!o1.done() || !o2.done()) throw std::invalid_argument("outputs of unfinished runs");
    if (auto d = heap_diff(lat, pol, o1.heap, o2.heap, beta, kobs)) return "heaps: " + *d;
    bool n1 = o1.tag == kNorm, n2 = o2.tag == kNorm;
    if (n1 && n2) {
        if (lat.leq(result_level(sgn, kNorm), kobs) && !value_indist(o1.value, o2.value, beta))
            return "low results " + o1.value.str() + " and " + o2.value.str();
        return std::nullopt;
    }
    if (!n1 && !lat.leq(result_level(sgn, o1.tag), kobs)) return std::nullopt;
    if (!n2 && !lat.leq(result_level(sgn, o2.tag), kobs)) return std::nullopt;
    if (!n1 && !n2) {
        if (!value_indist(o1.value, o2.value, beta))
            return "low exceptions " + o1.value.str() + " and " + o2.value.str() + " are unrelated";
        return std::nullopt;
    }
    return "termination differs: " + o1.tag + " against " + o2.tag;
}

}  // namespace

bool heap_indist(const Lattice& lat, const Policy& pol, const Heap& h1, const Heap& h2, const Beta& beta,
                 Level kobs)
{
    return !heap_diff(lat, pol, h1, h2, beta, kobs);
}

bool output_indist(const Lattice& lat, const Policy& pol, const Outcome& o1, const Outcome& o2,
                   const Beta& beta, Level kobs, const MethodPolicy& sgn)
{
    return !output_diff(lat, pol, o1, o2, beta, kobs, sgn);
}

bool side_effect_preorder(const Lattice& lat, const Policy& pol, const Heap& h1, const Heap& h2, Level k)
{
    for (const auto& [l, c1] : h1.cells) {
        auto it = h2.cells.find(l);
        if (it == h2.cells.end() || it->second.index() != c1.index()) return false;
        const auto* o1 = std::get_if<Object>(&c1);
        if (!o1) continue;
        const auto& o2 = std::get<Object>(it->second);
        for (const auto& [f, v] : o1->fields) {
            if (lat.leq(k, pol.field(lat, f).outer())) continue;
            auto fv = o2.fields.find(f);
            if (fv == o2.fields.end() || !(fv->second == v)) return false;
        }
    }
    return true;
}

std::optional<Beta> extend_beta(const Lattice& lat, const Policy& pol, const Outcome& o1, const Outcome& o2,
                                const Beta& beta, Level kobs, const MethodPolicy& sgn)
{
    Beta out = beta;
    Beta inv = invert(beta);
    std::vector<std::pair<Loc, Loc>> work;
    bool conflict = false;

    auto force = [&](const Value& a, const Value& b) {
        if (!a.is_loc() || !b.is_loc()) return;
        auto fa = out.find(a.loc);
        auto fb = inv.find(b.loc);
        if (fa != out.end() || fb != inv.end()) {
            if (fa == out.end() || fa->second != b.loc) conflict = true;
            return;
        }
        out[a.loc] = b.loc;
        inv[b.loc] = a.loc;
        work.emplace_back(a.loc, b.loc);
    };

    bool n1 = o1.tag == kNorm, n2 = o2.tag == kNorm;
    if (n1 && n2 && lat.leq(result_level(sgn, kNorm), kobs)) force(o1.value, o2.value);
    if (!n1 && !n2 && lat.leq(result_level(sgn, o1.tag), kobs) && lat.leq(result_level(sgn, o2.tag), kobs))
        force(o1.value, o2.value);
    for (const auto& [a, b] : beta) work.emplace_back(a, b);

    while (!work.empty() && !conflict) {
        auto [a, b] = work.back();
        work.pop_back();
        auto c1 = o1.heap.cells.find(a);
        auto c2 = o2.heap.cells.find(b);
        if (c1 == o1.heap.cells.end() || c2 == o2.heap.cells.end()) return std::nullopt;
        if (c1->second.index() != c2->second.index()) continue;
        if (const auto* x = std::get_if<Object>(&c1->second)) {
            const auto& y = std::get<Object>(c2->second);
            if (x->cls != y.cls) continue;
            for (const auto& [f, v] : x->fields) {
                if (!lat.leq(pol.field(lat, f).outer(), kobs)) continue;
                if (auto it = y.fields.find(f); it != y.fields.end()) force(v, it->second);
            }
        } else {
            const auto& x1 = std::get<ArrayObj>(c1->second);
            const auto& y1 = std::get<ArrayObj>(c2->second);
            if (x1.elems.size() != y1.elems.size()) continue;
            if (!array_low(lat, pol, x1, y1, kobs)) continue;
            for (size_t i = 0; i < x1.elems.size(); ++i) force(x1.elems[i], y1.elems[i]);
        }
    }
    if (conflict) return std::nullopt;
    return out;
}

std::optional<Beta> extend_beta_by_order(const Lattice& lat, const Policy& pol, const Outcome& o1,
                                         const Outcome& o2, const Heap& in1, const Heap& in2,
                                         const Beta& beta, Level kobs, const MethodPolicy& sgn)
{
    std::vector<Loc> f1, f2;
    for (const auto& [l, c] : o1.heap.cells)
        if (!in1.contains(l)) f1.push_back(l);
    for (const auto& [l, c] : o2.heap.cells)
        if (!in2.contains(l)) f2.push_back(l);
    Beta seeded = beta;
    for (size_t i = 0; i < std::min(f1.size(), f2.size()); ++i) seeded[f1[i]] = f2[i];
    return extend_beta(lat, pol, o1, o2, seeded, kobs, sgn);
}

Policy policy_with_inputs(const Lattice& lat, const Policy& pol, const std::vector<ExtLevel>& ka)
{
    (void)lat;
    Policy out = pol;
    for (size_t x = 0; x < ka.size(); ++x)
        if (ka[x].is_array()) out.at[kInputArrays][static_cast<int>(x)] = ka[x].content();
    return out;
}

namespace {

class PairBuilder {
public:
    PairBuilder(const Lattice& lat, const Env& env, Level kobs, const GeneratorConfig& cfg,
                std::uint64_t seed, int trial)
        : lat_(lat), env_(env), kobs_(kobs), cfg_(cfg), fixed_(trial == 0)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(trial)};
        rng_.seed(seq);
    }

    InputPair build(const MethodShape& shape, const std::vector<ExtLevel>& ka)
    {
        InputPair p;
        p.a.locals.assign(static_cast<size_t>(shape.n_locals), Value::integer(0));
        p.b.locals = p.a.locals;
        for (int x = 0; x < shape.n_locals; ++x) {
            SlotKind kind;
            if (auto it = shape.kinds.find(x); it != shape.kinds.end()) kind = it->second;
            ExtLevel lvl = static_cast<size_t>(x) < ka.size() ? ka[x] : ExtLevel::simple(lat_.bottom());
            bool low = lat_.leq(lvl.outer(), kobs_);
            Value& va = p.a.locals[x];
            Value& vb = p.b.locals[x];
            switch (kind.kind) {
            case SlotKind::Kind::Int:
                if (low) {
                    va = vb = Value::integer(fixed_ ? 0 : rand_int());
                } else {
                    va = Value::integer(fixed_ ? 0 : rand_int());
                    vb = Value::integer(fixed_ ? 1 : rand_int());
                }
                break;
            case SlotKind::Kind::Ref:
                if (low) {
                    va = vb = shared_object(p, kind.cls);
                } else {
                    va = fixed_ ? Value::null() : high_ref(p.a.heap, p, kind.cls);
                    vb = fixed_ ? own_object(p.b.heap, kind.cls, 1) : high_ref(p.b.heap, p, kind.cls);
                }
                break;
            case SlotKind::Kind::Array: {
                bool content_low = !lvl.is_array() || lat_.leq(lvl.content().outer(), kobs_);
                if (low) {
                    va = vb = shared_array(p, kind.cls, x, content_low);
                } else {
                    va = fixed_ ? Value::null() : own_array(p.a.heap, kind.cls, x);
                    vb = fixed_ ? own_array(p.b.heap, kind.cls, x) : own_array(p.b.heap, kind.cls, x);
                }
                break;
            }
            }
        }
        return p;
    }

private:
    Int rand_int() { return Int(std::uniform_int_distribution<int>(cfg_.int_lo, cfg_.int_hi)(rng_)); }
    int rand_below(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
    bool full(const Heap& h) const { return static_cast<int>(h.cells.size()) >= cfg_.max_cells; }
    bool field_low(const std::string& f) const
    {
        return lat_.leq(env_.policy.field(lat_, f).outer(), kobs_);
    }

    Object fill(const std::string& cls, int fixed_value)
    {
        Object o = env_.classes.make_default(cls);
        for (auto& [f, v] : o.fields)
            if (v.is_int()) v = Value::integer(fixed_ ? fixed_value : rand_int());
        return o;
    }

    Value shared_object(InputPair& p, const std::string& cls)
    {
        if (full(p.a.heap) || full(p.b.heap)) return Value::null();
        Object oa = fill(cls, 0);
        Object ob = oa;
        for (auto& [f, v] : ob.fields)
            if (v.is_int() && !field_low(f)) v = Value::integer(fixed_ ? 1 : rand_int());
        Loc l = std::max(p.a.heap.next, p.b.heap.next);
        p.a.heap.put(l, std::move(oa));
        p.b.heap.put(l, std::move(ob));
        p.beta[l] = l;
        shared_.push_back({l, cls});
        return Value::location(l);
    }

    Value own_object(Heap& h, const std::string& cls, int fixed_value)
    {
        if (full(h)) return Value::null();
        return Value::location(h.alloc(fill(cls, fixed_value)));
    }

    Value high_ref(Heap& h, InputPair& p, const std::string& cls)
    {
        (void)p;
        std::vector<Loc> same;
        for (const auto& [l, c] : shared_)
            if (c == cls) same.push_back(l);
        int choice = rand_below(same.empty() ? 2 : 3);
        if (choice == 0) return Value::null();
        if (choice == 1) return own_object(h, cls, 0);
        return Value::location(same[rand_below(static_cast<int>(same.size()))]);
    }

    std::vector<Value> elements(const std::string& type, int len)
    {
        std::vector<Value> e;
        for (int i = 0; i < len; ++i)
            e.push_back(type == "ref" ? Value::null() : Value::integer(fixed_ ? 0 : rand_int()));
        return e;
    }

    Value shared_array(InputPair& p, const std::string& type, int slot, bool content_low)
    {
        if (full(p.a.heap) || full(p.b.heap)) return Value::null();
        int len = fixed_ ? 1 : rand_below(cfg_.max_array_len + 1);
        ArrayObj a{elements(type, len), kInputArrays, slot};
        ArrayObj b = a;
        if (!content_low && type != "ref")
            for (auto& v : b.elems) v = Value::integer(fixed_ ? 1 : rand_int());
        Loc l = std::max(p.a.heap.next, p.b.heap.next);
        p.a.heap.put(l, std::move(a));
        p.b.heap.put(l, std::move(b));
        p.beta[l] = l;
        return Value::location(l);
    }

    Value own_array(Heap& h, const std::string& type, int slot)
    {
        if (full(h) || (!fixed_ && rand_below(3) == 0)) return Value::null();
        int len = fixed_ ? 1 : rand_below(cfg_.max_array_len + 1);
        return Value::location(h.alloc(ArrayObj{elements(type, len), kInputArrays, slot}));
    }

    const Lattice& lat_;
    const Env& env_;
    Level kobs_;
    GeneratorConfig cfg_;
    bool fixed_;
    std::mt19937_64 rng_;
    std::vector<std::pair<Loc, std::string>> shared_;
};

}  // namespace

InputPair generate_pair(const Lattice& lat, const Env& env, const MethodShape& shape,
                        const std::vector<ExtLevel>& ka, Level kobs, const GeneratorConfig& cfg,
                        std::uint64_t seed, int trial)
{
    return PairBuilder(lat, env, kobs, cfg, seed, trial).build(shape, ka);
}

Runner jvm_runner(const JvmProgram& prog, const std::string& method, std::uint64_t fuel)
{
    return [&prog, method, fuel](const std::vector<Value>& locals, const Heap& h) {
        return run_jvm(prog, method, locals, h, fuel);
    };
}

Runner dex_runner(const DexProgram& prog, const std::string& method, std::uint64_t fuel)
{
    return [&prog, method, fuel](const std::vector<Value>& regs, const Heap& h) {
        return run_dex(prog, method, regs, h, fuel);
    };
}

MethodShape shape_of(const JvmMethod& m) { return {m.id, m.n_locals, m.kinds}; }
MethodShape shape_of(const DexMethod& m) { return {m.id, m.n_locals, m.kinds}; }

std::string NiReport::str(const Lattice& lat) const
{
    (void)lat;
    std::ostringstream os;
    os << "trials " << trials << "\ncompleted " << completed << "\nfuel_exhausted " << fuel_exhausted
       << "\nstuck " << stuck << "\n";
    if (witness) {
        const auto& w = *witness;
        os << "verdict interference\n"
           << "seed " << w.seed << "\ntrial " << w.trial << "\n"
           << "input1 locals=" << values_str(w.inputs.a.locals) << " heap=" << heap_str(w.inputs.a.heap) << "\n"
           << "input2 locals=" << values_str(w.inputs.b.locals) << " heap=" << heap_str(w.inputs.b.heap) << "\n"
           << "output1 " << outcome_str(w.out1) << "\n"
           << "output2 " << outcome_str(w.out2) << "\n"
           << "reason " << w.reason << "\n"
           << "Interference found at trial " << w.trial << ": " << w.reason << "\n";
    } else {
        os << "verdict none\n"
           << "No counterexample in " << trials << " trials (" << completed << " completed)\n";
    }
    return os.str();
}

NiReport ni_test(const Lattice& lat, const Env& env, const MethodShape& shape, const MethodPolicy& sgn,
                 const Runner& run, const NiConfig& cfg)
{
    Level kobs = cfg.kobs.value_or(env.policy.kobs);
    Policy pol = policy_with_inputs(lat, env.policy, sgn.ka);
    NiReport rep;
    for (int t = 0; t < cfg.trials; ++t) {
        InputPair p = generate_pair(lat, env, shape, sgn.ka, kobs, cfg.gen, cfg.seed, t);
        if (!locals_indist(lat, p.a.locals, p.b.locals, sgn.ka, kobs, p.beta) ||
            !heap_indist(lat, pol, p.a.heap, p.b.heap, p.beta, kobs))
            throw std::logic_error("generated inputs are not indistinguishable");
        Outcome o1 = run(p.a.locals, p.a.heap);
        Outcome o2 = run(p.b.locals, p.b.heap);
        ++rep.trials;
        using S = Outcome::Status;
        if (o1.status == S::FuelExhausted || o2.status == S::FuelExhausted) {
            ++rep.fuel_exhausted;
            continue;
        }
        if (o1.status == S::Error || o2.status == S::Error) {
            ++rep.stuck;
            continue;
        }
        ++rep.completed;
        std::optional<std::string> reason;
        auto beta = cfg.beta_search == NiConfig::BetaSearch::Forced
                        ? extend_beta(lat, pol, o1, o2, p.beta, kobs, sgn)
                        : extend_beta_by_order(lat, pol, o1, o2, p.a.heap, p.b.heap, p.beta, kobs, sgn);
        if (!beta)
            reason = "no location bijection relates the low parts of the outputs";
        else
            reason = output_diff(lat, pol, o1, o2, *beta, kobs, sgn);
        if (reason) {
            rep.witness = NiWitness{t, cfg.seed, std::move(p), std::move(o1), std::move(o2), *reason};
            break;
        }
    }
    return rep;
}

std::string SafetyReport::str() const
{
    std::ostringstream os;
    os << "trials " << trials << "\ncompleted " << completed << "\n";
    if (witness) {
        os << "verdict violation\nseed " << witness->seed << "\ntrial " << witness->trial << "\n"
           << "input locals=" << values_str(witness->inputs.a.locals)
           << " heap=" << heap_str(witness->inputs.a.heap) << "\n"
           << "output " << outcome_str(witness->out1) << "\n"
           << "reason " << witness->reason << "\n";
    } else {
        os << "verdict safe\n";
    }
    return os.str();
}

SafetyReport side_effect_safety_test(const Lattice& lat, const Env& env, const MethodShape& shape,
                                     const MethodPolicy& sgn, const Runner& run, const NiConfig& cfg)
{
    Level kobs = cfg.kobs.value_or(env.policy.kobs);
    SafetyReport rep;
    for (int t = 0; t < cfg.trials; ++t) {
        InputPair p = generate_pair(lat, env, shape, sgn.ka, kobs, cfg.gen, cfg.seed, t);
        Outcome o = run(p.a.locals, p.a.heap);
        ++rep.trials;
        if (!o.done()) continue;
        ++rep.completed;
        if (!side_effect_preorder(lat, env.policy, p.a.heap, o.heap, sgn.kh)) {
            std::string reason = "a field below " + lat.name(sgn.kh) + " changed";
            rep.witness = NiWitness{t, cfg.seed, std::move(p), std::move(o), Outcome{}, reason};
            break;
        }
    }
    return rep;
}

bool outcomes_agree(const Outcome& jvm, const Outcome& dex, std::string* why)
{
    auto fail = [&](std::string s) {
        if (why) *why = std::move(s);
        return false;
    };
    if (jvm.status != dex.status) return fail("statuses differ: " + outcome_str(jvm) + " / " + outcome_str(dex));
    if (!jvm.done()) return true;
    if (jvm.tag != dex.tag) return fail("tags differ: " + jvm.tag + " / " + dex.tag);
    if (!(jvm.value == dex.value)) return fail("values differ: " + jvm.value.str() + " / " + dex.value.str());
    if (jvm.heap.cells.size() != dex.heap.cells.size())
        return fail("heap sizes differ: " + heap_str(jvm.heap) + " / " + heap_str(dex.heap));
    for (const auto& [l, c] : jvm.heap.cells) {
        auto it = dex.heap.cells.find(l);
        if (it == dex.heap.cells.end() || it->second.index() != c.index())
            return fail("cell @" + std::to_string(l) + " differs");
        bool same = std::holds_alternative<Object>(c)
                        ? std::get<Object>(c) == std::get<Object>(it->second)
                        : std::get<ArrayObj>(c).elems == std::get<ArrayObj>(it->second).elems;
        if (!same) return fail("cell @" + std::to_string(l) + ": " + cell_str(c) + " / " + cell_str(it->second));
    }
    return true;
}

AgreementReport agreement_test(const JvmProgram& jprog, const DexProgram& dprog, const std::string& method,
                               const MethodPolicy& sgn, const NiConfig& cfg)
{
    const JvmMethod& jm = jprog.method(method);
    Level kobs = cfg.kobs.value_or(jprog.env.policy.kobs);
    // Each JVM instruction becomes a handful of DEX ones.
    Runner rj = jvm_runner(jprog, method, cfg.fuel);
    Runner rd = dex_runner(dprog, method, cfg.fuel * 8);
    AgreementReport rep;
    for (int t = 0; t < cfg.trials; ++t) {
        InputPair p = generate_pair(jprog.env.lat, jprog.env, shape_of(jm), sgn.ka, kobs, cfg.gen, cfg.seed, t);
        for (const Input* in : {&p.a, &p.b}) {
            Outcome oj = rj(in->locals, in->heap);
            Outcome od = rd(in->locals, in->heap);
            ++rep.trials;
            if (oj.status == Outcome::Status::FuelExhausted || od.status == Outcome::Status::FuelExhausted) {
                ++rep.inconclusive;
                continue;
            }
            ++rep.compared;
            std::string why;
            if (!outcomes_agree(oj, od, &why)) {
                rep.disagreement = "trial " + std::to_string(t) + " locals=" + values_str(in->locals) + ": " + why;
                return rep;
            }
        }
    }
    return rep;
}

std::vector<PreservationEntry> preservation_test(const JvmProgram& prog, const NiConfig& cfg)
{
    CompiledProgram cp = compile_program(prog);
    std::vector<PreservationEntry> out;
    for (const JvmMethod& m : prog.methods) {
        auto pols = prog.env.policy.gamma.entries.find(m.id);
        if (pols == prog.env.policy.gamma.entries.end()) continue;
        Cfg g = cfg_of(prog, m);
        Cdr cdr = compute_cdr(g);
        bool jsoap = check_soap(g, cdr).ok();
        const DexMethod& dm = cp.prog.method(m.id);
        const AddressMap& amap = cp.amaps.at(m.id);
        Cfg dg = cfg_of(cp.prog, dm);
        Cdr dcdr = compute_cdr(dg);
        for (const auto& [recv, sgn] : pols->second) {
            PreservationEntry e;
            e.method = m.id;
            e.receiver = recv;
            e.jvm_soap = jsoap;
            JvmInference inf = infer_certificate_jvm(prog, m, sgn, cdr);
            e.jvm_typable = inf.verdict.typable;
            if (e.jvm_typable) {
                try {
                    TranslatedCertificate tc =
                        translate_certificate(prog, m, sgn, inf.cert, cp.prog, dm, amap);
                    Verdict v = check_typable_dex(cp.prog, dm, sgn, tc.cert);
                    e.dex_typable = v.typable;
                    e.raised = tc.raised;
                    SoapReport sr = check_soap(dg, tc.cert.cdr);
                    e.dex_soap = sr.ok();
                    if (!v.typable && v.witness) e.detail = v.witness->str();
                    for (const auto& f : sr.failures) e.detail += (e.detail.empty() ? "" : "; ") + f;
                } catch (const std::exception& ex) {
                    e.detail = ex.what();
                }
            } else if (inf.verdict.witness) {
                e.detail = inf.verdict.witness->str();
            }
            e.dex_inferred = infer_certificate_dex(cp.prog, dm, sgn, dcdr).verdict.typable;
            e.agreement = agreement_test(prog, cp.prog, m.id, sgn, cfg);
            out.push_back(std::move(e));
        }
    }
    return out;
}

}  // namespace dexflow
