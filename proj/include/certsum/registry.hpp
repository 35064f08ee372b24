#pragma once

#include "certsum/expr.hpp"
#include "certsum/summand.hpp"

#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace certsum {

struct RegistryError : std::runtime_error {
    RegistryError(const std::string& where, const std::string& msg)
        : std::runtime_error("registry: " + where + ": " + msg) {}
};

enum class LimitKind { Infinity, Half, PM1, UpperHalf };

inline std::string sample_desc(const std::map<std::string, Rational>& s) {
    std::string out;
    for (auto& [n, v] : s) {
        if (!out.empty()) out += ",";
        out += n + "=" + v.get_str();
    }
    return out;
}
enum class RecordKind { Identity, Congruence };
enum class RecordClass { Conjecture, Baseline, Derived };

inline std::string limit_name(LimitKind k) {
    switch (k) {
        case LimitKind::Infinity: return "infinity";
        case LimitKind::Half: return "half";
        case LimitKind::PM1: return "pm1";
        case LimitKind::UpperHalf: return "upperhalf";
    }
    return "?";
}

// Conjunction of per-prime predicates: p > N; p % m == r; p != a; p nmid N.
struct PrimeFilter {
    long min_exclusive = 2;
    long mod_m = 0, mod_r = 0;
    std::vector<long> excluded;
    Int nmid = 1;

    bool admits(long p) const {
        if (p <= min_exclusive) return false;
        if (mod_m && p % mod_m != mod_r) return false;
        for (long e : excluded)
            if (p == e) return false;
        if (nmid != 1 && mpz_divisible_p(nmid.get_mpz_t(), Int(p).get_mpz_t())) return false;
        return true;
    }

    std::string str() const {
        std::ostringstream os;
        os << "p > " << min_exclusive;
        if (mod_m) os << "; p % " << mod_m << " == " << mod_r;
        for (long e : excluded) os << "; p != " << e;
        if (nmid != 1) os << "; p nmid " << nmid.get_str();
        return os.str();
    }

    static PrimeFilter parse(const std::string& text) {
        PrimeFilter f;
        std::string s;
        for (char c : text)
            if (!isspace(static_cast<unsigned char>(c))) s.push_back(c);
        size_t i = 0;
        auto number = [&](const char* what) -> Int {
            size_t j = i;
            if (j < s.size() && s[j] == '-') ++j;
            size_t k = j;
            while (k < s.size() && isdigit(static_cast<unsigned char>(s[k]))) ++k;
            if (k == j) throw RegistryError("filter", std::string("expected number after ") + what);
            Int v(s.substr(i, k - i).c_str(), 10);
            i = k;
            return v;
        };
        while (i < s.size()) {
            if (s[i] == ';') {
                ++i;
                continue;
            }
            if (s.compare(i, 2, "p>") == 0) {
                i += 2;
                f.min_exclusive = std::max(f.min_exclusive, *to_long(number("p>")));
            } else if (s.compare(i, 3, "p!=") == 0) {
                i += 3;
                f.excluded.push_back(*to_long(number("p!=")));
            } else if (s.compare(i, 2, "p%") == 0) {
                i += 2;
                long m = *to_long(number("p%"));
                if (s.compare(i, 2, "==") != 0) throw RegistryError("filter", "expected ==");
                i += 2;
                long r = *to_long(number("=="));
                f.mod_m = m;
                f.mod_r = r;
            } else if (s.compare(i, 5, "pnmid") == 0) {
                i += 5;
                Int n = number("nmid");
                if (n < 0) n = -n;
                f.nmid *= n;
            } else {
                throw RegistryError("filter", "cannot parse '" + text + "'");
            }
        }
        return f;
    }
};

// Named recurrence a_{n+1} = (sum_j c_j(n) a_{n-j}) / lead(n), with initial values.
struct RecurrenceSpec {
    std::string name;
    std::vector<Rational> init;
    ExprPtr lead;
    std::vector<ExprPtr> coeffs;

    Rational value(long n) const {
        std::lock_guard<std::mutex> lock(mu_);
        if (memo_.empty()) memo_ = init;
        while (static_cast<long>(memo_.size()) <= n) {
            long m = static_cast<long>(memo_.size()) - 1; // recurrence at n = m
            std::map<std::string, Rational> env{{"n", Rational(m)}};
            Rational acc(0);
            for (size_t j = 0; j < coeffs.size(); ++j) {
                long idx = m - static_cast<long>(j);
                if (idx < 0) throw std::domain_error("recurrence reaches before a_0");
                acc += eval_rational_ast(coeffs[j], env) * memo_[idx];
            }
            Rational l = eval_rational_ast(lead, env);
            if (l == 0) throw std::domain_error("recurrence leading coefficient vanished");
            memo_.push_back(acc / l);
        }
        return memo_[n];
    }

    static Rational eval_rational_ast(const ExprPtr& e, const std::map<std::string, Rational>& env) {
        using Op = Expr::Op;
        switch (e->op) {
            case Op::Num: return e->num;
            case Op::Var: {
                auto it = env.find(e->name);
                if (it == env.end()) throw std::domain_error("unbound variable " + e->name);
                return it->second;
            }
            case Op::Neg: return -eval_rational_ast(e->args[0], env);
            case Op::Add: return eval_rational_ast(e->args[0], env) + eval_rational_ast(e->args[1], env);
            case Op::Sub: return eval_rational_ast(e->args[0], env) - eval_rational_ast(e->args[1], env);
            case Op::Mul: return eval_rational_ast(e->args[0], env) * eval_rational_ast(e->args[1], env);
            case Op::Div: {
                Rational d = eval_rational_ast(e->args[1], env);
                if (d == 0) throw std::domain_error("division by zero");
                return eval_rational_ast(e->args[0], env) / d;
            }
            case Op::Pow: {
                Rational b = eval_rational_ast(e->args[0], env);
                Rational x = eval_rational_ast(e->args[1], env);
                auto n = as_integer(x);
                if (!n || !to_long(*n)) throw std::domain_error("non-integer exponent");
                return pow_rational(b, *to_long(*n));
            }
            case Op::Call: throw std::domain_error("function call in polynomial context");
        }
        throw std::logic_error("bad expr");
    }

  private:
    mutable std::mutex mu_;
    mutable std::vector<Rational> memo_;
};

struct ConjectureRecord {
    std::string id;
    RecordKind kind = RecordKind::Identity;
    RecordClass klass = RecordClass::Conjecture;
    std::string block;
    long start = 0;
    LimitKind limit = LimitKind::Infinity;
    std::string summand_text, rhs_text, lhs_factor_text;
    int modexp = 1;
    PrimeFilter filter;
    std::vector<std::map<std::string, Rational>> samples;
    bool exempt = false;
    int family = 0;
    std::string gc_params; // "a,b,m,c,d" for rational Ramanujan-type series
    std::string provenance, note;

    ExprPtr summand_ast, rhs_ast, lhs_factor_ast;

    bool parameterized() const { return !samples.empty(); }

    std::set<std::string> sample_vars() const {
        std::set<std::string> v;
        for (auto& s : samples)
            for (auto& [n, _] : s) v.insert(n);
        return v;
    }

    SummandExpr summand_for(const std::map<std::string, Rational>& sample) const {
        ExprPtr ast = sample.empty() ? summand_ast : substitute(summand_ast, sample);
        return normalize_summand(ast);
    }
};

class Registry {
  public:
    std::vector<ConjectureRecord> records;
    std::map<std::string, std::shared_ptr<RecurrenceSpec>> sequences;

    SeqResolver resolver() const {
        auto seqs = sequences; // shared_ptr copies
        return [seqs](const std::string& name, long n) -> Rational {
            auto it = seqs.find(name);
            if (it == seqs.end()) throw std::domain_error("unknown sequence " + name);
            return it->second->value(n);
        };
    }

    const ConjectureRecord* find(const std::string& id) const {
        for (auto& r : records)
            if (r.id == id) return &r;
        return nullptr;
    }

    // id match: exact, or prefix not followed by a digit (so C2.1 matches
    // C2.1i and C2.1c2 but not C2.10i)
    std::vector<const ConjectureRecord*> match(const std::string& query) const {
        std::vector<const ConjectureRecord*> out;
        for (auto& r : records) {
            if (r.id == query) return {&r};
        }
        for (auto& r : records) {
            if (r.id.size() > query.size() && r.id.compare(0, query.size(), query) == 0 &&
                !isdigit(static_cast<unsigned char>(r.id[query.size()])))
                out.push_back(&r);
        }
        return out;
    }

    static Registry load(const std::string& path);
    static Registry from_text(const std::string& text, const std::string& where = "<text>");

    void validate() const;
};

// ---- General-Conjecture template instantiation ----

struct GeneralParams {
    int family; // 1..4
    Int a, b, m;
    Rational c;
    Int d;
};

inline std::pair<ConjectureRecord, ConjectureRecord>
derive_general_conjecture(const GeneralParams& g, const std::string& tag) {
    if (g.family < 1 || g.family > 4) throw std::domain_error("family must be 1..4");
    if (g.a == 0 || g.m == 0) throw std::domain_error("need a*m != 0");
    if (g.c == 0) throw std::domain_error("need c != 0");
    if (g.d <= 0) throw std::domain_error("d must be a positive squarefree integer");
    Int dd = g.d;
    for (Int q(2); q * q <= dd; ++q)
        if (mpz_divisible_p(dd.get_mpz_t(), Int(q * q).get_mpz_t()))
            throw std::domain_error("d must be squarefree");

    static const char* kBinoms[] = {"C(2*k,k)^3", "C(2*k,k)^2*C(3*k,k)",
                                    "C(2*k,k)^2*C(4*k,2*k)", "C(2*k,k)*C(3*k,k)*C(6*k,3*k)"};
    auto lin = [&](const char* pre, const char* post) {
        return std::string(pre) + "(" + g.a.get_str() + "*k+(" + g.b.get_str() + "))" + post;
    };
    std::string hf;
    switch (g.family) {
        case 1: hf = "6*" + lin("", "*(H(2*k)-H(k))") + "+(" + g.a.get_str() + ")"; break;
        case 2: hf = lin("", "*(3*H(3*k)+2*H(2*k)-5*H(k))") + "+(" + g.a.get_str() + ")"; break;
        case 3: hf = "4*" + lin("", "*(H(4*k)-H(k))") + "+(" + g.a.get_str() + ")"; break;
        case 4: hf = "3*" + lin("", "*(2*H(6*k)-H(3*k)-H(k))") + "+(" + g.a.get_str() + ")"; break;
    }
    std::string summand =
        std::string(kBinoms[g.family - 1]) + "/(" + g.m.get_str() + ")^k*(" + hf + ")";

    Int mabs = g.m < 0 ? Int(-g.m) : g.m;
    std::string crat = "(" + g.c.get_str() + ")";

    ConjectureRecord ident;
    ident.id = "GEN" + std::to_string(g.family) + "-" + tag + "-I";
    ident.kind = RecordKind::Identity;
    ident.klass = RecordClass::Derived;
    ident.block = "general";
    ident.start = 0;
    ident.limit = LimitKind::Infinity;
    ident.summand_text = summand;
    ident.rhs_text = crat + "*sqrt(" + g.d.get_str() + ")/pi*log(" + mabs.get_str() + ")";
    ident.provenance = "derived from the log-series template, family " + std::to_string(g.family);
    ident.summand_ast = parse_expr(ident.summand_text);
    ident.rhs_ast = parse_expr(ident.rhs_text, {});

    ConjectureRecord cong;
    cong.id = "GEN" + std::to_string(g.family) + "-" + tag + "-C";
    cong.kind = RecordKind::Congruence;
    cong.klass = RecordClass::Derived;
    cong.block = "general";
    cong.start = 0;
    cong.limit = LimitKind::PM1;
    cong.modexp = 2;
    cong.summand_text = summand;
    cong.rhs_text = "kron(-(" + g.d.get_str() + "),p)*((" + g.a.get_str() + ")+(" +
                    g.b.get_str() + ")*((" + g.m.get_str() + ")^(p-1)-1))";
    cong.filter.min_exclusive = 2;
    cong.filter.nmid = g.d * mabs;
    cong.provenance = ident.provenance;
    cong.summand_ast = parse_expr(cong.summand_text);
    cong.rhs_ast = parse_expr(cong.rhs_text, {"p"});
    return {ident, cong};
}

inline GeneralParams parse_gc_params(const std::string& s, int family) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (!isspace(static_cast<unsigned char>(ch))) {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);
    if (parts.size() != 5) throw std::domain_error("gc expects a,b,m,c,d");
    auto as_rat = [](const std::string& t) -> Rational {
        auto slash = t.find('/');
        if (slash == std::string::npos) return Rational(Int(t.c_str(), 10));
        Rational r(Int(t.substr(0, slash).c_str(), 10), Int(t.substr(slash + 1).c_str(), 10));
        r.canonicalize();
        return r;
    };
    GeneralParams g;
    g.family = family;
    g.a = Int(parts[0].c_str(), 10);
    g.b = Int(parts[1].c_str(), 10);
    g.m = Int(parts[2].c_str(), 10);
    g.c = as_rat(parts[3]);
    g.d = Int(parts[4].c_str(), 10);
    return g;
}

// ---- loading ----

namespace detail_registry {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline Rational parse_rational_literal(const std::string& text, const std::string& where) {
    try {
        ExprPtr e = fold_constants(parse_expr(text, {}));
        if (e->op != Expr::Op::Num) throw std::domain_error("not a constant");
        return e->num;
    } catch (const std::exception& ex) {
        throw RegistryError(where, "bad rational '" + text + "': " + ex.what());
    }
}

} // namespace detail_registry

inline Registry Registry::from_text(const std::string& text, const std::string& where) {
    using detail_registry::trim;
    Registry reg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool have_schema = false;

    ConjectureRecord* rec = nullptr;
    std::shared_ptr<RecurrenceSpec> seq;

    auto flush_seq = [&]() {
        if (seq) {
            if (seq->init.empty() || !seq->lead || seq->coeffs.empty())
                throw RegistryError(where + ":" + seq->name, "incomplete sequence");
            reg.sequences[seq->name] = seq;
            seq.reset();
        }
    };

    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::string ctx = where + ":" + std::to_string(lineno);
        if (!have_schema) {
            if (s != "schema 1") throw RegistryError(ctx, "unsupported schema line '" + s + "'");
            have_schema = true;
            continue;
        }
        if (s.front() == '[') {
            if (s.back() != ']') throw RegistryError(ctx, "malformed section header");
            std::string head = trim(s.substr(1, s.size() - 2));
            flush_seq();
            rec = nullptr;
            if (head.rfind("record ", 0) == 0) {
                ConjectureRecord r;
                r.id = trim(head.substr(7));
                if (r.id.empty()) throw RegistryError(ctx, "record without id");
                reg.records.push_back(r);
                rec = &reg.records.back();
            } else if (head.rfind("sequence ", 0) == 0) {
                seq = std::make_shared<RecurrenceSpec>();
                seq->name = trim(head.substr(9));
            } else if (head.rfind("general ", 0) == 0) {
                // [general TAG] family = f, gc = a,b,m,c,d handled via keys below;
                // implemented as a record-pair expansion at end of section
                throw RegistryError(ctx, "use derived records instead of [general] sections");
            } else {
                throw RegistryError(ctx, "unknown section '" + head + "'");
            }
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos) throw RegistryError(ctx, "expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        if (seq) {
            if (key == "init") {
                std::istringstream vs(val);
                std::string tok;
                while (std::getline(vs, tok, ','))
                    seq->init.push_back(detail_registry::parse_rational_literal(trim(tok), ctx));
            } else if (key == "lead") {
                seq->lead = parse_expr(val, {"n"});
            } else if (key == "rec") {
                // comma-split at depth 0
                int depth = 0;
                std::string cur;
                for (char c : val) {
                    if (c == '(') ++depth;
                    if (c == ')') --depth;
                    if (c == ',' && depth == 0) {
                        seq->coeffs.push_back(parse_expr(trim(cur), {"n"}));
                        cur.clear();
                    } else {
                        cur.push_back(c);
                    }
                }
                if (!trim(cur).empty()) seq->coeffs.push_back(parse_expr(trim(cur), {"n"}));
            } else {
                throw RegistryError(ctx, "unknown sequence key '" + key + "'");
            }
            continue;
        }
        if (!rec) throw RegistryError(ctx, "key outside a section");
        if (key == "kind") {
            if (val == "identity") rec->kind = RecordKind::Identity;
            else if (val == "congruence") rec->kind = RecordKind::Congruence;
            else throw RegistryError(ctx, "kind must be identity|congruence");
        } else if (key == "class") {
            if (val == "conjecture") rec->klass = RecordClass::Conjecture;
            else if (val == "baseline") rec->klass = RecordClass::Baseline;
            else if (val == "derived") rec->klass = RecordClass::Derived;
            else throw RegistryError(ctx, "class must be conjecture|baseline|derived");
        } else if (key == "block") {
            rec->block = val;
        } else if (key == "start") {
            rec->start = std::stol(val);
        } else if (key == "limit") {
            if (val == "infinity") rec->limit = LimitKind::Infinity;
            else if (val == "half") rec->limit = LimitKind::Half;
            else if (val == "pm1") rec->limit = LimitKind::PM1;
            else if (val == "upperhalf") rec->limit = LimitKind::UpperHalf;
            else throw RegistryError(ctx, "limit must be infinity|half|pm1|upperhalf");
        } else if (key == "summand") {
            rec->summand_text = val;
        } else if (key == "rhs") {
            rec->rhs_text = val;
        } else if (key == "lhsfactor") {
            rec->lhs_factor_text = val;
        } else if (key == "modexp") {
            rec->modexp = std::stoi(val);
        } else if (key == "filter") {
            rec->filter = PrimeFilter::parse(val);
        } else if (key == "sample") {
            std::map<std::string, Rational> m;
            std::istringstream vs(val);
            std::string tok;
            while (std::getline(vs, tok, ',')) {
                auto colon = tok.find(':');
                if (colon == std::string::npos)
                    throw RegistryError(ctx, "sample entries look like name: value");
                std::string n = trim(tok.substr(0, colon));
                m[n] = detail_registry::parse_rational_literal(trim(tok.substr(colon + 1)), ctx);
            }
            rec->samples.push_back(std::move(m));
        } else if (key == "exempt") {
            rec->exempt = (val == "true" || val == "yes" || val == "1");
        } else if (key == "family") {
            rec->family = std::stoi(val);
        } else if (key == "gc") {
            rec->gc_params = val;
        } else if (key == "provenance") {
            rec->provenance = val;
        } else if (key == "note") {
            rec->note = val;
        } else {
            throw RegistryError(ctx, "unknown record key '" + key + "'");
        }
    }
    flush_seq();
    reg.validate();
    return reg;
}

inline Registry Registry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RegistryError(path, "cannot open registry file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), path);
}

inline void Registry::validate() const {
    std::set<std::string> ids;
    for (auto& r : records) {
        if (!ids.insert(r.id).second) throw RegistryError(r.id, "duplicate id");
        auto* mut = const_cast<ConjectureRecord*>(&r);
        std::set<std::string> vars = {"k"};
        for (auto& v : r.sample_vars()) vars.insert(v);
        try {
            mut->summand_ast = parse_expr(r.summand_text, vars);
        } catch (const std::exception& e) {
            throw RegistryError(r.id, std::string("summand: ") + e.what());
        }
        try {
            std::set<std::string> rhs_vars = r.sample_vars();
            if (r.kind == RecordKind::Congruence) rhs_vars.insert("p");
            mut->rhs_ast = parse_expr(r.rhs_text, rhs_vars);
        } catch (const std::exception& e) {
            throw RegistryError(r.id, std::string("rhs: ") + e.what());
        }
        if (!r.lhs_factor_text.empty()) {
            if (r.kind != RecordKind::Congruence)
                throw RegistryError(r.id, "lhsfactor only applies to congruences");
            mut->lhs_factor_ast = parse_expr(r.lhs_factor_text, {"p"});
        }
        if (r.kind == RecordKind::Identity && r.limit != LimitKind::Infinity)
            throw RegistryError(r.id, "identity records sum to infinity");
        if (r.kind == RecordKind::Congruence && r.limit == LimitKind::Infinity)
            throw RegistryError(r.id, "congruence records need a finite limit");
        if (r.kind == RecordKind::Congruence && r.modexp < 1)
            throw RegistryError(r.id, "modexp must be >= 1");
        // normalize each sample instance (or the bare summand) once
        auto check_instance = [&](const std::map<std::string, Rational>& sample) {
            SummandExpr s = r.summand_for(sample);
            for (auto& t : s.terms) {
                if (!t.seq.empty() && !sequences.count(t.seq))
                    throw RegistryError(r.id, "unknown sequence '" + t.seq + "'");
            }
            if (r.kind == RecordKind::Congruence && !s.is_rational_only())
                throw RegistryError(r.id, "congruence summands must be rational");
        };
        try {
            if (r.samples.empty()) check_instance({});
            else
                for (auto& s : r.samples) check_instance(s);
        } catch (const RegistryError&) {
            throw;
        } catch (const std::exception& e) {
            throw RegistryError(r.id, e.what());
        }
    }
}

} // namespace certsum
