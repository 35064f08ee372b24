#pragma once

#include "certsum/rational.hpp"

#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace certsum {

struct ParseError : std::runtime_error {
    size_t pos;
    ParseError(const std::string& msg, size_t at)
        : std::runtime_error(msg + " (at position " + std::to_string(at) + ")"), pos(at) {}
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Op { Num, Var, Add, Sub, Mul, Div, Neg, Pow, Call };
    Op op;
    Rational num;
    std::string name; // Var / Call
    std::vector<ExprPtr> args;

    static ExprPtr number(const Rational& q) {
        auto e = std::make_shared<Expr>();
        e->op = Op::Num;
        e->num = q;
        return e;
    }
    static ExprPtr var(const std::string& n) {
        auto e = std::make_shared<Expr>();
        e->op = Op::Var;
        e->name = n;
        return e;
    }
    static ExprPtr node(Op op, std::vector<ExprPtr> args) {
        auto e = std::make_shared<Expr>();
        e->op = op;
        e->args = std::move(args);
        return e;
    }
    static ExprPtr call(const std::string& n, std::vector<ExprPtr> args) {
        auto e = std::make_shared<Expr>();
        e->op = Op::Call;
        e->name = n;
        e->args = std::move(args);
        return e;
    }
};

// -------- lexer --------

namespace detail_expr {

struct Token {
    enum class Kind { Num, Ident, Op, End } kind;
    std::string text;
    Rational value;
    size_t pos;
};

inline std::vector<Token> lex(const std::string& s) {
    std::vector<Token> out;
    size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (isdigit(static_cast<unsigned char>(c))) {
            size_t j = i;
            while (j < s.size() && isdigit(static_cast<unsigned char>(s[j]))) ++j;
            Token t{Token::Kind::Num, s.substr(i, j - i), Rational(Int(s.substr(i, j - i).c_str(), 10)), i};
            out.push_back(t);
            i = j;
            continue;
        }
        if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < s.size() &&
                   (isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
            out.push_back({Token::Kind::Ident, s.substr(i, j - i), Rational(0), i});
            i = j;
            continue;
        }
        if (std::string("+-*/^(),").find(c) != std::string::npos) {
            out.push_back({Token::Kind::Op, std::string(1, c), Rational(0), i});
            ++i;
            continue;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
    out.push_back({Token::Kind::End, "", Rational(0), s.size()});
    return out;
}

// functions accepted in any context; arity checked by consumers
inline const std::set<std::string>& known_calls() {
    static const std::set<std::string> k = {
        "C", "H", "AltH", "q", "B", "E", "Bpoly", "Epoly", "kron", "seq",
        "zeta", "beta", "Gamma", "sqrt", "log", "root", "series"};
    return k;
}

inline const std::set<std::string>& known_consts() {
    static const std::set<std::string> k = {"pi", "G", "K", "L", "phi"};
    return k;
}

class Parser {
  public:
    Parser(const std::string& text, std::set<std::string> vars)
        : text_(text), vars_(std::move(vars)), toks_(lex(text)) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        if (cur().kind != Token::Kind::End) throw ParseError("trailing input", cur().pos);
        return e;
    }

  private:
    const Token& cur() const { return toks_[idx_]; }
    void advance() { ++idx_; }
    bool accept_op(const std::string& o) {
        if (cur().kind == Token::Kind::Op && cur().text == o) {
            advance();
            return true;
        }
        return false;
    }
    void expect_op(const std::string& o) {
        if (!accept_op(o)) throw ParseError("expected '" + o + "'", cur().pos);
    }

    ExprPtr expr() {
        bool neg = false;
        if (accept_op("-")) neg = true;
        else accept_op("+");
        ExprPtr t = term();
        if (neg) t = Expr::node(Expr::Op::Neg, {t});
        for (;;) {
            if (accept_op("+")) t = Expr::node(Expr::Op::Add, {t, term()});
            else if (accept_op("-")) t = Expr::node(Expr::Op::Sub, {t, term()});
            else return t;
        }
    }

    ExprPtr term() {
        ExprPtr f = factor();
        for (;;) {
            if (accept_op("*")) f = Expr::node(Expr::Op::Mul, {f, factor()});
            else if (accept_op("/")) f = Expr::node(Expr::Op::Div, {f, factor()});
            else return f;
        }
    }

    ExprPtr factor() {
        if (accept_op("-")) return Expr::node(Expr::Op::Neg, {factor()});
        ExprPtr base = primary();
        if (accept_op("^")) {
            ExprPtr e;
            if (cur().kind == Token::Kind::Num) {
                e = Expr::number(cur().value);
                advance();
            } else if (accept_op("-")) {
                if (cur().kind != Token::Kind::Num)
                    throw ParseError("expected integer exponent", cur().pos);
                e = Expr::number(-cur().value);
                advance();
            } else if (accept_op("(")) {
                e = expr();
                expect_op(")");
            } else if (cur().kind == Token::Kind::Ident) {
                e = primary_ident();
            } else {
                throw ParseError("expected exponent", cur().pos);
            }
            return Expr::node(Expr::Op::Pow, {base, e});
        }
        return base;
    }

    ExprPtr primary() {
        const Token& t = cur();
        if (t.kind == Token::Kind::Num) {
            advance();
            ExprPtr n = Expr::number(t.value);
            // implicit multiplication: only number-then-identifier, as in 2k
            if (cur().kind == Token::Kind::Ident) {
                ExprPtr rhs = primary_ident();
                return Expr::node(Expr::Op::Mul, {n, rhs});
            }
            return n;
        }
        if (t.kind == Token::Kind::Ident) return primary_ident();
        if (accept_op("(")) {
            ExprPtr e = expr();
            expect_op(")");
            return e;
        }
        throw ParseError("expected value", t.pos);
    }

    ExprPtr primary_ident() {
        const Token t = cur();
        advance();
        if (cur().kind == Token::Kind::Op && cur().text == "(") {
            if (!known_calls().count(t.text))
                throw ParseError("unknown function '" + t.text + "'", t.pos);
            advance();
            // an embedded series body is a summand: k becomes visible
            bool added_k = false;
            if (t.text == "series" && !vars_.count("k")) {
                vars_.insert("k");
                added_k = true;
            }
            std::vector<ExprPtr> args;
            if (!(cur().kind == Token::Kind::Op && cur().text == ")")) {
                args.push_back(t.text == "seq" ? name_arg() : expr());
                while (accept_op(",")) args.push_back(expr());
            }
            expect_op(")");
            if (added_k) vars_.erase("k");
            return Expr::call(t.text, std::move(args));
        }
        if (known_consts().count(t.text)) return Expr::call(t.text, {});
        if (vars_.count(t.text)) return Expr::var(t.text);
        throw ParseError("unknown identifier '" + t.text + "'", t.pos);
    }

    ExprPtr name_arg() {
        if (cur().kind != Token::Kind::Ident)
            throw ParseError("expected sequence name", cur().pos);
        ExprPtr v = Expr::var(cur().text);
        advance();
        return v;
    }

    std::string text_;
    std::set<std::string> vars_;
    std::vector<Token> toks_;
    size_t idx_ = 0;
};

} // namespace detail_expr

inline ExprPtr parse_expr(const std::string& text, std::set<std::string> vars = {"k"}) {
    return detail_expr::Parser(text, std::move(vars)).parse();
}

// -------- substitution & folding --------

inline ExprPtr substitute(const ExprPtr& e, const std::map<std::string, Rational>& env) {
    switch (e->op) {
        case Expr::Op::Num: return e;
        case Expr::Op::Var: {
            auto it = env.find(e->name);
            return it == env.end() ? e : Expr::number(it->second);
        }
        default: {
            if (e->op == Expr::Op::Call && e->name == "seq") return e;
            std::vector<ExprPtr> args;
            args.reserve(e->args.size());
            bool changed = false;
            for (auto& a : e->args) {
                args.push_back(substitute(a, env));
                changed = changed || args.back() != a;
            }
            if (!changed) return e;
            if (e->op == Expr::Op::Call) return Expr::call(e->name, std::move(args));
            return Expr::node(e->op, std::move(args));
        }
    }
}

// Fold rational-constant subtrees. Pow folds only for integer exponents.
inline ExprPtr fold_constants(const ExprPtr& e) {
    auto num_of = [](const ExprPtr& x) -> const Rational* {
        return x->op == Expr::Op::Num ? &x->num : nullptr;
    };
    switch (e->op) {
        case Expr::Op::Num:
        case Expr::Op::Var: return e;
        case Expr::Op::Call: {
            if (e->name == "seq") return e;
            std::vector<ExprPtr> args;
            for (auto& a : e->args) args.push_back(fold_constants(a));
            return Expr::call(e->name, std::move(args));
        }
        default: break;
    }
    std::vector<ExprPtr> args;
    for (auto& a : e->args) args.push_back(fold_constants(a));
    if (e->op == Expr::Op::Neg) {
        if (auto* q = num_of(args[0])) return Expr::number(-*q);
        return Expr::node(e->op, std::move(args));
    }
    if (args.size() == 2) {
        auto *a = num_of(args[0]), *b = num_of(args[1]);
        if (a && b) {
            switch (e->op) {
                case Expr::Op::Add: return Expr::number(*a + *b);
                case Expr::Op::Sub: return Expr::number(*a - *b);
                case Expr::Op::Mul: return Expr::number(*a * *b);
                case Expr::Op::Div:
                    if (*b == 0) throw std::domain_error("division by zero constant");
                    return Expr::number(*a / *b);
                case Expr::Op::Pow: {
                    auto n = as_integer(*b);
                    if (n && (*a != 0 || *n >= 0)) {
                        auto e2 = to_long(*n);
                        if (e2) return Expr::number(pow_rational(*a, *e2));
                    }
                    break;
                }
                default: break;
            }
        }
    }
    return Expr::node(e->op, std::move(args));
}

// -------- printer --------

namespace detail_expr {

inline int precedence(Expr::Op op) {
    switch (op) {
        case Expr::Op::Add:
        case Expr::Op::Sub: return 1;
        case Expr::Op::Neg: return 2;
        case Expr::Op::Mul:
        case Expr::Op::Div: return 3;
        case Expr::Op::Pow: return 4;
        default: return 5;
    }
}

inline void print_rec(std::ostream& os, const ExprPtr& e, int parent_prec, bool right) {
    int prec = precedence(e->op);
    bool need = prec < parent_prec || (prec == parent_prec && right);
    if (e->op == Expr::Op::Num && e->num < 0) need = parent_prec > 1;
    if (e->op == Expr::Op::Num && e->num.get_den() != 1 && parent_prec >= 3) need = true;
    switch (e->op) {
        case Expr::Op::Num:
            if (need) os << "(";
            os << e->num.get_str();
            if (need) os << ")";
            return;
        case Expr::Op::Var:
            os << e->name;
            return;
        case Expr::Op::Call: {
            os << e->name;
            if (!e->args.empty() || e->name == "pi" || e->name == "G" || e->name == "K" ||
                e->name == "L" || e->name == "phi") {
                if (e->args.empty()) return; // nullary constants print bare
            }
            os << "(";
            for (size_t i = 0; i < e->args.size(); ++i) {
                if (i) os << ",";
                print_rec(os, e->args[i], 0, false);
            }
            os << ")";
            return;
        }
        case Expr::Op::Neg:
            // unary minus binds like a factor prefix; parenthesize under any parent
            need = parent_prec > 0;
            if (need) os << "(";
            os << "-";
            print_rec(os, e->args[0], prec, true);
            if (need) os << ")";
            return;
        default: break;
    }
    const char* sym = e->op == Expr::Op::Add   ? "+"
                      : e->op == Expr::Op::Sub ? "-"
                      : e->op == Expr::Op::Mul ? "*"
                      : e->op == Expr::Op::Div ? "/"
                                               : "^";
    if (need) os << "(";
    if (e->op == Expr::Op::Pow) {
        // base and exponent both need to re-parse as single factors
        print_rec(os, e->args[0], 5, false);
        os << sym;
        print_rec(os, e->args[1], 5, true);
    } else {
        print_rec(os, e->args[0], prec, false);
        os << sym;
        print_rec(os, e->args[1], prec, true);
    }
    if (need) os << ")";
}

} // namespace detail_expr

inline std::string print_expr(const ExprPtr& e) {
    std::ostringstream os;
    detail_expr::print_rec(os, e, 0, false);
    return os.str();
}

// Structural equality.
inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (a->op != b->op || a->name != b->name || a->args.size() != b->args.size()) return false;
    if (a->op == Expr::Op::Num && a->num != b->num) return false;
    for (size_t i = 0; i < a->args.size(); ++i)
        if (!expr_equal(a->args[i], b->args[i])) return false;
    return true;
}

} // namespace certsum
