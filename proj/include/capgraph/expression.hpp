#pragma once
/**
 * @file expression.hpp
 * @brief A small arithmetic expression language over (x1, x2, s, r).
 *
 * Grammar (whitespace insensitive):
 *
 *     expr    := term (('+' | '-') term)*
 *     term    := unary (('*' | '/') unary)*
 *     unary   := '-' unary | power
 *     power   := primary ('^' power)?
 *     primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
 *
 * '^' binds tighter than unary minus and is right-associative, so "-x^2" is
 * "-(x^2)". A negative exponent needs parentheses: "cosh(r)^(-2)".
 *
 * Variables are x1, x2, s and r = |x| in the chart; pi is a constant.
 * Functions: sin cos exp log sqrt cosh sinh tanh abs (unary), min max (binary).
 */
#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "capgraph/error.hpp"

namespace capgraph {

enum class Variable { x1, x2, s };

/// Point at which an expression is evaluated. r is derived from x1, x2.
struct EvalPoint {
    double x1 = 0.0;
    double x2 = 0.0;
    double s = 0.0;
};

namespace expr_detail {

enum class Kind {
    constant,
    var_x1,
    var_x2,
    var_s,
    var_r,
    radial_unit,  // x_i / r, defined as 0 at the origin
    neg,
    add,
    sub,
    mul,
    div,
    pow,
    sin,
    cos,
    exp,
    log,
    sqrt,
    cosh,
    sinh,
    tanh,
    abs,
    min,
    max,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Kind kind = Kind::constant;
    double value = 0.0;    // constant
    int index = 0;         // radial_unit component
    std::size_t offset = 0;
    NodePtr a;
    NodePtr b;
};

inline NodePtr make_const(double v, std::size_t off = 0) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::constant;
    n->value = v;
    n->offset = off;
    return n;
}

inline NodePtr make_node(Kind k, NodePtr a, NodePtr b = nullptr, std::size_t off = 0) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    n->offset = off;
    return n;
}

inline NodePtr make_leaf(Kind k, std::size_t off = 0, int index = 0) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->offset = off;
    n->index = index;
    return n;
}

inline bool is_const(const NodePtr& n, double v) { return n->kind == Kind::constant && n->value == v; }
inline bool is_const(const NodePtr& n) { return n->kind == Kind::constant; }

// Builders with light constant folding; used by the differentiator.
inline NodePtr add(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return make_const(a->value + b->value, a->offset);
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    return make_node(Kind::add, a, b, a->offset);
}

inline NodePtr neg(NodePtr a) {
    if (is_const(a)) return make_const(-a->value, a->offset);
    if (a->kind == Kind::neg) return a->a;
    return make_node(Kind::neg, a, nullptr, a->offset);
}

inline NodePtr sub(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return make_const(a->value - b->value, a->offset);
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return neg(b);
    return make_node(Kind::sub, a, b, a->offset);
}

inline NodePtr mul(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return make_const(a->value * b->value, a->offset);
    if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0, a->offset);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    if (is_const(b)) std::swap(a, b);  // constants first: 2*exp(s)
    if (is_const(a) && b->kind == Kind::mul && is_const(b->a))
        return mul(make_const(a->value * b->a->value, a->offset), b->b);
    return make_node(Kind::mul, a, b, a->offset);
}

inline NodePtr div(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b) && b->value != 0.0) return make_const(a->value / b->value, a->offset);
    if (is_const(a, 0.0)) return a;
    if (is_const(b, 1.0)) return a;
    return make_node(Kind::div, a, b, a->offset);
}

inline NodePtr pow(NodePtr a, NodePtr b) {
    if (is_const(b, 0.0)) return make_const(1.0, a->offset);
    if (is_const(b, 1.0)) return a;
    if (is_const(a) && is_const(b)) return make_const(std::pow(a->value, b->value), a->offset);
    return make_node(Kind::pow, a, b, a->offset);
}

inline NodePtr func(Kind k, NodePtr a) { return make_node(k, a, nullptr, a->offset); }

inline bool depends_on(const NodePtr& n, Variable v) {
    switch (n->kind) {
        case Kind::constant: return false;
        case Kind::var_x1: return v == Variable::x1;
        case Kind::var_x2: return v == Variable::x2;
        case Kind::var_s: return v == Variable::s;
        case Kind::var_r:
        case Kind::radial_unit: return v != Variable::s;
        default: break;
    }
    return (n->a && depends_on(n->a, v)) || (n->b && depends_on(n->b, v));
}

[[noreturn]] inline void domain_error(const char* what, const Node& n) {
    throw EvalError(std::string(what) + " (expression offset " + std::to_string(n.offset) + ")");
}

inline double eval(const Node& n, const EvalPoint& p) {
    switch (n.kind) {
        case Kind::constant: return n.value;
        case Kind::var_x1: return p.x1;
        case Kind::var_x2: return p.x2;
        case Kind::var_s: return p.s;
        case Kind::var_r: return std::hypot(p.x1, p.x2);
        case Kind::radial_unit: {
            const double r = std::hypot(p.x1, p.x2);
            if (r == 0.0) return 0.0;
            return (n.index == 0 ? p.x1 : p.x2) / r;
        }
        case Kind::neg: return -eval(*n.a, p);
        case Kind::add: return eval(*n.a, p) + eval(*n.b, p);
        case Kind::sub: return eval(*n.a, p) - eval(*n.b, p);
        case Kind::mul: return eval(*n.a, p) * eval(*n.b, p);
        case Kind::div: {
            const double d = eval(*n.b, p);
            if (d == 0.0) domain_error("division by zero", n);
            return eval(*n.a, p) / d;
        }
        case Kind::pow: {
            const double base = eval(*n.a, p);
            const double e = eval(*n.b, p);
            if (base < 0.0 && e != std::floor(e)) domain_error("non-integer power of negative base", n);
            if (base == 0.0 && e < 0.0) domain_error("negative power of zero", n);
            return std::pow(base, e);
        }
        case Kind::sin: return std::sin(eval(*n.a, p));
        case Kind::cos: return std::cos(eval(*n.a, p));
        case Kind::exp: return std::exp(eval(*n.a, p));
        case Kind::log: {
            const double v = eval(*n.a, p);
            if (!(v > 0.0)) domain_error("log of nonpositive argument", n);
            return std::log(v);
        }
        case Kind::sqrt: {
            const double v = eval(*n.a, p);
            if (v < 0.0) domain_error("sqrt of negative argument", n);
            return std::sqrt(v);
        }
        case Kind::cosh: return std::cosh(eval(*n.a, p));
        case Kind::sinh: return std::sinh(eval(*n.a, p));
        case Kind::tanh: return std::tanh(eval(*n.a, p));
        case Kind::abs: return std::fabs(eval(*n.a, p));
        case Kind::min: return std::min(eval(*n.a, p), eval(*n.b, p));
        case Kind::max: return std::max(eval(*n.a, p), eval(*n.b, p));
    }
    return 0.0;
}

inline NodePtr derivative(const NodePtr& n, Variable v) {
    if (!depends_on(n, v)) return make_const(0.0, n->offset);
    const auto& a = n->a;
    const auto& b = n->b;
    switch (n->kind) {
        case Kind::var_x1:
        case Kind::var_x2:
        case Kind::var_s: return make_const(1.0, n->offset);
        case Kind::var_r:
            return make_leaf(Kind::radial_unit, n->offset, v == Variable::x1 ? 0 : 1);
        case Kind::radial_unit: {
            // d(x_i/r)/dx_j = (delta_ij - e_i e_j) / r
            const int j = v == Variable::x1 ? 0 : 1;
            auto ei = make_leaf(Kind::radial_unit, n->offset, n->index);
            auto ej = make_leaf(Kind::radial_unit, n->offset, j);
            auto r = make_leaf(Kind::var_r, n->offset);
            return div(sub(make_const(n->index == j ? 1.0 : 0.0), mul(ei, ej)), r);
        }
        case Kind::neg: return neg(derivative(a, v));
        case Kind::add: return add(derivative(a, v), derivative(b, v));
        case Kind::sub: return sub(derivative(a, v), derivative(b, v));
        case Kind::mul: return add(mul(derivative(a, v), b), mul(a, derivative(b, v)));
        case Kind::div:
            return div(sub(mul(derivative(a, v), b), mul(a, derivative(b, v))), mul(b, b));
        case Kind::pow: {
            if (!depends_on(b, v)) {
                // r^k with integer k >= 2 differentiates to k r^(k-2) x_i, which
                // stays finite at the origin.
                if (a->kind == Kind::var_r && is_const(b) && b->value >= 2.0 &&
                    b->value == std::floor(b->value)) {
                    auto xi = make_leaf(v == Variable::x1 ? Kind::var_x1 : Kind::var_x2, n->offset);
                    return mul(mul(make_const(b->value), pow(a, make_const(b->value - 2.0))), xi);
                }
                return mul(mul(b, pow(a, sub(b, make_const(1.0)))), derivative(a, v));
            }
            // a^b (b' log a + b a'/a)
            auto term = add(mul(derivative(b, v), func(Kind::log, a)),
                            div(mul(b, derivative(a, v)), a));
            return mul(n, term);
        }
        case Kind::sin: return mul(func(Kind::cos, a), derivative(a, v));
        case Kind::cos: return neg(mul(func(Kind::sin, a), derivative(a, v)));
        case Kind::exp: return mul(n, derivative(a, v));
        case Kind::log: return div(derivative(a, v), a);
        case Kind::sqrt: return div(derivative(a, v), mul(make_const(2.0), n));
        case Kind::cosh: return mul(func(Kind::sinh, a), derivative(a, v));
        case Kind::sinh: return mul(func(Kind::cosh, a), derivative(a, v));
        case Kind::tanh: {
            auto c = func(Kind::cosh, a);
            return div(derivative(a, v), mul(c, c));
        }
        case Kind::abs:
        case Kind::min:
        case Kind::max:
            throw UnsupportedDerivative("abs/min/max is not differentiable in its argument (expression offset " +
                                        std::to_string(n->offset) + ")");
        default: break;
    }
    return make_const(0.0, n->offset);
}

inline std::string format_number(double v) {
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline int precedence(const Node& n) {
    switch (n.kind) {
        case Kind::add:
        case Kind::sub: return 1;
        case Kind::mul:
        case Kind::div: return 2;
        case Kind::neg: return 3;
        case Kind::pow: return 4;
        case Kind::constant: return n.value < 0.0 ? 3 : 5;
        default: return 5;
    }
}

inline const char* func_name(Kind k) {
    switch (k) {
        case Kind::sin: return "sin";
        case Kind::cos: return "cos";
        case Kind::exp: return "exp";
        case Kind::log: return "log";
        case Kind::sqrt: return "sqrt";
        case Kind::cosh: return "cosh";
        case Kind::sinh: return "sinh";
        case Kind::tanh: return "tanh";
        case Kind::abs: return "abs";
        case Kind::min: return "min";
        case Kind::max: return "max";
        default: return "?";
    }
}

inline std::string to_string(const Node& n) {
    auto wrap = [](const Node& child, int min_prec) {
        std::string s = to_string(child);
        return precedence(child) < min_prec ? "(" + s + ")" : s;
    };
    switch (n.kind) {
        case Kind::constant: return format_number(n.value);
        case Kind::var_x1: return "x1";
        case Kind::var_x2: return "x2";
        case Kind::var_s: return "s";
        case Kind::var_r: return "r";
        case Kind::radial_unit: return n.index == 0 ? "(x1/r)" : "(x2/r)";
        case Kind::neg: return "-" + wrap(*n.a, 3);
        case Kind::add: return wrap(*n.a, 1) + " + " + wrap(*n.b, 1);
        case Kind::sub: return wrap(*n.a, 1) + " - " + wrap(*n.b, 2);
        case Kind::mul: return wrap(*n.a, 2) + "*" + wrap(*n.b, 3);
        case Kind::div: return wrap(*n.a, 2) + "/" + wrap(*n.b, 3);
        case Kind::pow: return wrap(*n.a, 5) + "^" + wrap(*n.b, 5);
        case Kind::min:
        case Kind::max: return std::string(func_name(n.kind)) + "(" + to_string(*n.a) + ", " + to_string(*n.b) + ")";
        default: return std::string(func_name(n.kind)) + "(" + to_string(*n.a) + ")";
    }
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr parse() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        auto n = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("expected operator or end of input", pos_);
        return n;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
    }

    NodePtr parse_expr() {
        auto lhs = parse_term();
        for (;;) {
            skip_ws();
            const std::size_t at = pos_;
            if (accept('+')) lhs = make_node(Kind::add, lhs, parse_term(), at);
            else if (accept('-')) lhs = make_node(Kind::sub, lhs, parse_term(), at);
            else return lhs;
        }
    }

    NodePtr parse_term() {
        auto lhs = parse_unary();
        for (;;) {
            skip_ws();
            const std::size_t at = pos_;
            if (accept('*')) lhs = make_node(Kind::mul, lhs, parse_unary(), at);
            else if (accept('/')) lhs = make_node(Kind::div, lhs, parse_unary(), at);
            else return lhs;
        }
    }

    NodePtr parse_unary() {
        skip_ws();
        const std::size_t at = pos_;
        if (accept('-')) return make_node(Kind::neg, parse_unary(), nullptr, at);
        return parse_power();
    }

    NodePtr parse_power() {
        auto base = parse_primary();
        skip_ws();
        const std::size_t at = pos_;
        if (accept('^')) {
            skip_ws();
            if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+'))
                throw ParseError("signed exponent must be parenthesized", pos_);
            return make_node(Kind::pow, base, parse_power(), at);
        }
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        const std::size_t at = pos_;
        if (pos_ >= text_.size()) throw ParseError("expected number, identifier or '('", pos_);
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto n = parse_expr();
            expect(')');
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = pos_;
            while (end < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_'))
                ++end;
            const std::string ident(text_.substr(pos_, end - pos_));
            pos_ = end;
            return parse_identifier(ident, at);
        }
        throw ParseError("expected number, identifier or '('", pos_);
    }

    NodePtr parse_number() {
        const std::size_t at = pos_;
        std::size_t end = pos_;
        auto digits = [&] {
            while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
        };
        digits();
        if (end < text_.size() && text_[end] == '.') {
            ++end;
            digits();
        }
        if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
            std::size_t save = end;
            ++end;
            if (end < text_.size() && (text_[end] == '+' || text_[end] == '-')) ++end;
            if (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) digits();
            else end = save;
        }
        const std::string token(text_.substr(pos_, end - pos_));
        if (token == ".") throw ParseError("malformed number", at);
        pos_ = end;
        return make_const(std::strtod(token.c_str(), nullptr), at);
    }

    NodePtr parse_identifier(const std::string& id, std::size_t at) {
        if (id == "x1") return make_leaf(Kind::var_x1, at);
        if (id == "x2") return make_leaf(Kind::var_x2, at);
        if (id == "s") return make_leaf(Kind::var_s, at);
        if (id == "r") return make_leaf(Kind::var_r, at);
        if (id == "pi") return make_const(3.14159265358979323846, at);

        static const std::array<std::pair<const char*, Kind>, 11> funcs{{
            {"sin", Kind::sin},   {"cos", Kind::cos},   {"exp", Kind::exp},   {"log", Kind::log},
            {"sqrt", Kind::sqrt}, {"cosh", Kind::cosh}, {"sinh", Kind::sinh}, {"tanh", Kind::tanh},
            {"abs", Kind::abs},   {"min", Kind::min},   {"max", Kind::max},
        }};
        for (const auto& [name, kind] : funcs) {
            if (id != name) continue;
            const int arity = (kind == Kind::min || kind == Kind::max) ? 2 : 1;
            if (!accept('(')) throw ParseError("expected '(' after function " + id, pos_);
            std::vector<NodePtr> args{parse_expr()};
            while (accept(',')) args.push_back(parse_expr());
            expect(')');
            if (static_cast<int>(args.size()) != arity)
                throw ParseError("function " + id + " takes " + std::to_string(arity) + " argument(s), got " +
                                     std::to_string(args.size()),
                                 at);
            return make_node(kind, args[0], arity == 2 ? args[1] : nullptr, at);
        }
        throw ParseError("unknown identifier '" + id + "'", at);
    }
};

}  // namespace expr_detail

/**
 * @brief Immutable expression tree. Copies share the tree; evaluation is
 * reentrant.
 */
class Expression {
public:
    Expression() : root_(expr_detail::make_const(0.0)) {}
    explicit Expression(double constant) : root_(expr_detail::make_const(constant)) {}

    static Expression parse(std::string_view text) {
        Expression e;
        e.root_ = expr_detail::Parser(text).parse();
        return e;
    }

    double operator()(const EvalPoint& p) const { return expr_detail::eval(*root_, p); }
    double operator()(double x1, double x2, double s = 0.0) const { return (*this)(EvalPoint{x1, x2, s}); }

    bool depends_on(Variable v) const { return expr_detail::depends_on(root_, v); }
    bool is_constant() const { return root_->kind == expr_detail::Kind::constant; }

    /// Symbolic partial derivative. Throws UnsupportedDerivative for
    /// abs/min/max of an argument that depends on @p v.
    Expression derivative(Variable v) const {
        Expression e;
        e.root_ = expr_detail::derivative(root_, v);
        return e;
    }

    std::string to_string() const { return expr_detail::to_string(*root_); }

    friend Expression operator+(const Expression& a, const Expression& b) {
        return Expression(expr_detail::add(a.root_, b.root_));
    }
    friend Expression operator-(const Expression& a, const Expression& b) {
        return Expression(expr_detail::sub(a.root_, b.root_));
    }
    friend Expression operator*(const Expression& a, const Expression& b) {
        return Expression(expr_detail::mul(a.root_, b.root_));
    }
    friend Expression operator/(const Expression& a, const Expression& b) {
        return Expression(expr_detail::div(a.root_, b.root_));
    }

private:
    explicit Expression(expr_detail::NodePtr root) : root_(std::move(root)) {}

    expr_detail::NodePtr root_;
};

inline Expression parse_expression(std::string_view text) { return Expression::parse(text); }

inline Expression symbolic_s_derivative(const Expression& e) { return e.derivative(Variable::s); }

}  // namespace capgraph
