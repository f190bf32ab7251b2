#pragma once

#include <Eigen/Dense>
#include <cctype>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "branchform/dual.hpp"
#include "branchform/rational.hpp"

namespace branchform {

struct ParseError : std::runtime_error {
    std::size_t offset;
    ParseError(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

enum class NodeKind { Var, RatLit, DecLit, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt };

// Immutable expression tree. All maps, group elements, vector fields and
// form coefficients are specified in this language; evaluation is pure.
struct ExprNode {
    NodeKind kind;
    int var_index = 0;       // Var
    Rational rat{0};         // RatLit
    double dec = 0.0;        // DecLit
    int exponent = 0;        // Pow
    std::shared_ptr<const ExprNode> lhs, rhs;
};

using ExprAST = std::shared_ptr<const ExprNode>;

namespace detail {

class Parser {
  public:
    Parser(std::string text, int arity) : text_(std::move(text)), arity_(arity) {}

    ExprAST parse() {
        auto e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        return e;
    }

  private:
    std::string text_;
    int arity_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }
    bool accept(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    static ExprAST make(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

    ExprAST parse_expr() {
        auto lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                lhs = make({NodeKind::Add, 0, {0}, 0, 0, lhs, parse_term()});
            } else if (accept('-')) {
                lhs = make({NodeKind::Sub, 0, {0}, 0, 0, lhs, parse_term()});
            } else {
                return lhs;
            }
        }
    }

    ExprAST parse_term() {
        auto lhs = parse_factor();
        for (;;) {
            if (accept('*')) {
                lhs = make({NodeKind::Mul, 0, {0}, 0, 0, lhs, parse_factor()});
            } else if (accept('/')) {
                lhs = make({NodeKind::Div, 0, {0}, 0, 0, lhs, parse_factor()});
            } else {
                return lhs;
            }
        }
    }

    ExprAST parse_factor() {
        bool neg = accept('-');
        auto a = parse_atom();
        if (accept('^')) {
            skip_ws();
            a = make({NodeKind::Pow, 0, {0}, 0, parse_int(), a, nullptr});
        }
        if (neg) a = make({NodeKind::Neg, 0, {0}, 0, 0, a, nullptr});
        return a;
    }

    int parse_int() {
        skip_ws();
        std::size_t start = pos_;
        bool neg = accept('-');
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
            throw ParseError("expected integer exponent", pos_);
        long v = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
            v = v * 10 + (text_[pos_++] - '0');
        (void)start;
        return neg ? static_cast<int>(-v) : static_cast<int>(v);
    }

    ExprAST parse_atom() {
        skip_ws();
        const std::size_t at = pos_;
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", at);
        const char c = text_[pos_];

        if (c == '(') {
            ++pos_;
            auto e = parse_expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", at);
    }

    ExprAST parse_number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        const bool has_dot = pos_ < text_.size() && text_[pos_] == '.';
        if (has_dot) {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            const double v = std::stod(text_.substr(start, pos_ - start));
            return make({NodeKind::DecLit, 0, {0}, v, 0, nullptr, nullptr});
        }
        const std::int64_t num = std::stoll(text_.substr(start, pos_ - start));
        // "p/q" with integer q is an exact rational literal; a '/' followed
        // by anything else is ordinary division, so only commit on digits.
        std::size_t save = pos_;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '/') {
            std::size_t slash = pos_;
            ++pos_;
            skip_ws();
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                const std::size_t dstart = pos_;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
                if (pos_ >= text_.size() || text_[pos_] != '.') {
                    const std::int64_t den = std::stoll(text_.substr(dstart, pos_ - dstart));
                    if (den == 0) throw ParseError("zero denominator in rational literal", slash);
                    return make({NodeKind::RatLit, 0, Rational(num, den), 0, 0, nullptr, nullptr});
                }
            }
            pos_ = save;
        } else {
            pos_ = save;
        }
        return make({NodeKind::RatLit, 0, Rational(num), 0, 0, nullptr, nullptr});
    }

    ExprAST parse_identifier() {
        const std::size_t at = pos_;
        std::string id;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_])))
            id += text_[pos_++];
        if (id == "x") {
            if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
                throw ParseError("expected variable index after 'x'", pos_);
            int idx = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                idx = idx * 10 + (text_[pos_++] - '0');
            if (idx >= arity_)
                throw ParseError("variable index " + std::to_string(idx) + " out of range (arity " +
                                     std::to_string(arity_) + ")",
                                 at);
            return make({NodeKind::Var, idx, {0}, 0, 0, nullptr, nullptr});
        }
        NodeKind k;
        if (id == "sin") k = NodeKind::Sin;
        else if (id == "cos") k = NodeKind::Cos;
        else if (id == "exp") k = NodeKind::Exp;
        else if (id == "sqrt") k = NodeKind::Sqrt;
        else throw ParseError("unknown identifier '" + id + "'", at);
        if (!accept('(')) throw ParseError("expected '(' after function name", pos_);
        auto arg = parse_expr();
        if (!accept(')')) throw ParseError("expected ')'", pos_);
        return make({k, 0, {0}, 0, 0, arg, nullptr});
    }
};

}  // namespace detail

inline ExprAST parse_expression(const std::string& text, int arity) {
    return detail::Parser(text, arity).parse();
}

// Evaluation over any scalar supporting the arithmetic in dual.hpp; T=double
// gives values, Dual1 first derivatives, Dual2 second derivatives.
template <typename T>
T eval_ast(const ExprAST& node, const std::vector<T>& args) {
    switch (node->kind) {
        case NodeKind::Var:
            return args[static_cast<std::size_t>(node->var_index)];
        case NodeKind::RatLit:
            return T(to_double(node->rat));
        case NodeKind::DecLit:
            return T(node->dec);
        case NodeKind::Neg:
            return -eval_ast(node->lhs, args);
        case NodeKind::Add:
            return eval_ast(node->lhs, args) + eval_ast(node->rhs, args);
        case NodeKind::Sub:
            return eval_ast(node->lhs, args) - eval_ast(node->rhs, args);
        case NodeKind::Mul:
            return eval_ast(node->lhs, args) * eval_ast(node->rhs, args);
        case NodeKind::Div: {
            T den = eval_ast(node->rhs, args);
            if (primal(den) == 0.0) throw EvalDomainError("division by zero");
            return eval_ast(node->lhs, args) / den;
        }
        case NodeKind::Pow: {
            T base = eval_ast(node->lhs, args);
            if (node->exponent < 0 && primal(base) == 0.0)
                throw EvalDomainError("zero base with negative exponent");
            return powi(base, node->exponent);
        }
        case NodeKind::Sin:
            return sin(eval_ast(node->lhs, args));
        case NodeKind::Cos:
            return cos(eval_ast(node->lhs, args));
        case NodeKind::Exp: {
            T v = exp(eval_ast(node->lhs, args));
            if (!std::isfinite(primal(v))) throw EvalDomainError("exp overflow");
            return v;
        }
        case NodeKind::Sqrt: {
            T arg = eval_ast(node->lhs, args);
            if (primal(arg) < 0.0) throw EvalDomainError("sqrt of negative value");
            if (primal(arg) == 0.0) return T(0);  // derivative is singular only off the domain
            return sqrt(arg);
        }
    }
    throw std::logic_error("unreachable node kind");
}

inline std::string pretty_print(const ExprAST& n) {
    switch (n->kind) {
        case NodeKind::Var: return "x" + std::to_string(n->var_index);
        case NodeKind::RatLit: return rational_to_string(n->rat);
        case NodeKind::DecLit: {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", n->dec);
            return buf;
        }
        case NodeKind::Neg: return "(0 - " + pretty_print(n->lhs) + ")";
        case NodeKind::Add: return "(" + pretty_print(n->lhs) + " + " + pretty_print(n->rhs) + ")";
        case NodeKind::Sub: return "(" + pretty_print(n->lhs) + " - " + pretty_print(n->rhs) + ")";
        case NodeKind::Mul: return "(" + pretty_print(n->lhs) + " * " + pretty_print(n->rhs) + ")";
        case NodeKind::Div: return "(" + pretty_print(n->lhs) + " / " + pretty_print(n->rhs) + ")";
        case NodeKind::Pow:
            return "(" + pretty_print(n->lhs) + ")^" + std::to_string(n->exponent);
        case NodeKind::Sin: return "sin(" + pretty_print(n->lhs) + ")";
        case NodeKind::Cos: return "cos(" + pretty_print(n->lhs) + ")";
        case NodeKind::Exp: return "exp(" + pretty_print(n->lhs) + ")";
        case NodeKind::Sqrt: return "sqrt(" + pretty_print(n->lhs) + ")";
    }
    return "?";
}

inline bool structurally_equal(const ExprAST& a, const ExprAST& b) {
    if (a->kind != b->kind) {
        // pretty_print renders unary minus as (0 - e); accept that alias
        auto unwrap = [](const ExprAST& n) -> ExprAST {
            if (n->kind == NodeKind::Neg) return n;
            if (n->kind == NodeKind::Sub && n->lhs->kind == NodeKind::RatLit &&
                n->lhs->rat == Rational(0))
                return std::make_shared<const ExprNode>(
                    ExprNode{NodeKind::Neg, 0, {0}, 0, 0, n->rhs, nullptr});
            return n;
        };
        ExprAST ua = unwrap(a), ub = unwrap(b);
        if (ua->kind != ub->kind) return false;
        return structurally_equal(ua->lhs, ub->lhs);
    }
    switch (a->kind) {
        case NodeKind::Var: return a->var_index == b->var_index;
        case NodeKind::RatLit: return a->rat == b->rat;
        case NodeKind::DecLit: return a->dec == b->dec;
        case NodeKind::Pow:
            return a->exponent == b->exponent && structurally_equal(a->lhs, b->lhs);
        case NodeKind::Neg:
        case NodeKind::Sin:
        case NodeKind::Cos:
        case NodeKind::Exp:
        case NodeKind::Sqrt:
            return structurally_equal(a->lhs, b->lhs);
        default:
            return structurally_equal(a->lhs, b->lhs) && structurally_equal(a->rhs, b->rhs);
    }
}

// A smooth map R^m -> R^p with components given by expression trees.
// Exact Jacobians and second directional derivatives come from forward-mode
// dual evaluation; immutable and safe for concurrent evaluation.
class SmoothMap {
  public:
    SmoothMap() = default;
    SmoothMap(int arity, std::vector<ExprAST> components)
        : arity_(arity), components_(std::move(components)) {}

    static SmoothMap parse(int arity, const std::vector<std::string>& exprs) {
        std::vector<ExprAST> comps;
        comps.reserve(exprs.size());
        for (const auto& e : exprs) comps.push_back(parse_expression(e, arity));
        return SmoothMap(arity, std::move(comps));
    }

    static SmoothMap identity(int dim) {
        std::vector<ExprAST> comps;
        for (int i = 0; i < dim; ++i)
            comps.push_back(std::make_shared<const ExprNode>(
                ExprNode{NodeKind::Var, i, {0}, 0, 0, nullptr, nullptr}));
        return SmoothMap(dim, std::move(comps));
    }

    int arity() const { return arity_; }
    int coarity() const { return static_cast<int>(components_.size()); }
    const std::vector<ExprAST>& components() const { return components_; }

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
        check_arity(x);
        std::vector<double> args(x.data(), x.data() + x.size());
        Eigen::VectorXd out(coarity());
        for (int i = 0; i < coarity(); ++i)
            out[i] = eval_ast(components_[static_cast<std::size_t>(i)], args);
        return out;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
        check_arity(x);
        Eigen::MatrixXd J(coarity(), arity_);
        std::vector<Dual1> args(static_cast<std::size_t>(arity_));
        for (int j = 0; j < arity_; ++j) {
            for (int k = 0; k < arity_; ++k)
                args[static_cast<std::size_t>(k)] = Dual1(x[k], k == j ? 1.0 : 0.0);
            for (int i = 0; i < coarity(); ++i)
                J(i, j) = eval_ast(components_[static_cast<std::size_t>(i)], args).dot;
        }
        return J;
    }

    // D^2 f(x)(u, v); symmetric in (u, v) by construction.
    Eigen::VectorXd second_directional(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                       const Eigen::VectorXd& v) const {
        check_arity(x);
        std::vector<Dual2> args(static_cast<std::size_t>(arity_));
        for (int k = 0; k < arity_; ++k)
            args[static_cast<std::size_t>(k)] = Dual2(Dual1(x[k], u[k]), Dual1(v[k], 0.0));
        Eigen::VectorXd out(coarity());
        for (int i = 0; i < coarity(); ++i)
            out[i] = eval_ast(components_[static_cast<std::size_t>(i)], args).dot.dot;
        return out;
    }

    SmoothMap compose_after(const SmoothMap& inner) const;

  private:
    void check_arity(const Eigen::VectorXd& x) const {
        if (x.size() != arity_)
            throw std::invalid_argument("point dimension " + std::to_string(x.size()) +
                                        " != map arity " + std::to_string(arity_));
    }

    int arity_ = 0;
    std::vector<ExprAST> components_;
};

namespace detail {
inline ExprAST substitute(const ExprAST& n, const std::vector<ExprAST>& repl) {
    if (n->kind == NodeKind::Var) return repl[static_cast<std::size_t>(n->var_index)];
    ExprNode copy = *n;
    if (n->lhs) copy.lhs = substitute(n->lhs, repl);
    if (n->rhs) copy.rhs = substitute(n->rhs, repl);
    return std::make_shared<const ExprNode>(std::move(copy));
}
}  // namespace detail

// (f.compose_after(g))(x) = f(g(x)), built by tree substitution so the
// result differentiates exactly like any other SmoothMap.
inline SmoothMap SmoothMap::compose_after(const SmoothMap& inner) const {
    if (inner.coarity() != arity_)
        throw std::invalid_argument("composition dimension mismatch");
    std::vector<ExprAST> comps;
    comps.reserve(components_.size());
    for (const auto& c : components_) comps.push_back(detail::substitute(c, inner.components()));
    return SmoothMap(inner.arity(), std::move(comps));
}

}  // namespace branchform
