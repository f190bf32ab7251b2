#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "branchform/expr.hpp"
#include "branchform/geometry.hpp"
#include "branchform/quadrature.hpp"

namespace branchform {

// ---------------------------------------------------------------------------
// Form evaluators. A differential k-form is anything that can be evaluated
// on k tangent vectors at a point, directionally differentiated in the point
// (vectors held constant), and, when second derivatives exist, twice so.
// This is enough to take exterior derivatives without symbolic machinery.

class FormEval {
  public:
    virtual ~FormEval() = default;
    virtual int dim() const = 0;
    virtual int degree() const = 0;
    virtual double eval(const Eigen::VectorXd& x,
                        const std::vector<Eigen::VectorXd>& vectors) const = 0;
    // d/ds eval(x + s u, vectors) at s = 0
    virtual double deriv(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& vectors,
                         const Eigen::VectorXd& u) const = 0;
    // d2/(ds dt) eval(x + s u + t w, vectors) at 0; optional
    virtual double deriv2(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& vectors,
                          const Eigen::VectorXd& u, const Eigen::VectorXd& w) const {
        (void)x;
        (void)vectors;
        (void)u;
        (void)w;
        throw std::logic_error("second derivative not available for this form evaluator");
    }
};

using FormPtr = std::shared_ptr<const FormEval>;

// A k-form given by coefficient expressions on strictly increasing index
// tuples: omega = sum_I a_I dx_I.
struct FormTerm {
    std::vector<int> indices;  // strictly increasing, 0-based
    ExprAST coeff;             // arity = ambient dimension
};

class ExprForm final : public FormEval {
  public:
    ExprForm(int dim, int degree, std::vector<FormTerm> terms)
        : dim_(dim), degree_(degree), terms_(std::move(terms)) {
        for (const auto& t : terms_) {
            if (static_cast<int>(t.indices.size()) != degree_)
                throw std::invalid_argument("term index count != form degree");
            for (std::size_t i = 0; i < t.indices.size(); ++i) {
                if (t.indices[i] < 0 || t.indices[i] >= dim_)
                    throw std::invalid_argument("form index out of range");
                if (i > 0 && t.indices[i] <= t.indices[i - 1])
                    throw std::invalid_argument("form indices must be strictly increasing");
            }
        }
    }

    static ExprForm parse(int dim, int degree,
                          const std::vector<std::pair<std::vector<int>, std::string>>& terms) {
        std::vector<FormTerm> out;
        out.reserve(terms.size());
        for (const auto& [idx, expr] : terms)
            out.push_back({idx, parse_expression(expr, dim)});
        return ExprForm(dim, degree, std::move(out));
    }

    int dim() const override { return dim_; }
    int degree() const override { return degree_; }
    const std::vector<FormTerm>& terms() const { return terms_; }

    double eval(const Eigen::VectorXd& x,
                const std::vector<Eigen::VectorXd>& vectors) const override {
        check(x, vectors);
        std::vector<double> args(x.data(), x.data() + x.size());
        double sum = 0.0;
        for (const auto& t : terms_)
            sum += eval_ast(t.coeff, args) * minor_det(t.indices, vectors);
        return sum;
    }

    double deriv(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& vectors,
                 const Eigen::VectorXd& u) const override {
        check(x, vectors);
        std::vector<Dual1> args(static_cast<std::size_t>(dim_));
        for (int i = 0; i < dim_; ++i) args[static_cast<std::size_t>(i)] = Dual1(x[i], u[i]);
        double sum = 0.0;
        for (const auto& t : terms_)
            sum += eval_ast(t.coeff, args).dot * minor_det(t.indices, vectors);
        return sum;
    }

    double deriv2(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& vectors,
                  const Eigen::VectorXd& u, const Eigen::VectorXd& w) const override {
        check(x, vectors);
        std::vector<Dual2> args(static_cast<std::size_t>(dim_));
        for (int i = 0; i < dim_; ++i)
            args[static_cast<std::size_t>(i)] = Dual2(Dual1(x[i], u[i]), Dual1(w[i], 0.0));
        double sum = 0.0;
        for (const auto& t : terms_)
            sum += eval_ast(t.coeff, args).dot.dot * minor_det(t.indices, vectors);
        return sum;
    }

  private:
    void check(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& vectors) const {
        if (x.size() != dim_) throw std::invalid_argument("point dimension != form dimension");
        if (static_cast<int>(vectors.size()) != degree_)
            throw std::invalid_argument("vector count != form degree");
    }

    static double minor_det(const std::vector<int>& rows,
                            const std::vector<Eigen::VectorXd>& vectors) {
        const int k = static_cast<int>(rows.size());
        if (k == 0) return 1.0;
        Eigen::MatrixXd M(k, k);
        for (int c = 0; c < k; ++c)
            for (int r = 0; r < k; ++r)
                M(r, c) = vectors[static_cast<std::size_t>(c)][rows[static_cast<std::size_t>(r)]];
        return M.determinant();
    }

    int dim_;
    int degree_;
    std::vector<FormTerm> terms_;
};

inline FormPtr make_form(int dim, int degree,
                         const std::vector<std::pair<std::vector<int>, std::string>>& terms) {
    return std::make_shared<ExprForm>(ExprForm::parse(dim, degree, terms));
}

// a * F + b * G
class FormCombination final : public FormEval {
  public:
    FormCombination(double a, FormPtr f, double b, FormPtr g)
        : a_(a), f_(std::move(f)), b_(b), g_(std::move(g)) {
        if (f_->dim() != g_->dim() || f_->degree() != g_->degree())
            throw std::invalid_argument("form combination dimension/degree mismatch");
    }
    int dim() const override { return f_->dim(); }
    int degree() const override { return f_->degree(); }
    double eval(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& v) const override {
        return a_ * f_->eval(x, v) + b_ * g_->eval(x, v);
    }
    double deriv(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& v,
                 const Eigen::VectorXd& u) const override {
        return a_ * f_->deriv(x, v, u) + b_ * g_->deriv(x, v, u);
    }
    double deriv2(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& v,
                  const Eigen::VectorXd& u, const Eigen::VectorXd& w) const override {
        return a_ * f_->deriv2(x, v, u, w) + b_ * g_->deriv2(x, v, u, w);
    }

  private:
    double a_;
    FormPtr f_;
    double b_;
    FormPtr g_;
};

// f * F for a scalar density f given as an arbitrary evaluator (partition
// of unity weights are not expression trees). Evaluation only; this wrapper
// is always applied after any exterior derivative has been taken.
class ScaledForm final : public FormEval {
  public:
    ScaledForm(std::function<double(const Eigen::VectorXd&)> density, FormPtr base)
        : density_(std::move(density)), base_(std::move(base)) {}
    int dim() const override { return base_->dim(); }
    int degree() const override { return base_->degree(); }
    double eval(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& v) const override {
        const double d = density_(x);
        return d == 0.0 ? 0.0 : d * base_->eval(x, v);
    }
    double deriv(const Eigen::VectorXd&, const std::vector<Eigen::VectorXd>&,
                 const Eigen::VectorXd&) const override {
        throw std::logic_error("scaled form does not support differentiation");
    }

  private:
    std::function<double(const Eigen::VectorXd&)> density_;
    FormPtr base_;
};

inline FormPtr scale_form(std::function<double(const Eigen::VectorXd&)> density, FormPtr base) {
    return std::make_shared<ScaledForm>(std::move(density), std::move(base));
}

// Exterior derivative via directional derivatives of the underlying
// evaluator: for constant-extended arguments,
//   (dF)(x)(v_0, ..., v_k) = sum_i (-1)^i  d/ds F(x + s v_i)(v_0, ..^i.., v_k).
class ExteriorDerivative final : public FormEval {
  public:
    explicit ExteriorDerivative(FormPtr base) : base_(std::move(base)) {
        if (base_->degree() + 1 > base_->dim())
            degenerate_ = true;  // top-degree input, derivative vanishes identically
    }
    int dim() const override { return base_->dim(); }
    int degree() const override { return base_->degree() + 1; }

    double eval(const Eigen::VectorXd& x,
                const std::vector<Eigen::VectorXd>& vectors) const override {
        if (degenerate_) return 0.0;
        if (static_cast<int>(vectors.size()) != degree())
            throw std::invalid_argument("vector count != form degree");
        double sum = 0.0;
        std::vector<Eigen::VectorXd> rest(vectors.size() - 1);
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            std::size_t r = 0;
            for (std::size_t j = 0; j < vectors.size(); ++j)
                if (j != i) rest[r++] = vectors[j];
            const double term = base_->deriv(x, rest, vectors[i]);
            sum += (i % 2 == 0) ? term : -term;
        }
        return sum;
    }

    double deriv(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& vectors,
                 const Eigen::VectorXd& u) const override {
        if (degenerate_) return 0.0;
        double sum = 0.0;
        std::vector<Eigen::VectorXd> rest(vectors.size() - 1);
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            std::size_t r = 0;
            for (std::size_t j = 0; j < vectors.size(); ++j)
                if (j != i) rest[r++] = vectors[j];
            const double term = base_->deriv2(x, rest, vectors[i], u);
            sum += (i % 2 == 0) ? term : -term;
        }
        return sum;
    }

  private:
    FormPtr base_;
    bool degenerate_ = false;
};

inline FormPtr exterior_derivative(FormPtr form) {
    return std::make_shared<ExteriorDerivative>(std::move(form));
}

// Pullback along a smooth map phi: parameters -> ambient,
//   (phi^* F)(q)(w_1, ..., w_k) = F(phi(q))(Dphi(q) w_1, ..., Dphi(q) w_k).
class Pullback final : public FormEval {
  public:
    Pullback(FormPtr base, SmoothMap map) : base_(std::move(base)), map_(std::move(map)) {
        if (map_.coarity() != base_->dim())
            throw std::invalid_argument("pullback map lands in the wrong dimension");
    }
    int dim() const override { return map_.arity(); }
    int degree() const override { return base_->degree(); }

    double eval(const Eigen::VectorXd& q,
                const std::vector<Eigen::VectorXd>& vectors) const override {
        const Eigen::MatrixXd J = map_.jacobian(q);
        std::vector<Eigen::VectorXd> pushed;
        pushed.reserve(vectors.size());
        for (const auto& w : vectors) pushed.push_back(J * w);
        return base_->eval(map_(q), pushed);
    }

    double deriv(const Eigen::VectorXd& q, const std::vector<Eigen::VectorXd>& vectors,
                 const Eigen::VectorXd& u) const override {
        const Eigen::MatrixXd J = map_.jacobian(q);
        const Eigen::VectorXd x = map_(q);
        std::vector<Eigen::VectorXd> pushed;
        pushed.reserve(vectors.size());
        for (const auto& w : vectors) pushed.push_back(J * w);
        double sum = base_->deriv(x, pushed, J * u);
        // product rule over the pushed vectors: D^2 phi(q)(w_i, u)
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            const Eigen::VectorXd dw = map_.second_directional(q, vectors[i], u);
            if (dw.norm() == 0.0) continue;
            std::vector<Eigen::VectorXd> modified = pushed;
            modified[i] = dw;
            sum += base_->eval(x, modified);
        }
        return sum;
    }

  private:
    FormPtr base_;
    SmoothMap map_;
};

inline FormPtr pullback(FormPtr form, SmoothMap map) {
    return std::make_shared<Pullback>(std::move(form), std::move(map));
}

// ---------------------------------------------------------------------------
// Primitive of a closed form on a star-shaped domain:
//   tau(y)(v_1, ..., v_{k-1}) = int_0^1 t^{k-1} omega(t y)(y, v_1, ...) dt.
// Its directional derivative differentiates under the integral sign, so
// d tau can be formed through ExteriorDerivative and compared with omega.
class PoincarePrimitive final : public FormEval {
  public:
    explicit PoincarePrimitive(FormPtr base, int quad_order = 24)
        : base_(std::move(base)), order_(quad_order) {
        if (base_->degree() < 1)
            throw std::invalid_argument("primitive needs a form of degree >= 1");
    }
    int dim() const override { return base_->dim(); }
    int degree() const override { return base_->degree() - 1; }

    double eval(const Eigen::VectorXd& y,
                const std::vector<Eigen::VectorXd>& vectors) const override {
        const int k = base_->degree();
        std::vector<Eigen::VectorXd> args;
        args.reserve(vectors.size() + 1);
        args.push_back(y);
        for (const auto& v : vectors) args.push_back(v);
        const QuadRule& rule = gauss_legendre(order_);
        KahanSum sum;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double t = 0.5 * (1.0 + rule.nodes[i]);
            const double w = 0.5 * rule.weights[i];
            sum.add(w * std::pow(t, k - 1) * base_->eval(t * y, args));
        }
        return sum.value();
    }

    double deriv(const Eigen::VectorXd& y, const std::vector<Eigen::VectorXd>& vectors,
                 const Eigen::VectorXd& u) const override {
        const int k = base_->degree();
        std::vector<Eigen::VectorXd> args;
        args.reserve(vectors.size() + 1);
        args.push_back(y);
        for (const auto& v : vectors) args.push_back(v);
        const QuadRule& rule = gauss_legendre(order_);
        KahanSum sum;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double t = 0.5 * (1.0 + rule.nodes[i]);
            const double w = 0.5 * rule.weights[i];
            // the first slot also carries y, so u appears twice
            double term = t * base_->deriv(t * y, args, u);
            std::vector<Eigen::VectorXd> modified = args;
            modified[0] = u;
            term += base_->eval(t * y, modified);
            sum.add(w * std::pow(t, k - 1) * term);
        }
        return sum.value();
    }

  private:
    FormPtr base_;
    int order_;
};

inline FormPtr poincare_primitive(FormPtr form, int quad_order = 24) {
    return std::make_shared<PoincarePrimitive>(std::move(form), quad_order);
}

// Max over quasi-random points and vector batteries of
// |omega(phi x)(Dphi v_1, ...) - omega(x)(v_1, ...)|.
inline double form_invariance_defect(const FormEval& form, const SmoothMap& phi,
                                     const ChartDomain& domain, int samples = 32) {
    const int N = form.dim();
    const int k = form.degree();
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Eigen::VectorXd x = domain.sample(static_cast<std::size_t>(s));
        std::vector<Eigen::VectorXd> vs, pushed;
        const Eigen::MatrixXd J = phi.jacobian(x);
        for (int j = 0; j < k; ++j) {
            const auto u = halton_point(static_cast<std::size_t>(1000 + s * k + j), N);
            Eigen::VectorXd v(N);
            for (int i = 0; i < N; ++i) v[i] = 2.0 * u[static_cast<std::size_t>(i)] - 1.0;
            vs.push_back(v);
            pushed.push_back(J * v);
        }
        worst = std::max(worst, std::abs(form.eval(phi(x), pushed) - form.eval(x, vs)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Vector fields and Lie brackets. The interface carries the value, its
// directional Jacobian, and (for leaf fields) one more derivative so a
// single bracket can itself be differentiated.

class VecField {
  public:
    virtual ~VecField() = default;
    virtual int dim() const = 0;
    virtual Eigen::VectorXd value(const Eigen::VectorXd& x) const = 0;
    // DA(x) u
    virtual Eigen::VectorXd dv(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
    // d/ds [DA(x + s u) v] at s = 0
    virtual Eigen::VectorXd d2v(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                const Eigen::VectorXd& u) const {
        (void)x;
        (void)v;
        (void)u;
        throw std::logic_error("second derivative not available for this vector field");
    }
};

using VecFieldPtr = std::shared_ptr<const VecField>;

class ExprVecField final : public VecField {
  public:
    explicit ExprVecField(SmoothMap map) : map_(std::move(map)) {
        if (map_.arity() != map_.coarity())
            throw std::invalid_argument("vector field must map R^n to R^n");
    }
    int dim() const override { return map_.arity(); }
    Eigen::VectorXd value(const Eigen::VectorXd& x) const override { return map_(x); }
    Eigen::VectorXd dv(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
        return map_.jacobian(x) * u;
    }
    Eigen::VectorXd d2v(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                        const Eigen::VectorXd& u) const override {
        return map_.second_directional(x, v, u);
    }

  private:
    SmoothMap map_;
};

inline VecFieldPtr make_vector_field(int dim, const std::vector<std::string>& components) {
    return std::make_shared<ExprVecField>(SmoothMap::parse(dim, components));
}

// [A, B](x) = DA(x) B(x) - DB(x) A(x)
class BracketField final : public VecField {
  public:
    BracketField(VecFieldPtr a, VecFieldPtr b) : a_(std::move(a)), b_(std::move(b)) {
        if (a_->dim() != b_->dim()) throw std::invalid_argument("bracket dimension mismatch");
    }
    int dim() const override { return a_->dim(); }
    Eigen::VectorXd value(const Eigen::VectorXd& x) const override {
        return a_->dv(x, b_->value(x)) - b_->dv(x, a_->value(x));
    }
    Eigen::VectorXd dv(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
        return a_->d2v(x, b_->value(x), u) + a_->dv(x, b_->dv(x, u)) -
               b_->d2v(x, a_->value(x), u) - b_->dv(x, a_->dv(x, u));
    }

  private:
    VecFieldPtr a_, b_;
};

inline VecFieldPtr lie_bracket(VecFieldPtr a, VecFieldPtr b) {
    return std::make_shared<BracketField>(std::move(a), std::move(b));
}

// Pushforward along a diffeomorphism phi with explicit inverse psi:
//   (phi_* A)(y) = Dphi(psi y) A(psi y).
class PushforwardField final : public VecField {
  public:
    PushforwardField(VecFieldPtr a, SmoothMap phi, SmoothMap psi)
        : a_(std::move(a)), phi_(std::move(phi)), psi_(std::move(psi)) {}
    int dim() const override { return a_->dim(); }
    Eigen::VectorXd value(const Eigen::VectorXd& y) const override {
        const Eigen::VectorXd x = psi_(y);
        return phi_.jacobian(x) * a_->value(x);
    }
    Eigen::VectorXd dv(const Eigen::VectorXd& y, const Eigen::VectorXd& u) const override {
        const Eigen::VectorXd x = psi_(y);
        const Eigen::VectorXd w = psi_.jacobian(y) * u;
        return phi_.second_directional(x, a_->value(x), w) + phi_.jacobian(x) * a_->dv(x, w);
    }

  private:
    VecFieldPtr a_;
    SmoothMap phi_, psi_;
};

inline VecFieldPtr pushforward(VecFieldPtr a, SmoothMap phi, SmoothMap psi) {
    return std::make_shared<PushforwardField>(std::move(a), std::move(phi), std::move(psi));
}

// max_x |Dphi(x) A(x) - A(phi x)|, the phi-relatedness defect of a field.
inline double field_relatedness_defect(const VecFieldPtr& a, const SmoothMap& phi,
                                       const ChartDomain& domain, int samples = 32) {
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Eigen::VectorXd x = domain.sample(static_cast<std::size_t>(s));
        worst = std::max(worst, (phi.jacobian(x) * a->value(x) - a->value(phi(x))).norm());
    }
    return worst;
}

// Naturality defect of the bracket under a diffeomorphism:
//   max_x | Dphi(x) [A, B](x) - [phi_* A, phi_* B](phi x) |.
inline double bracket_naturality_defect(const VecFieldPtr& a, const VecFieldPtr& b,
                                        const SmoothMap& phi, const SmoothMap& psi,
                                        const ChartDomain& domain, int samples = 32) {
    const auto bracket = lie_bracket(a, b);
    const auto pushed = lie_bracket(pushforward(a, phi, psi), pushforward(b, phi, psi));
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Eigen::VectorXd x = domain.sample(static_cast<std::size_t>(s));
        const Eigen::VectorXd lhs = phi.jacobian(x) * bracket->value(x);
        const Eigen::VectorXd rhs = pushed->value(phi(x));
        worst = std::max(worst, (lhs - rhs).norm());
    }
    return worst;
}

struct NaturalityReport {
    bool related = false;          // both fields are phi-related within tolerance
    double relatedness_defect = 0.0;
    double defect = 0.0;           // naturality defect, valid only when related
    bool passed(double tol) const { return related && defect <= tol; }
};

inline NaturalityReport bracket_naturality_check(const VecFieldPtr& a, const VecFieldPtr& b,
                                                 const SmoothMap& phi, const SmoothMap& psi,
                                                 const ChartDomain& domain,
                                                 double related_tol = 1e-8, int samples = 32) {
    NaturalityReport rep;
    rep.relatedness_defect = std::max(field_relatedness_defect(a, phi, domain, samples),
                                      field_relatedness_defect(b, phi, domain, samples));
    rep.related = rep.relatedness_defect <= related_tol;
    if (!rep.related) return rep;
    rep.defect = bracket_naturality_defect(a, b, phi, psi, domain, samples);
    return rep;
}

}  // namespace branchform
