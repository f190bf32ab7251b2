#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "branchform/expr.hpp"
#include "branchform/quadrature.hpp"
#include "branchform/rational.hpp"

namespace branchform {

// ---------------------------------------------------------------------------
// Chart: an open subset of R^N with a finite group acting by diffeomorphisms.

struct GroupElement {
    std::string name;
    SmoothMap map;  // R^N -> R^N
};

struct ChartDomain {
    enum class Kind { Box, Ball } kind = Kind::Box;
    Eigen::VectorXd lo, hi;      // Box
    Eigen::VectorXd center;      // Ball
    double radius = 1.0;

    static ChartDomain box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
        ChartDomain d;
        d.kind = Kind::Box;
        d.lo = std::move(lo);
        d.hi = std::move(hi);
        return d;
    }
    static ChartDomain ball(Eigen::VectorXd center, double radius) {
        ChartDomain d;
        d.kind = Kind::Ball;
        d.center = std::move(center);
        d.radius = radius;
        return d;
    }

    int dim() const { return kind == Kind::Box ? static_cast<int>(lo.size()) : static_cast<int>(center.size()); }

    bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
        if (kind == Kind::Ball) return (x - center).norm() <= radius + tol;
        for (int i = 0; i < lo.size(); ++i)
            if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
        return true;
    }

    double diameter() const {
        return kind == Kind::Ball ? 2.0 * radius : (hi - lo).norm();
    }

    // Quasi-random interior point, used by sampling-based checks.
    Eigen::VectorXd sample(std::size_t k) const {
        const int n = dim();
        const auto u = halton_point(k, n);
        Eigen::VectorXd x(n);
        if (kind == Kind::Box) {
            for (int i = 0; i < n; ++i) x[i] = lo[i] + u[static_cast<std::size_t>(i)] * (hi[i] - lo[i]);
        } else {
            for (int i = 0; i < n; ++i) x[i] = center[i] + radius * (2.0 * u[static_cast<std::size_t>(i)] - 1.0);
            if ((x - center).norm() > radius) x = center + 0.5 * (x - center);
        }
        return x;
    }
};

struct GroupAxiomError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Chart {
  public:
    Chart(ChartDomain domain, std::vector<GroupElement> elements,
          std::vector<std::vector<int>> table, int identity)
        : domain_(std::move(domain)),
          elements_(std::move(elements)),
          table_(std::move(table)),
          identity_(identity) {
        verify_table();
    }

    static Chart trivial(ChartDomain domain) {
        const int n = domain.dim();
        std::vector<GroupElement> els;
        els.push_back({"e", SmoothMap::identity(n)});
        return Chart(std::move(domain), std::move(els), {{0}}, 0);
    }

    int dim() const { return domain_.dim(); }
    const ChartDomain& domain() const { return domain_; }
    int group_order() const { return static_cast<int>(elements_.size()); }
    int identity() const { return identity_; }
    int compose(int g, int h) const { return table_[static_cast<std::size_t>(g)][static_cast<std::size_t>(h)]; }
    int inverse(int g) const {
        for (int h = 0; h < group_order(); ++h)
            if (compose(g, h) == identity_) return h;
        throw GroupAxiomError("missing inverse");  // verify_table already excluded this
    }
    const SmoothMap& action(int g) const { return elements_[static_cast<std::size_t>(g)].map; }
    const std::string& element_name(int g) const { return elements_[static_cast<std::size_t>(g)].name; }

    Eigen::VectorXd apply(int g, const Eigen::VectorXd& x) const { return action(g)(x); }

    // max over sampled points and pairs (g,h) of |phi_g(phi_h(x)) - phi_{gh}(x)|
    double action_composition_defect(int samples = 32) const {
        double worst = 0.0;
        for (int k = 0; k < samples; ++k) {
            const Eigen::VectorXd x = domain_.sample(static_cast<std::size_t>(k));
            for (int g = 0; g < group_order(); ++g)
                for (int h = 0; h < group_order(); ++h) {
                    const Eigen::VectorXd a = apply(g, apply(h, x));
                    const Eigen::VectorXd b = apply(compose(g, h), x);
                    worst = std::max(worst, (a - b).norm());
                }
        }
        return worst;
    }

  private:
    void verify_table() {
        const int n = group_order();
        if (n == 0) throw GroupAxiomError("empty group");
        if (identity_ < 0 || identity_ >= n) throw GroupAxiomError("bad identity index");
        for (int g = 0; g < n; ++g) {
            if (static_cast<int>(table_[static_cast<std::size_t>(g)].size()) != n)
                throw GroupAxiomError("multiplication table is not square");
            for (int h = 0; h < n; ++h) {
                const int gh = table_[static_cast<std::size_t>(g)][static_cast<std::size_t>(h)];
                if (gh < 0 || gh >= n) throw GroupAxiomError("table entry out of range (closure)");
            }
            if (compose(g, identity_) != g || compose(identity_, g) != g)
                throw GroupAxiomError("identity axiom fails at element " + std::to_string(g));
            bool has_inverse = false;
            for (int h = 0; h < n; ++h)
                if (compose(g, h) == identity_ && compose(h, g) == identity_) has_inverse = true;
            if (!has_inverse) throw GroupAxiomError("missing inverse for element " + std::to_string(g));
        }
        for (int g = 0; g < n; ++g)
            for (int h = 0; h < n; ++h)
                for (int k = 0; k < n; ++k)
                    if (compose(compose(g, h), k) != compose(g, compose(h, k)))
                        throw GroupAxiomError("associativity fails");
    }

    ChartDomain domain_;
    std::vector<GroupElement> elements_;
    std::vector<std::vector<int>> table_;
    int identity_;
};

// The subgroup acting trivially on the chart (detected at quasi-random
// sample points) and the resulting effective order |G| / |G0|.
struct EffectiveQuotient {
    std::vector<int> ineffective;  // indices of G0, sorted
    Rational effective_order;      // #G_e, exact

    static EffectiveQuotient compute(const Chart& chart, double tol = 1e-9, int samples = 64) {
        EffectiveQuotient q;
        for (int g = 0; g < chart.group_order(); ++g) {
            double worst = 0.0;
            for (int k = 0; k < samples; ++k) {
                const Eigen::VectorXd x = chart.domain().sample(static_cast<std::size_t>(k));
                worst = std::max(worst, (chart.apply(g, x) - x).norm());
            }
            if (worst <= tol) q.ineffective.push_back(g);
        }
        // G0 must be normal: g h g^-1 in G0 for h in G0
        for (int g = 0; g < chart.group_order(); ++g)
            for (int h : q.ineffective) {
                const int conj = chart.compose(chart.compose(g, h), chart.inverse(g));
                if (std::find(q.ineffective.begin(), q.ineffective.end(), conj) ==
                    q.ineffective.end())
                    throw GroupAxiomError("ineffective subgroup is not normal");
            }
        q.effective_order = Rational(chart.group_order(), static_cast<std::int64_t>(q.ineffective.size()));
        if (q.effective_order.denominator() != 1)
            throw GroupAxiomError("ineffective order does not divide group order");
        return q;
    }
};

// ---------------------------------------------------------------------------
// Parameter domains: products of quadrant, interval, and periodic factors.

struct DomainFactor {
    enum class Kind { Quadrant, Interval, Periodic } kind;
    double lo = 0.0;  // Quadrant: 0; Interval: a; Periodic: 0
    double hi = 1.0;  // Quadrant: b; Interval: c; Periodic: period

    static DomainFactor quadrant(double b) { return {Kind::Quadrant, 0.0, b}; }
    static DomainFactor interval(double a, double c) { return {Kind::Interval, a, c}; }
    static DomainFactor periodic(double period) { return {Kind::Periodic, 0.0, period}; }

    double length() const { return hi - lo; }
    bool is_periodic() const { return kind == Kind::Periodic; }
};

class ParamDomain {
  public:
    ParamDomain() = default;
    explicit ParamDomain(std::vector<DomainFactor> factors) : factors_(std::move(factors)) {
        bool seen_non_quadrant = false;
        for (const auto& f : factors_) {
            if (f.length() <= 0.0) throw std::invalid_argument("degenerate domain factor");
            if (f.kind == DomainFactor::Kind::Quadrant) {
                if (seen_non_quadrant)
                    throw std::invalid_argument("quadrant factors must precede the others");
            } else {
                seen_non_quadrant = true;
            }
        }
    }

    int dim() const { return static_cast<int>(factors_.size()); }
    int corner_degree() const {
        int d = 0;
        for (const auto& f : factors_)
            if (f.kind == DomainFactor::Kind::Quadrant) ++d;
        return d;
    }
    const std::vector<DomainFactor>& factors() const { return factors_; }
    const DomainFactor& factor(int j) const { return factors_[static_cast<std::size_t>(j)]; }

    double volume() const {
        double v = 1.0;
        for (const auto& f : factors_) v *= f.length();
        return v;
    }

    double max_cell_extent(int resolution) const {
        double h = 0.0;
        for (const auto& f : factors_) h = std::max(h, f.length() / resolution);
        return h;
    }

    bool contains(const Eigen::VectorXd& q, double tol = 1e-12) const {
        if (q.size() != dim()) return false;
        for (int j = 0; j < dim(); ++j) {
            const auto& f = factor(j);
            if (f.is_periodic()) continue;
            if (q[j] < f.lo - tol || q[j] > f.hi + tol) return false;
        }
        return true;
    }

    Eigen::VectorXd clamp(Eigen::VectorXd q) const {
        for (int j = 0; j < dim(); ++j) {
            const auto& f = factor(j);
            if (f.is_periodic()) {
                q[j] = q[j] - f.hi * std::floor(q[j] / f.hi);
            } else {
                q[j] = std::clamp(q[j], f.lo, f.hi);
            }
        }
        return q;
    }

    // Shortest parameter-space displacement a - b respecting periodic wrap.
    Eigen::VectorXd displacement(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        Eigen::VectorXd d = a - b;
        for (int j = 0; j < dim(); ++j) {
            const auto& f = factor(j);
            if (f.is_periodic()) {
                d[j] = d[j] - f.hi * std::round(d[j] / f.hi);
            }
        }
        return d;
    }

    // Drop factor `axis` (frozen at its lower bound); used for boundary faces.
    ParamDomain without_axis(int axis) const {
        std::vector<DomainFactor> fs;
        for (int j = 0; j < dim(); ++j)
            if (j != axis) fs.push_back(factor(j));
        return ParamDomain(std::move(fs));
    }

  private:
    std::vector<DomainFactor> factors_;
};

inline int degeneracy_index(const ParamDomain& Q, const Eigen::VectorXd& q, double tol = 1e-12) {
    if (!Q.contains(q, tol)) throw std::invalid_argument("point outside parameter domain");
    int d = 0;
    for (int j = 0; j < Q.corner_degree(); ++j)
        if (std::abs(q[j]) <= tol) ++d;
    return d;
}

// ---------------------------------------------------------------------------
// Tensor-product mesh cells carrying Gauss-Legendre nodes.

struct MeshCell {
    Eigen::VectorXd lo, hi;

    double volume() const {
        double v = 1.0;
        for (int j = 0; j < lo.size(); ++j) v *= hi[j] - lo[j];
        return v;
    }
    Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
};

inline std::vector<MeshCell> mesh_domain(const ParamDomain& Q, int resolution) {
    if (resolution < 1) throw std::invalid_argument("resolution must be >= 1");
    const int n = Q.dim();
    std::vector<MeshCell> cells;
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    const std::size_t total = [&] {
        std::size_t t = 1;
        for (int j = 0; j < n; ++j) t *= static_cast<std::size_t>(resolution);
        return t;
    }();
    cells.reserve(total);
    for (std::size_t c = 0; c < total; ++c) {
        MeshCell cell;
        cell.lo.resize(n);
        cell.hi.resize(n);
        for (int j = 0; j < n; ++j) {
            const auto& f = Q.factor(j);
            const double h = f.length() / resolution;
            cell.lo[j] = f.lo + idx[static_cast<std::size_t>(j)] * h;
            cell.hi[j] = f.lo + (idx[static_cast<std::size_t>(j)] + 1) * h;
        }
        cells.push_back(std::move(cell));
        for (int j = n - 1; j >= 0; --j) {
            if (++idx[static_cast<std::size_t>(j)] < resolution) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
    }
    return cells;
}

// Visit the tensor Gauss-Legendre nodes of one cell in lexicographic order.
template <typename Fn>
void for_each_quad_node(const MeshCell& cell, int order, Fn&& fn) {
    const int n = static_cast<int>(cell.lo.size());
    const QuadRule& rule = gauss_legendre(order);
    if (n == 0) {  // 0-dimensional cell: a single point of weight 1
        fn(Eigen::VectorXd(0), 1.0);
        return;
    }
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    const std::size_t total = [&] {
        std::size_t t = 1;
        for (int j = 0; j < n; ++j) t *= static_cast<std::size_t>(order);
        return t;
    }();
    Eigen::VectorXd q(n);
    for (std::size_t k = 0; k < total; ++k) {
        double w = 1.0;
        for (int j = 0; j < n; ++j) {
            const double half = 0.5 * (cell.hi[j] - cell.lo[j]);
            q[j] = cell.lo[j] + half * (1.0 + rule.nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])]);
            w *= half * rule.weights[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        }
        fn(q, w);
        for (int j = n - 1; j >= 0; --j) {
            if (++idx[static_cast<std::size_t>(j)] < order) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
    }
}

// Grid vertices of the mesh; periodic axes omit the duplicate endpoint.
inline std::vector<Eigen::VectorXd> mesh_vertices(const ParamDomain& Q, int resolution) {
    const int n = Q.dim();
    std::vector<int> counts(static_cast<std::size_t>(n));
    std::size_t total = 1;
    for (int j = 0; j < n; ++j) {
        counts[static_cast<std::size_t>(j)] = Q.factor(j).is_periodic() ? resolution : resolution + 1;
        total *= static_cast<std::size_t>(counts[static_cast<std::size_t>(j)]);
    }
    std::vector<Eigen::VectorXd> verts;
    verts.reserve(total);
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    for (std::size_t k = 0; k < total; ++k) {
        Eigen::VectorXd q(n);
        for (int j = 0; j < n; ++j) {
            const auto& f = Q.factor(j);
            q[j] = f.lo + idx[static_cast<std::size_t>(j)] * f.length() / resolution;
        }
        verts.push_back(std::move(q));
        for (int j = n - 1; j >= 0; --j) {
            if (++idx[static_cast<std::size_t>(j)] < counts[static_cast<std::size_t>(j)]) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
    }
    return verts;
}

// ---------------------------------------------------------------------------
// Branch: oriented parametrized n-manifold-with-corners inside a chart.

struct ClosestPoint {
    Eigen::VectorXd param;
    double distance;
};

class Branch {
  public:
    Branch() = default;
    Branch(std::shared_ptr<const Chart> chart, ParamDomain domain, SmoothMap param, int orientation,
           int resolution, std::string name = "")
        : chart_(std::move(chart)),
          domain_(std::move(domain)),
          param_(std::move(param)),
          orientation_(orientation),
          resolution_(resolution),
          name_(std::move(name)) {
        if (orientation_ != 1 && orientation_ != -1)
            throw std::invalid_argument("orientation must be +1 or -1");
        if (param_.arity() != domain_.dim())
            throw std::invalid_argument("parametrization arity != domain dimension");
        if (chart_ && param_.coarity() != chart_->dim())
            throw std::invalid_argument("parametrization coarity != chart dimension");
    }

    const std::shared_ptr<const Chart>& chart() const { return chart_; }
    const ParamDomain& domain() const { return domain_; }
    const SmoothMap& parametrization() const { return param_; }
    int orientation() const { return orientation_; }
    int resolution() const { return resolution_; }
    const std::string& name() const { return name_; }
    int dim() const { return domain_.dim(); }

    Eigen::VectorXd point(const Eigen::VectorXd& q) const { return param_(q); }
    Eigen::MatrixXd tangent_frame(const Eigen::VectorXd& q) const { return param_.jacobian(q); }

    Branch with_resolution(int r) const {
        return Branch(chart_, domain_, param_, orientation_, r, name_);
    }
    Branch with_orientation(int o) const {
        return Branch(chart_, domain_, param_, o, resolution_, name_);
    }

    std::vector<Eigen::VectorXd> vertices() const { return mesh_vertices(domain_, resolution_); }
    std::vector<MeshCell> cells() const { return mesh_domain(domain_, resolution_); }

    // Nearest vertex seed followed by Gauss-Newton refinement of
    // |Phi(q) - x|^2, clamped into the domain.
    ClosestPoint closest_point(const Eigen::VectorXd& x) const {
        const auto verts = vertices();
        double best = std::numeric_limits<double>::infinity();
        Eigen::VectorXd q;
        for (const auto& v : verts) {
            const double d = (param_(v) - x).norm();
            if (d < best) {
                best = d;
                q = v;
            }
        }
        for (int it = 0; it < 40; ++it) {
            const Eigen::VectorXd r = x - param_(q);
            if (r.norm() < 1e-14) break;
            const Eigen::MatrixXd J = param_.jacobian(q);
            const Eigen::MatrixXd JtJ = J.transpose() * J;
            const Eigen::VectorXd step = JtJ.ldlt().solve(J.transpose() * r);
            if (!step.allFinite() || step.norm() < 1e-15) break;
            q = domain_.clamp(q + step);
        }
        return {q, (param_(q) - x).norm()};
    }

    struct ValidationReport {
        bool ok = true;
        double min_singular_value = std::numeric_limits<double>::infinity();
        double min_vertex_separation = std::numeric_limits<double>::infinity();
        bool inside_chart = true;
        std::string message;
    };

    // Immersion at quadrature nodes, vertex-level injectivity proxy, and
    // chart containment.
    ValidationReport validate(int quad_order = 5, double tol = 1e-9) const {
        ValidationReport rep;
        for (const auto& cell : cells()) {
            for_each_quad_node(cell, quad_order, [&](const Eigen::VectorXd& q, double) {
                const Eigen::MatrixXd J = param_.jacobian(q);
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
                rep.min_singular_value =
                    std::min(rep.min_singular_value, svd.singularValues().minCoeff());
                if (chart_ && !chart_->domain().contains(param_(q), tol)) rep.inside_chart = false;
            });
        }
        const auto verts = vertices();
        // injectivity is only meaningful where the map is immersive; collapsed
        // vertices (e.g. a polar center) are exempt
        std::vector<bool> immersive(verts.size(), true);
        for (std::size_t a = 0; a < verts.size(); ++a) {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(param_.jacobian(verts[a]));
            if (svd.singularValues().minCoeff() <= tol) immersive[a] = false;
        }
        for (std::size_t a = 0; a < verts.size(); ++a)
            for (std::size_t b = a + 1; b < verts.size(); ++b) {
                if (!immersive[a] || !immersive[b]) continue;
                const double dp = domain_.displacement(verts[a], verts[b]).norm();
                if (dp < 1e-12) continue;
                const double dx = (param_(verts[a]) - param_(verts[b])).norm();
                if (dx <= tol) rep.min_vertex_separation = std::min(rep.min_vertex_separation, dx);
            }
        if (rep.min_singular_value <= tol) {
            rep.ok = false;
            rep.message = "parametrization is not an immersion at sample resolution";
        } else if (rep.min_vertex_separation <= tol) {
            rep.ok = false;
            rep.message = "parametrization identifies distinct mesh vertices";
        } else if (!rep.inside_chart) {
            rep.ok = false;
            rep.message = "branch leaves the chart domain";
        }
        return rep;
    }

  private:
    std::shared_ptr<const Chart> chart_;
    ParamDomain domain_;
    SmoothMap param_;
    int orientation_ = 1;
    int resolution_ = 8;
    std::string name_;
};

struct BoundaryFace {
    Branch face;     // (n-1)-dimensional branch; parametrization is the frozen restriction
    int face_axis;   // quadrant coordinate frozen at 0, 0-based
};

// One face per quadrant coordinate; corner overlaps (d >= 2) are kept as-is
// since their mutual intersections carry no (n-1)-volume. The induced sign
// follows the outward-normal-first convention: the outward normal at
// q_j = 0 is -e_j, so face j (1-based) picks up (-1)^j.
inline std::vector<BoundaryFace> boundary_faces(const Branch& b) {
    std::vector<BoundaryFace> faces;
    const int d = b.domain().corner_degree();
    for (int j = 0; j < d; ++j) {
        std::vector<ExprAST> repl;
        int kept = 0;
        for (int v = 0; v < b.dim(); ++v) {
            if (v == j) {
                repl.push_back(std::make_shared<const ExprNode>(
                    ExprNode{NodeKind::RatLit, 0, Rational(0), 0, 0, nullptr, nullptr}));
            } else {
                repl.push_back(std::make_shared<const ExprNode>(
                    ExprNode{NodeKind::Var, kept++, {0}, 0, 0, nullptr, nullptr}));
            }
        }
        std::vector<ExprAST> comps;
        for (const auto& c : b.parametrization().components())
            comps.push_back(detail::substitute(c, repl));
        SmoothMap face_map(b.dim() - 1, std::move(comps));
        const int sign_factor = ((j + 1) % 2 == 1) ? -1 : 1;
        faces.push_back({Branch(b.chart(), b.domain().without_axis(j), std::move(face_map),
                                b.orientation() * sign_factor, b.resolution(),
                                b.name() + "/face" + std::to_string(j)),
                         j});
    }
    return faces;
}

// Branch in the graph form Phi(q) = frame * q + A(q), with A(0) = 0 and
// DA(0) = 0 so the tangent at the origin is the given frame.
inline Branch branch_from_graph(std::shared_ptr<const Chart> chart,
                                const Eigen::MatrixXd& tangent_frame, const SmoothMap& A,
                                const ParamDomain& Q, int orientation = 1, int resolution = 8,
                                double tol = 1e-9) {
    const int n = Q.dim();
    const int N = static_cast<int>(tangent_frame.rows());
    if (tangent_frame.cols() != n) throw std::invalid_argument("frame columns != domain dimension");
    if (A.arity() != n || A.coarity() != N)
        throw std::invalid_argument("graph correction has wrong dimensions");
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(n);
    if (A(origin).norm() > tol) throw std::invalid_argument("graph correction A(0) != 0");
    if (A.jacobian(origin).norm() > tol) throw std::invalid_argument("graph correction DA(0) != 0");

    auto lit = [](double v) {
        return std::make_shared<const ExprNode>(
            ExprNode{NodeKind::DecLit, 0, {0}, v, 0, nullptr, nullptr});
    };
    auto var = [](int i) {
        return std::make_shared<const ExprNode>(
            ExprNode{NodeKind::Var, i, {0}, 0, 0, nullptr, nullptr});
    };
    auto add = [](ExprAST a, ExprAST b) {
        return std::make_shared<const ExprNode>(
            ExprNode{NodeKind::Add, 0, {0}, 0, 0, std::move(a), std::move(b)});
    };
    auto mul = [](ExprAST a, ExprAST b) {
        return std::make_shared<const ExprNode>(
            ExprNode{NodeKind::Mul, 0, {0}, 0, 0, std::move(a), std::move(b)});
    };
    std::vector<ExprAST> comps;
    for (int i = 0; i < N; ++i) {
        ExprAST acc = A.components()[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) acc = add(acc, mul(lit(tangent_frame(i, j)), var(j)));
        comps.push_back(acc);
    }
    return Branch(std::move(chart), Q, SmoothMap(n, std::move(comps)), orientation, resolution,
                  "graph");
}

struct InvarianceReport {
    double max_violation = 0.0;
    int worst_group_element = -1;
    Eigen::VectorXd witness;
    bool passed(double tol) const { return max_violation <= tol; }
};

// Setwise invariance of the branch union under the group action, measured
// at mesh vertices against the projection-refined distance to the union.
inline InvarianceReport check_group_invariance(const Chart& chart,
                                               const std::vector<Branch>& branches) {
    InvarianceReport rep;
    for (const auto& b : branches) {
        for (const auto& v : b.vertices()) {
            const Eigen::VectorXd x = b.point(v);
            for (int g = 0; g < chart.group_order(); ++g) {
                const Eigen::VectorXd y = chart.apply(g, x);
                double dist = std::numeric_limits<double>::infinity();
                for (const auto& other : branches)
                    dist = std::min(dist, other.closest_point(y).distance);
                if (dist > rep.max_violation) {
                    rep.max_violation = dist;
                    rep.worst_group_element = g;
                    rep.witness = y;
                }
            }
        }
    }
    return rep;
}

}  // namespace branchform
