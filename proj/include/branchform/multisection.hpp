#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "branchform/expr.hpp"
#include "branchform/forms.hpp"
#include "branchform/geometry.hpp"
#include "branchform/quadrature.hpp"
#include "branchform/rational.hpp"

namespace branchform {

struct GoodPositionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PropernessError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Section of a trivial rank-r bundle over a chart.
struct ToySection {
    std::shared_ptr<const Chart> chart;
    SmoothMap map;  // R^N -> R^r

    ToySection(std::shared_ptr<const Chart> c, SmoothMap m)
        : chart(std::move(c)), map(std::move(m)) {
        if (map.arity() != chart->dim())
            throw std::invalid_argument("section arity != chart dimension");
    }
    int base_dim() const { return chart->dim(); }
    int fiber_dim() const { return map.coarity(); }
};

// Finitely many local sections with exact rational weights summing to 1.
class Multisection {
  public:
    Multisection(std::vector<SmoothMap> sections, std::vector<Rational> weights)
        : sections_(std::move(sections)), weights_(std::move(weights)) {
        if (sections_.empty() || sections_.size() != weights_.size())
            throw std::invalid_argument("multisection needs matching sections and weights");
        Rational sum(0);
        for (const auto& w : weights_) {
            if (w <= Rational(0)) throw std::invalid_argument("multisection weights must be positive");
            sum += w;
        }
        if (sum != Rational(1)) throw std::invalid_argument("multisection weights must sum to 1");
    }

    static Multisection trivial(int base_dim, int fiber_dim) {
        std::vector<ExprAST> zeros;
        for (int i = 0; i < fiber_dim; ++i)
            zeros.push_back(std::make_shared<const ExprNode>(
                ExprNode{NodeKind::RatLit, 0, Rational(0), 0, 0, nullptr, nullptr}));
        return Multisection({SmoothMap(base_dim, zeros)}, {Rational(1)});
    }

    std::size_t count() const { return sections_.size(); }
    const SmoothMap& section(std::size_t j) const { return sections_[j]; }
    const Rational& weight(std::size_t j) const { return weights_[j]; }

    // Lambda(e) at base point x: sum of weights of sections hitting e.
    Rational lambda_value(const Eigen::VectorXd& x, const Eigen::VectorXd& e,
                          double tol = 1e-9) const {
        Rational sum(0);  // empty sum stays 0
        for (std::size_t j = 0; j < sections_.size(); ++j)
            if ((sections_[j](x) - e).norm() <= tol) sum += weights_[j];
        return sum;
    }

  private:
    std::vector<SmoothMap> sections_;
    std::vector<Rational> weights_;
};

struct SolutionPoint {
    Eigen::VectorXd x;
    std::size_t section = 0;
    int sign = 0;  // sign det D(f - s_j)
    Rational weight{0};
};

struct SolutionCurve {
    std::vector<Eigen::VectorXd> points;  // oriented polyline on {f = s_j}
    std::size_t section = 0;
    Rational weight{0};
    bool closed = false;
};

struct SolutionSet {
    int dim = 0;  // 0 or 1
    std::vector<SolutionPoint> points;
    std::vector<SolutionCurve> curves;
};

namespace detail {

inline double box_lo(const ChartDomain& d, int j) {
    return d.kind == ChartDomain::Kind::Box ? d.lo[j] : d.center[j] - d.radius;
}
inline double box_hi(const ChartDomain& d, int j) {
    return d.kind == ChartDomain::Kind::Box ? d.hi[j] : d.center[j] + d.radius;
}

// One-dimensional zero finding: sign-change bracketing on the sample grid
// followed by Newton polish.
inline std::vector<SolutionPoint> solve_dim0(const SmoothMap& g, const ChartDomain& dom,
                                             int resolution, double floor_tol) {
    const double a = box_lo(dom, 0), b = box_hi(dom, 0);
    std::vector<SolutionPoint> out;
    auto val = [&](double x) {
        Eigen::VectorXd p(1);
        p << x;
        return g(p)[0];
    };
    auto slope = [&](double x) {
        Eigen::VectorXd p(1);
        p << x;
        return g.jacobian(p)(0, 0);
    };
    double prev = val(a);
    for (int k = 1; k <= resolution; ++k) {
        const double x1 = a + (b - a) * k / resolution;
        const double cur = val(x1);
        const double x0 = a + (b - a) * (k - 1) / resolution;
        if (prev == 0.0 || prev * cur < 0.0) {
            double lo = x0, hi = x1, x = 0.5 * (x0 + x1);
            if (prev == 0.0) x = x0;
            for (int it = 0; it < 80; ++it) {
                const double fx = val(x);
                if (std::abs(fx) <= 1e-15) break;
                const double dfx = slope(x);
                double step = std::abs(dfx) > 0.0 ? fx / dfx : 0.0;
                double next = x - step;
                if (step == 0.0 || next <= lo || next >= hi) next = 0.5 * (lo + hi);
                if (val(lo) * val(next) <= 0.0) hi = next; else lo = next;
                if (std::abs(next - x) < 1e-13 && std::abs(val(next)) < 1e-12) { x = next; break; }
                x = next;
            }
            const double dfx = slope(x);
            if (std::abs(dfx) < floor_tol)
                throw GoodPositionError("not in good position: degenerate zero near x = " +
                                        std::to_string(x));
            SolutionPoint p;
            p.x = Eigen::VectorXd(1);
            p.x << x;
            p.sign = dfx > 0.0 ? 1 : -1;
            // skip duplicates produced by a node that is itself a zero
            bool dup = false;
            for (const auto& q : out)
                if (std::abs(q.x[0] - x) < 1e-9) dup = true;
            if (!dup) out.push_back(std::move(p));
        }
        prev = cur;
    }
    return out;
}

// Marching-squares extraction of {g = 0} for g: R^2 -> R, with endpoints
// projected onto the zero set by a few Newton steps along the gradient.
inline std::vector<SolutionCurve> solve_dim1(const SmoothMap& g, const ChartDomain& dom,
                                             int resolution, double floor_tol) {
    const double ax = box_lo(dom, 0), bx = box_hi(dom, 0);
    const double ay = box_lo(dom, 1), by = box_hi(dom, 1);
    auto val = [&](double x, double y) {
        Eigen::VectorXd p(2);
        p << x, y;
        return g(p)[0];
    };
    auto grad = [&](const Eigen::VectorXd& p) {
        return Eigen::Vector2d(g.jacobian(p).row(0).transpose());
    };
    auto project = [&](Eigen::VectorXd p) {
        for (int it = 0; it < 30; ++it) {
            const double f = val(p[0], p[1]);
            if (std::abs(f) <= 1e-12) break;
            const Eigen::Vector2d n = grad(p);
            const double n2 = n.squaredNorm();
            if (n2 < floor_tol * floor_tol)
                throw GoodPositionError("not in good position: vanishing gradient on zero set");
            p -= (f / n2) * n;
        }
        return p;
    };

    // collect one segment per crossed cell, then stitch into polylines
    struct Seg {
        Eigen::VectorXd a, b;
    };
    std::vector<Seg> segs;
    const double hx = (bx - ax) / resolution, hy = (by - ay) / resolution;
    for (int i = 0; i < resolution; ++i)
        for (int j = 0; j < resolution; ++j) {
            const double x0 = ax + i * hx, y0 = ay + j * hy;
            const double c00 = val(x0, y0), c10 = val(x0 + hx, y0);
            const double c01 = val(x0, y0 + hy), c11 = val(x0 + hx, y0 + hy);
            std::vector<Eigen::VectorXd> hits;
            auto edge = [&](double v0, double v1, double px0, double py0, double px1, double py1) {
                if (v0 == 0.0 && v1 == 0.0) return;
                if (v0 * v1 < 0.0 || v0 == 0.0) {
                    const double t = v0 == 0.0 ? 0.0 : v0 / (v0 - v1);
                    Eigen::VectorXd p(2);
                    p << px0 + t * (px1 - px0), py0 + t * (py1 - py0);
                    hits.push_back(p);
                }
            };
            edge(c00, c10, x0, y0, x0 + hx, y0);
            edge(c10, c11, x0 + hx, y0, x0 + hx, y0 + hy);
            edge(c11, c01, x0 + hx, y0 + hy, x0, y0 + hy);
            edge(c01, c00, x0, y0 + hy, x0, y0);
            if (hits.size() == 2) {
                Seg s{project(hits[0]), project(hits[1])};
                if ((s.a - s.b).norm() > 1e-12) segs.push_back(std::move(s));
            }
        }

    // stitch segments endpoint-to-endpoint
    std::vector<SolutionCurve> curves;
    std::vector<bool> used(segs.size(), false);
    const double join = 1e-7 * std::max(hx, hy) + 1e-9;
    for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
        if (used[s0]) continue;
        used[s0] = true;
        std::vector<Eigen::VectorXd> line{segs[s0].a, segs[s0].b};
        bool grew = true;
        while (grew) {
            grew = false;
            for (std::size_t k = 0; k < segs.size(); ++k) {
                if (used[k]) continue;
                if ((segs[k].a - line.back()).norm() < join) {
                    line.push_back(segs[k].b);
                    used[k] = true;
                    grew = true;
                } else if ((segs[k].b - line.back()).norm() < join) {
                    line.push_back(segs[k].a);
                    used[k] = true;
                    grew = true;
                } else if ((segs[k].a - line.front()).norm() < join) {
                    line.insert(line.begin(), segs[k].b);
                    used[k] = true;
                    grew = true;
                } else if ((segs[k].b - line.front()).norm() < join) {
                    line.insert(line.begin(), segs[k].a);
                    used[k] = true;
                    grew = true;
                }
            }
        }
        SolutionCurve c;
        c.closed = (line.front() - line.back()).norm() < join && line.size() > 2;
        // orient so that (tangent, gradient) is a positive ambient frame
        if (line.size() >= 2) {
            const Eigen::Vector2d t = (line[1] - line[0]).head<2>();
            const Eigen::Vector2d n = grad(line[0]);
            if (t[0] * n[1] - t[1] * n[0] < 0.0) std::reverse(line.begin(), line.end());
        }
        c.points = std::move(line);
        curves.push_back(std::move(c));
    }
    return curves;
}

}  // namespace detail

// Zero sets of f - s_j per local section, with weights and signs attached.
inline SolutionSet solve(const ToySection& f, const Multisection& m, int resolution = 256,
                         double floor_tol = 1e-8) {
    const int N = f.base_dim();
    const int r = f.fiber_dim();
    SolutionSet sol;
    if (N == r) {
        if (N != 1) throw std::invalid_argument("zero-dimensional solve supports base dim 1");
        sol.dim = 0;
        for (std::size_t j = 0; j < m.count(); ++j) {
            if (m.section(j).coarity() != r)
                throw std::invalid_argument("section fiber dimension mismatch");
            std::vector<ExprAST> comps;
            for (int c = 0; c < r; ++c)
                comps.push_back(std::make_shared<const ExprNode>(
                    ExprNode{NodeKind::Sub, 0, {0}, 0, 0, f.map.components()[static_cast<std::size_t>(c)],
                             m.section(j).components()[static_cast<std::size_t>(c)]}));
            SmoothMap g(N, std::move(comps));
            for (auto p : detail::solve_dim0(g, f.chart->domain(), resolution, floor_tol)) {
                p.section = j;
                p.weight = m.weight(j);
                sol.points.push_back(std::move(p));
            }
        }
        std::sort(sol.points.begin(), sol.points.end(), [](const auto& a, const auto& b) {
            return a.section != b.section ? a.section < b.section : a.x[0] < b.x[0];
        });
    } else if (N == r + 1) {
        if (N != 2) throw std::invalid_argument("one-dimensional solve supports base dim 2");
        sol.dim = 1;
        for (std::size_t j = 0; j < m.count(); ++j) {
            std::vector<ExprAST> comps;
            for (int c = 0; c < r; ++c)
                comps.push_back(std::make_shared<const ExprNode>(
                    ExprNode{NodeKind::Sub, 0, {0}, 0, 0, f.map.components()[static_cast<std::size_t>(c)],
                             m.section(j).components()[static_cast<std::size_t>(c)]}));
            SmoothMap g(N, std::move(comps));
            for (auto c : detail::solve_dim1(g, f.chart->domain(), resolution, floor_tol)) {
                c.section = j;
                c.weight = m.weight(j);
                sol.curves.push_back(std::move(c));
            }
        }
    } else {
        throw std::invalid_argument("solve supports index 0 or 1 only");
    }
    return sol;
}

// Weighted signed count sum_j sigma_j sum_{x in Z_j} sign(x); exact.
inline Rational signed_count(const SolutionSet& sol) {
    if (sol.dim != 0) throw std::invalid_argument("signed count needs a 0-dimensional solution set");
    Rational sum(0);
    for (const auto& p : sol.points) sum += p.weight * Rational(p.sign);
    return sum;
}

// Psi = int over the weighted solution set of omega minus the weighted
// boundary evaluation of tau. Zero-dimensional case: omega is a 0-form and
// the integral is the weighted signed sum of its values; no boundary.
inline double invariant_psi(const SolutionSet& sol, const FormPtr& omega,
                            const FormPtr& tau = nullptr, int quad_order = 5) {
    KahanSum sum;
    if (sol.dim == 0) {
        if (omega->degree() != 0) throw std::invalid_argument("0-dim invariant needs a 0-form");
        for (const auto& p : sol.points)
            sum.add(to_double(p.weight) * p.sign * omega->eval(p.x, {}));
        return sum.value();
    }
    if (omega->degree() != 1) throw std::invalid_argument("1-dim invariant needs a 1-form");
    const QuadRule& rule = gauss_legendre(quad_order);
    for (const auto& c : sol.curves) {
        KahanSum line;
        for (std::size_t k = 0; k + 1 < c.points.size(); ++k) {
            const Eigen::VectorXd a = c.points[k], b = c.points[k + 1];
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double t = 0.5 * (1.0 + rule.nodes[i]);
                const Eigen::VectorXd x = a + t * (b - a);
                line.add(0.5 * rule.weights[i] * omega->eval(x, {b - a}));
            }
        }
        sum.add(to_double(c.weight) * line.value());
        if (!c.closed && tau) {
            const double bd = tau->eval(c.points.back(), {}) - tau->eval(c.points.front(), {});
            sum.add(-to_double(c.weight) * bd);
        }
    }
    return sum.value();
}

struct HomotopyStep {
    double t = 0.0;
    double psi = 0.0;
    bool flagged = false;  // non-transverse at this t, excluded from the sweep
    std::string note;
};

struct HomotopyReport {
    std::vector<HomotopyStep> steps;
    double max_deviation = 0.0;  // over unflagged steps, vs the first unflagged psi
    int flagged_count = 0;
    bool proper = true;
    std::string properness_witness;
};

// Sweep f_t (last argument is t) over [0,1]; zeros must stay inside the
// margin-shrunk chart box at every sampled t (properness proxy).
inline HomotopyReport homotopy_invariance_check(const std::shared_ptr<const Chart>& chart,
                                                const SmoothMap& homotopy, const Multisection& m,
                                                const FormPtr& omega, int steps = 21,
                                                int resolution = 256, double margin = 0.05) {
    if (homotopy.arity() != chart->dim() + 1)
        throw std::invalid_argument("homotopy arity must be base dim + 1");
    HomotopyReport rep;
    std::optional<double> base;
    for (int k = 0; k < steps; ++k) {
        const double t = steps == 1 ? 0.0 : static_cast<double>(k) / (steps - 1);
        // freeze t by substitution so derivatives stay exact
        std::vector<ExprAST> repl;
        for (int v = 0; v < chart->dim(); ++v)
            repl.push_back(std::make_shared<const ExprNode>(
                ExprNode{NodeKind::Var, v, {0}, 0, 0, nullptr, nullptr}));
        repl.push_back(std::make_shared<const ExprNode>(
            ExprNode{NodeKind::DecLit, 0, {0}, t, 0, nullptr, nullptr}));
        std::vector<ExprAST> comps;
        for (const auto& c : homotopy.components()) comps.push_back(detail::substitute(c, repl));
        const ToySection ft(chart, SmoothMap(chart->dim(), std::move(comps)));

        HomotopyStep step;
        step.t = t;
        try {
            const SolutionSet sol = solve(ft, m, resolution);
            for (const auto& p : sol.points) {
                const double lo = detail::box_lo(chart->domain(), 0) + margin;
                const double hi = detail::box_hi(chart->domain(), 0) - margin;
                if (p.x[0] < lo || p.x[0] > hi) {
                    rep.proper = false;
                    rep.properness_witness =
                        "zero at x = " + std::to_string(p.x[0]) + " escapes at t = " + std::to_string(t);
                }
            }
            step.psi = invariant_psi(sol, omega);
            if (!base) base = step.psi;
            rep.max_deviation = std::max(rep.max_deviation, std::abs(step.psi - *base));
        } catch (const GoodPositionError& e) {
            step.flagged = true;
            step.note = e.what();
            ++rep.flagged_count;
        }
        rep.steps.push_back(std::move(step));
    }
    return rep;
}

}  // namespace branchform
