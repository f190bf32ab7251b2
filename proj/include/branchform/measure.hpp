#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "branchform/branched.hpp"
#include "branchform/forms.hpp"
#include "branchform/geometry.hpp"
#include "branchform/quadrature.hpp"
#include "branchform/rational.hpp"

namespace branchform {

// ---------------------------------------------------------------------------
// Integration regions. A region is a predicate on ambient points applied at
// cell centers, so a cell is either fully in or fully out and additivity
// over disjoint cell unions is exact.

class Region {
  public:
    static Region all() {
        Region r;
        r.everything_ = true;
        return r;
    }
    static Region predicate(std::function<bool(const Eigen::VectorXd&)> p) {
        Region r;
        r.pred_ = std::move(p);
        return r;
    }
    static Region ball(Eigen::VectorXd center, double radius) {
        return predicate([c = std::move(center), radius](const Eigen::VectorXd& x) {
            return (x - c).norm() <= radius;
        });
    }

    bool is_all() const { return everything_; }
    bool contains(const Eigen::VectorXd& x) const { return everything_ || pred_(x); }
    bool includes_cell(const Branch& b, const MeshCell& cell) const {
        return everything_ || pred_(b.point(cell.center()));
    }

    // Orbit of the region under the chart group: y in result iff some
    // group translate of y lies in this region.
    Region saturate(std::shared_ptr<const Chart> chart) const {
        if (everything_) return *this;
        return predicate([self = *this, chart](const Eigen::VectorXd& x) {
            for (int g = 0; g < chart->group_order(); ++g)
                if (self.contains(chart->apply(g, x))) return true;
            return false;
        });
    }

  private:
    bool everything_ = false;
    std::function<bool(const Eigen::VectorXd&)> pred_;
};

struct SaturationWitness {
    bool ok = true;
    int group_element = -1;
    Eigen::VectorXd point;
};

// x in region must imply phi_g(x) in region, checked at cell centers of the
// structure's branch meshes.
inline SaturationWitness region_saturation_defect(const BranchingStructure& s, const Region& K) {
    SaturationWitness w;
    if (K.is_all()) return w;
    const auto& chart = *s.chart();
    for (const auto& b : s.branches())
        for (const auto& cell : b.cells()) {
            const Eigen::VectorXd x = b.point(cell.center());
            if (!K.contains(x)) continue;
            for (int g = 0; g < chart.group_order(); ++g) {
                const Eigen::VectorXd y = chart.apply(g, x);
                // y must land in K whenever it is on the support at all
                bool on_support = false;
                for (const auto& other : s.branches())
                    if (other.closest_point(y).distance <= s.tolerances().membership)
                        on_support = true;
                if (on_support && !K.contains(y)) {
                    w.ok = false;
                    w.group_element = g;
                    w.point = x;
                    return w;
                }
            }
        }
    return w;
}

// ---------------------------------------------------------------------------

struct MeasureResult {
    double value = 0.0;
    std::vector<double> contributions;   // per branch (or per face), prefactor included
    std::vector<Rational> prefactors;    // exact (1/#G_e) * sigma_i per contribution
};

struct IntegrationOptions {
    int quad_order = 5;
    int threads = 1;
};

namespace detail {

// Per-cell quadrature sums computed independently (parallelizable), then
// combined by compensated summation in cell order; the result is identical
// for any thread count.
inline double sum_cells(std::size_t count, int threads,
                        const std::function<double(std::size_t)>& cell_value) {
    std::vector<double> vals(count, 0.0);
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) vals[i] = cell_value(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
                        vals[i] = cell_value(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(t)] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    KahanSum sum;
    for (double v : vals) sum.add(v);
    return sum.value();
}

}  // namespace detail

// Integral of a top-degree form over the branch, restricted to the cells of
// K. The pullback along the parametrization is evaluated on the standard
// parameter frame at tensor Gauss-Legendre nodes.
inline double integrate_branch(const FormPtr& omega, const Branch& b, const Region& K,
                               const IntegrationOptions& opt = {}) {
    const int n = b.dim();
    if (omega->degree() != n)
        throw std::invalid_argument("form degree " + std::to_string(omega->degree()) +
                                    " != branch dimension " + std::to_string(n));
    const auto pulled = pullback(omega, b.parametrization());
    std::vector<Eigen::VectorXd> frame;
    for (int j = 0; j < n; ++j) frame.push_back(Eigen::VectorXd::Unit(n, j));
    const auto cells = b.cells();
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (K.includes_cell(b, cells[i])) active.push_back(i);
    const double total = detail::sum_cells(
        active.size(), opt.threads, [&](std::size_t k) {
            KahanSum cell_sum;
            for_each_quad_node(cells[active[k]], opt.quad_order,
                               [&](const Eigen::VectorXd& q, double w) {
                                   cell_sum.add(w * pulled->eval(q, frame));
                               });
            return cell_sum.value();
        });
    return b.orientation() * total;
}

// Dimension-zero counterpart: a branch degenerated to signed weighted
// points does not occur here; see multisection.hpp.

inline Rational effective_order(const Chart& chart) {
    return EffectiveQuotient::compute(chart).effective_order;
}

// mu_omega(K) = (1/#G_e) sum_i sigma_i int_{K_i} omega|M_i
inline MeasureResult chart_measure(const BranchingStructure& s, const FormPtr& omega,
                                   const Region& K, const IntegrationOptions& opt = {}) {
    const auto sat = region_saturation_defect(s, K);
    if (!sat.ok)
        throw std::invalid_argument("region is not group-saturated (element " +
                                    s.chart()->element_name(sat.group_element) + ")");
    const Rational inv_ge = Rational(1) / effective_order(*s.chart());
    MeasureResult res;
    KahanSum total;
    for (std::size_t i = 0; i < s.branches().size(); ++i) {
        const Rational pre = inv_ge * s.weights()[i];
        const double c = to_double(pre) * integrate_branch(omega, s.branches()[i], K, opt);
        res.prefactors.push_back(pre);
        res.contributions.push_back(c);
        total.add(c);
    }
    res.value = total.value();
    return res;
}

// mu_tau(K) = (1/#G_e) sum_i sigma_i int_{K_i} tau|dM_i over the quadrant
// faces; face intersections carry no (n-1)-volume so no deduplication.
inline MeasureResult boundary_measure(const BranchingStructure& s, const FormPtr& tau,
                                      const Region& K, const IntegrationOptions& opt = {}) {
    if (tau->degree() != s.dim() - 1)
        throw std::invalid_argument("boundary form degree must be n-1");
    const Rational inv_ge = Rational(1) / effective_order(*s.chart());
    MeasureResult res;
    KahanSum total;
    for (std::size_t i = 0; i < s.branches().size(); ++i) {
        const Rational pre = inv_ge * s.weights()[i];
        for (const auto& f : boundary_faces(s.branches()[i])) {
            const double c = to_double(pre) * integrate_branch(tau, f.face, K, opt);
            res.prefactors.push_back(pre);
            res.contributions.push_back(c);
            total.add(c);
        }
    }
    res.value = total.value();
    return res;
}

// ---------------------------------------------------------------------------
// Partition of unity subordinate to a cover of chart-domain sets, built
// from the classical exp(1/(p^2-1)) bump and symmetrized over the group.

struct CoverGapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class PartitionOfUnity {
  public:
    PartitionOfUnity(std::shared_ptr<const Chart> chart, std::vector<ChartDomain> cover)
        : chart_(std::move(chart)), cover_(std::move(cover)) {
        if (cover_.empty()) throw std::invalid_argument("empty cover");
    }

    std::size_t size() const { return cover_.size(); }
    const std::vector<ChartDomain>& cover() const { return cover_; }

    // group-averaged un-normalized bump for cover set alpha
    double averaged_bump(std::size_t alpha, const Eigen::VectorXd& x) const {
        KahanSum sum;
        for (int g = 0; g < chart_->group_order(); ++g)
            sum.add(raw_bump(cover_[alpha], chart_->apply(g, x)));
        return sum.value() / chart_->group_order();
    }

    double weight(std::size_t alpha, const Eigen::VectorXd& x) const {
        KahanSum denom;
        for (std::size_t b = 0; b < cover_.size(); ++b) denom.add(averaged_bump(b, x));
        if (denom.value() == 0.0)
            throw CoverGapError("cover gap: no bump is positive at a support point");
        return averaged_bump(alpha, x) / denom.value();
    }

    std::function<double(const Eigen::VectorXd&)> weight_fn(std::size_t alpha) const {
        return [this, alpha](const Eigen::VectorXd& x) { return weight(alpha, x); };
    }

    double sum_defect(const std::vector<Eigen::VectorXd>& points) const {
        double worst = 0.0;
        for (const auto& x : points) {
            KahanSum s;
            for (std::size_t a = 0; a < cover_.size(); ++a) s.add(weight(a, x));
            worst = std::max(worst, std::abs(s.value() - 1.0));
        }
        return worst;
    }

    double invariance_defect(const std::vector<Eigen::VectorXd>& points) const {
        double worst = 0.0;
        for (const auto& x : points)
            for (int g = 0; g < chart_->group_order(); ++g)
                for (std::size_t a = 0; a < cover_.size(); ++a)
                    worst = std::max(worst,
                                     std::abs(weight(a, chart_->apply(g, x)) - weight(a, x)));
        return worst;
    }

  private:
    static double bump_1d(double p) {
        const double p2 = p * p;
        return p2 >= 1.0 ? 0.0 : std::exp(1.0 / (p2 - 1.0));
    }

    static double raw_bump(const ChartDomain& set, const Eigen::VectorXd& x) {
        if (set.kind == ChartDomain::Kind::Ball)
            return bump_1d((x - set.center).norm() / set.radius);
        double prod = 1.0;
        for (int j = 0; j < set.lo.size(); ++j) {
            const double mid = 0.5 * (set.lo[j] + set.hi[j]);
            const double half = 0.5 * (set.hi[j] - set.lo[j]);
            prod *= bump_1d((x[j] - mid) / half);
            if (prod == 0.0) return 0.0;
        }
        return prod;
    }

    std::shared_ptr<const Chart> chart_;
    std::vector<ChartDomain> cover_;
};

inline std::shared_ptr<const PartitionOfUnity> build_partition_of_unity(
    std::shared_ptr<const Chart> chart, std::vector<ChartDomain> cover) {
    return std::make_shared<PartitionOfUnity>(std::move(chart), std::move(cover));
}

// Quadrature nodes of all branches, for partition checks.
inline std::vector<Eigen::VectorXd> support_nodes(const BranchingStructure& s, int quad_order,
                                                  std::size_t cap = 512) {
    std::vector<Eigen::VectorXd> pts;
    for (const auto& b : s.branches())
        for (const auto& cell : b.cells()) {
            for_each_quad_node(cell, quad_order, [&](const Eigen::VectorXd& q, double) {
                if (pts.size() < cap) pts.push_back(b.point(q));
            });
            if (pts.size() >= cap) return pts;
        }
    return pts;
}

// Glued measure: sum over cover sets of the chart measure of the weighted
// form g_alpha * omega. With a one-set cover this collapses to
// chart_measure up to quadrature error.
inline MeasureResult global_measure(const BranchingStructure& s, const FormPtr& omega,
                                    const std::shared_ptr<const PartitionOfUnity>& pou,
                                    const Region& K = Region::all(),
                                    const IntegrationOptions& opt = {}) {
    MeasureResult res;
    KahanSum total;
    for (std::size_t a = 0; a < pou->size(); ++a) {
        const auto part = chart_measure(s, scale_form(pou->weight_fn(a), omega), K, opt);
        for (std::size_t i = 0; i < part.contributions.size(); ++i) {
            res.contributions.push_back(part.contributions[i]);
            res.prefactors.push_back(part.prefactors[i]);
        }
        total.add(part.value);
    }
    res.value = total.value();
    return res;
}

inline MeasureResult global_boundary_measure(const BranchingStructure& s, const FormPtr& tau,
                                             const std::shared_ptr<const PartitionOfUnity>& pou,
                                             const Region& K = Region::all(),
                                             const IntegrationOptions& opt = {}) {
    MeasureResult res;
    KahanSum total;
    for (std::size_t a = 0; a < pou->size(); ++a) {
        const auto part = boundary_measure(s, scale_form(pou->weight_fn(a), tau), K, opt);
        for (std::size_t i = 0; i < part.contributions.size(); ++i) {
            res.contributions.push_back(part.contributions[i]);
            res.prefactors.push_back(part.prefactors[i]);
        }
        total.add(part.value);
    }
    res.value = total.value();
    return res;
}

struct StokesResult {
    double interior = 0.0;  // mu_{d omega}(S)
    double boundary = 0.0;  // mu_omega(dS)
    double residual = 0.0;
};

inline StokesResult stokes_residual(const BranchingStructure& s, const FormPtr& omega,
                                    const std::shared_ptr<const PartitionOfUnity>& pou,
                                    const IntegrationOptions& opt = {}) {
    StokesResult r;
    r.interior = global_measure(s, exterior_derivative(omega), pou, Region::all(), opt).value;
    r.boundary = global_boundary_measure(s, omega, pou, Region::all(), opt).value;
    r.residual = r.interior - r.boundary;
    return r;
}

// ---------------------------------------------------------------------------
// Lemma-level verifiers.

struct IndependenceReport {
    bool theta_ok = true;
    ThetaMismatch mismatch;
    double value1 = 0.0, value2 = 0.0;
    double defect = 0.0;
    bool passed(double tol) const { return theta_ok && defect <= tol; }
};

inline IndependenceReport verify_independence(const BranchingStructure& s1,
                                              const BranchingStructure& s2, const FormPtr& omega,
                                              const Region& K,
                                              const IntegrationOptions& opt = {}) {
    IndependenceReport rep;
    const auto hu = halved_union(s1, s2);
    if (!hu.mismatch.ok) {
        rep.theta_ok = false;
        rep.mismatch = hu.mismatch;
        return rep;
    }
    rep.value1 = chart_measure(s1, omega, K, opt).value;
    rep.value2 = chart_measure(s2, omega, K, opt).value;
    rep.defect = std::abs(rep.value1 - rep.value2);
    return rep;
}

struct RestrictionReport {
    bool valid_neighborhood = true;
    std::string witness;
    int stabilizer_order = 0;
    int coset_count = 0;               // |R| = |G| / |H|
    Rational lhs{0}, rhs{0};           // (1/#G_e)*|R| and 1/#G~_e
    bool rational_ok = false;
    double measure_full = 0.0;         // computed in the ambient chart with G
    double measure_restricted = 0.0;   // computed in V with H
    double defect = 0.0;
    bool passed(double tol) const { return valid_neighborhood && rational_ok && defect <= tol; }
};

// V is the radius-r ball about x; H its (sampled) setwise stabilizer. The
// full-chart measure is taken over the G-orbit of V and compared with the
// H-normalized measure over V itself.
inline RestrictionReport verify_restriction(const BranchingStructure& s, const Eigen::VectorXd& x,
                                            double radius, const FormPtr& omega,
                                            const IntegrationOptions& opt = {},
                                            double tol = 1e-9) {
    RestrictionReport rep;
    const auto& chart = *s.chart();
    const int order = chart.group_order();

    std::vector<int> H;
    for (int g = 0; g < order; ++g)
        if ((chart.apply(g, x) - x).norm() <= tol) H.push_back(g);
    rep.stabilizer_order = static_cast<int>(H.size());
    if (order % rep.stabilizer_order != 0) {
        rep.valid_neighborhood = false;
        rep.witness = "stabilizer order does not divide group order";
        return rep;
    }
    rep.coset_count = order / rep.stabilizer_order;

    // phi_g(V) must be disjoint from V for g outside H, checked on samples
    for (int g = 0; g < order; ++g) {
        if (std::find(H.begin(), H.end(), g) != H.end()) continue;
        for (int k = 0; k < 32; ++k) {
            const auto u = halton_point(static_cast<std::size_t>(k), chart.dim());
            Eigen::VectorXd y = x;
            for (int c = 0; c < chart.dim(); ++c)
                y[c] += radius * (2.0 * u[static_cast<std::size_t>(c)] - 1.0);
            if ((y - x).norm() > radius) continue;
            if ((chart.apply(g, y) - x).norm() <= radius) {
                rep.valid_neighborhood = false;
                rep.witness = "phi_" + chart.element_name(g) + "(V) meets V";
                return rep;
            }
        }
    }

    // restricted chart on V with group H, to measure its effective order
    std::vector<GroupElement> sub_els;
    std::vector<std::vector<int>> sub_table(H.size(), std::vector<int>(H.size()));
    int sub_identity = 0;
    for (std::size_t a = 0; a < H.size(); ++a) {
        sub_els.push_back({chart.element_name(H[a]), chart.action(H[a])});
        if (H[a] == chart.identity()) sub_identity = static_cast<int>(a);
        for (std::size_t b = 0; b < H.size(); ++b) {
            const int prod = chart.compose(H[a], H[b]);
            const auto it = std::find(H.begin(), H.end(), prod);
            if (it == H.end()) {
                rep.valid_neighborhood = false;
                rep.witness = "stabilizer is not closed under composition";
                return rep;
            }
            sub_table[a][b] = static_cast<int>(it - H.begin());
        }
    }
    const Chart sub_chart(ChartDomain::ball(x, radius), std::move(sub_els), std::move(sub_table),
                          sub_identity);
    const Rational ge_full = effective_order(chart);
    const Rational ge_sub = effective_order(sub_chart);

    rep.lhs = (Rational(1) / ge_full) * Rational(rep.coset_count);
    rep.rhs = Rational(1) / ge_sub;
    rep.rational_ok = rep.lhs == rep.rhs;

    const Region V = Region::ball(x, radius);
    const Region orbit = V.saturate(s.chart());
    rep.measure_full = chart_measure(s, omega, orbit, opt).value;

    KahanSum restricted;
    const Rational inv = Rational(1) / ge_sub;
    for (std::size_t i = 0; i < s.branches().size(); ++i)
        restricted.add(to_double(inv * s.weights()[i]) *
                       integrate_branch(omega, s.branches()[i], V, opt));
    rep.measure_restricted = restricted.value();
    rep.defect = std::abs(rep.measure_full - rep.measure_restricted);
    return rep;
}

struct MorphismReport {
    double form_defect = 0.0;  // |phi^* omega - omega| over samples
    bool form_invariant = false;
    double value_source = 0.0;
    double value_pushed = 0.0;
    double defect = 0.0;
    bool passed(double tol) const { return form_invariant && defect <= tol; }
};

// Re-present the structure through the diffeomorphism phi (with inverse
// psi) and compare measures of an invariant form.
inline MorphismReport verify_morphism_invariance(const BranchingStructure& s, const SmoothMap& phi,
                                                 const SmoothMap& psi, const FormPtr& omega,
                                                 const IntegrationOptions& opt = {},
                                                 double form_tol = 1e-9) {
    MorphismReport rep;
    rep.form_defect = form_invariance_defect(*omega, phi, s.chart()->domain());
    rep.form_invariant = rep.form_defect <= form_tol;
    if (!rep.form_invariant) return rep;

    // bounding box of the image domain for the pushed chart
    const auto& dom = s.chart()->domain();
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(s.chart()->dim(), 1e300);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(s.chart()->dim(), -1e300);
    for (int k = 0; k < 128; ++k) {
        const Eigen::VectorXd y = phi(dom.sample(static_cast<std::size_t>(k)));
        lo = lo.cwiseMin(y);
        hi = hi.cwiseMax(y);
    }
    const Eigen::VectorXd pad = 0.1 * (hi - lo) + Eigen::VectorXd::Constant(lo.size(), 1e-6);

    std::vector<GroupElement> pushed_els;
    for (int g = 0; g < s.chart()->group_order(); ++g)
        pushed_els.push_back({s.chart()->element_name(g),
                              phi.compose_after(s.chart()->action(g).compose_after(psi))});
    std::vector<std::vector<int>> table(static_cast<std::size_t>(s.chart()->group_order()),
                                        std::vector<int>(static_cast<std::size_t>(s.chart()->group_order())));
    for (int g = 0; g < s.chart()->group_order(); ++g)
        for (int h = 0; h < s.chart()->group_order(); ++h)
            table[static_cast<std::size_t>(g)][static_cast<std::size_t>(h)] = s.chart()->compose(g, h);
    auto pushed_chart = std::make_shared<const Chart>(ChartDomain::box(lo - pad, hi + pad),
                                                     std::move(pushed_els), std::move(table),
                                                     s.chart()->identity());

    std::vector<Branch> pushed_branches;
    for (const auto& b : s.branches())
        pushed_branches.push_back(Branch(pushed_chart, b.domain(),
                                         phi.compose_after(b.parametrization()), b.orientation(),
                                         b.resolution(), b.name()));
    const BranchingStructure pushed(pushed_chart, std::move(pushed_branches), s.weights());

    rep.value_source = chart_measure(s, omega, Region::all(), opt).value;
    rep.value_pushed = chart_measure(pushed, omega, Region::all(), opt).value;
    rep.defect = std::abs(rep.value_source - rep.value_pushed);
    return rep;
}

}  // namespace branchform
