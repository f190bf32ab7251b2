#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "branchform/geometry.hpp"
#include "branchform/rational.hpp"

namespace branchform {

struct Tolerances {
    double membership;   // point-on-branch distance
    double coincidence;  // patch Hausdorff distance for branch identification
    double tangent_angle = 1e-5;  // radians, principal angles

    static Tolerances defaults_for(const ChartDomain& domain) {
        Tolerances t;
        t.membership = 1e-7 * domain.diameter();
        t.coincidence = 10.0 * t.membership;
        return t;
    }
};

struct PointClass {
    bool good = false;
    std::vector<int> incident;                // branch indices with x on them
    std::vector<std::vector<int>> partition;  // coincidence classes of `incident`
};

struct ThetaMismatch {
    bool ok = true;
    Eigen::VectorXd witness;
    Rational lhs{0}, rhs{0};
};

struct OrientationReport {
    bool ok = true;
    int group_element = -1;
    int branch = -1;
    std::string message;
};

// Finite family of equal-dimensional weighted oriented branches in one
// chart. Weights are exact positive rationals; the induced weight function
// is theta(x) = sum of weights of branches passing through x.
class BranchingStructure {
  public:
    BranchingStructure(std::shared_ptr<const Chart> chart, std::vector<Branch> branches,
                       std::vector<Rational> weights, std::optional<Tolerances> tol = {})
        : chart_(std::move(chart)), branches_(std::move(branches)), weights_(std::move(weights)) {
        if (branches_.empty()) throw std::invalid_argument("branching structure needs a branch");
        if (branches_.size() != weights_.size())
            throw std::invalid_argument("branch/weight count mismatch");
        const int n = branches_.front().dim();
        for (const auto& b : branches_)
            if (b.dim() != n) throw std::invalid_argument("branches must share one dimension");
        for (const auto& w : weights_)
            if (w <= Rational(0)) throw std::invalid_argument("weights must be positive");
        tol_ = tol ? *tol : Tolerances::defaults_for(chart_->domain());
    }

    const std::shared_ptr<const Chart>& chart() const { return chart_; }
    const std::vector<Branch>& branches() const { return branches_; }
    const std::vector<Rational>& weights() const { return weights_; }
    const Tolerances& tolerances() const { return tol_; }
    int dim() const { return branches_.front().dim(); }

    std::vector<int> incidence(const Eigen::VectorXd& x) const {
        std::vector<int> idx;
        for (std::size_t i = 0; i < branches_.size(); ++i)
            if (branches_[i].closest_point(x).distance <= tol_.membership)
                idx.push_back(static_cast<int>(i));
        return idx;
    }

    Rational theta(const Eigen::VectorXd& x) const {
        Rational sum(0);
        for (int i : incidence(x)) sum += weights_[static_cast<std::size_t>(i)];
        return sum;
    }

    // Coincidence partition of the incident branches near x. Two branches
    // are identified when their r-ball patches lie within the coincidence
    // tolerance of each other (both directions) and their tangent planes at
    // x agree up to the angle tolerance. The relation is closed transitively.
    PointClass classify_point(const Eigen::VectorXd& x, double radius) const {
        PointClass pc;
        pc.incident = incidence(x);
        if (pc.incident.empty())
            throw std::invalid_argument("point is not on the support of the structure");
        const std::size_t m = pc.incident.size();
        std::vector<int> rep(m);
        std::iota(rep.begin(), rep.end(), 0);
        std::function<int(int)> find = [&](int a) {
            while (rep[static_cast<std::size_t>(a)] != a) a = rep[static_cast<std::size_t>(a)];
            return a;
        };
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a + 1; b < m; ++b)
                if (branches_coincide(pc.incident[a], pc.incident[b], x, radius)) {
                    const int ra = find(static_cast<int>(a)), rb = find(static_cast<int>(b));
                    if (ra != rb) rep[static_cast<std::size_t>(rb)] = ra;
                }
        std::vector<std::vector<int>> classes(m);
        for (std::size_t a = 0; a < m; ++a)
            classes[static_cast<std::size_t>(find(static_cast<int>(a)))].push_back(pc.incident[a]);
        for (auto& c : classes)
            if (!c.empty()) pc.partition.push_back(std::move(c));
        pc.good = pc.partition.size() == 1;
        return pc;
    }

    // One tangent subspace per coincidence class, as an orthonormal frame.
    std::vector<Eigen::MatrixXd> tangent_branches(const Eigen::VectorXd& x, double radius) const {
        const PointClass pc = classify_point(x, radius);
        std::vector<Eigen::MatrixXd> spaces;
        for (const auto& cls : pc.partition) {
            const auto& b = branches_[static_cast<std::size_t>(cls.front())];
            const auto cp = b.closest_point(x);
            if (cp.distance > tol_.membership)
                throw std::invalid_argument("preimage not found within membership tolerance");
            spaces.push_back(orthonormal_frame(b.tangent_frame(cp.param)));
        }
        return spaces;
    }

    // Fraction of branch mesh vertices whose ambient point is Bad.
    double bad_set_density(int resolution, double radius) const {
        std::size_t total = 0, bad = 0;
        for (const auto& b : branches_) {
            const Branch rb = b.with_resolution(resolution);
            for (const auto& q : rb.vertices()) {
                ++total;
                if (!classify_point(rb.point(q), radius).good) ++bad;
            }
        }
        return total == 0 ? 0.0 : static_cast<double>(bad) / static_cast<double>(total);
    }

    // Every group element must carry the oriented branch family to itself
    // preserving orientation: at matched sample points the induced tangent
    // map between matched branches has positive determinant after
    // orientation signs.
    OrientationReport check_orientation_compatibility(int samples_per_branch = 8) const {
        OrientationReport rep;
        for (int g = 0; g < chart_->group_order(); ++g) {
            for (std::size_t i = 0; i < branches_.size(); ++i) {
                const auto& b = branches_[i];
                const auto verts = b.vertices();
                const std::size_t stride = std::max<std::size_t>(1, verts.size() / static_cast<std::size_t>(samples_per_branch));
                for (std::size_t k = 0; k < verts.size(); k += stride) {
                    const Eigen::VectorXd q = verts[k];
                    const Eigen::VectorXd x = b.point(q);
                    const Eigen::VectorXd y = chart_->apply(g, x);
                    // matched branch: nearest one through y
                    int j = -1;
                    double best = std::numeric_limits<double>::infinity();
                    ClosestPoint cpj;
                    for (std::size_t c = 0; c < branches_.size(); ++c) {
                        const auto cp = branches_[c].closest_point(y);
                        if (cp.distance < best) {
                            best = cp.distance;
                            j = static_cast<int>(c);
                            cpj = cp;
                        }
                    }
                    if (best > tol_.coincidence) continue;  // invariance check reports this case
                    const Eigen::MatrixXd Fi = b.tangent_frame(q);
                    const Eigen::MatrixXd Fj =
                        branches_[static_cast<std::size_t>(j)].tangent_frame(cpj.param);
                    const Eigen::MatrixXd Dg = chart_->action(g).jacobian(x);
                    // components of Dg*Fi in the Fj column basis
                    const Eigen::MatrixXd M =
                        (Fj.transpose() * Fj).ldlt().solve(Fj.transpose() * (Dg * Fi));
                    const double det = M.determinant() * b.orientation() *
                                       branches_[static_cast<std::size_t>(j)].orientation();
                    if (det <= 0.0) {
                        rep.ok = false;
                        rep.group_element = g;
                        rep.branch = static_cast<int>(i);
                        rep.message = "orientation reversed between branch " + std::to_string(i) +
                                      " and branch " + std::to_string(j) + " under " +
                                      chart_->element_name(g);
                        return rep;
                    }
                }
            }
        }
        return rep;
    }

    // Weight-function agreement with another structure, checked at the mesh
    // cell centers of both (interior points, so patch seams of a split
    // presentation do not produce spurious double counting); exact rational
    // comparison.
    ThetaMismatch compare_theta(const BranchingStructure& other) const {
        ThetaMismatch rep;
        auto scan = [&](const BranchingStructure& src) {
            for (const auto& b : src.branches())
                for (const auto& cell : b.cells()) {
                    const Eigen::VectorXd x = b.point(cell.center());
                    const Rational a = theta(x);
                    const Rational c = other.theta(x);
                    if (a != c) {
                        rep.ok = false;
                        rep.witness = x;
                        rep.lhs = a;
                        rep.rhs = c;
                        return false;
                    }
                }
            return true;
        };
        if (scan(*this)) scan(other);
        return rep;
    }

  private:
    bool branches_coincide(int i, int j, const Eigen::VectorXd& x, double radius) const {
        const auto& bi = branches_[static_cast<std::size_t>(i)];
        const auto& bj = branches_[static_cast<std::size_t>(j)];
        // tangent agreement at x
        const auto cpi = bi.closest_point(x);
        const auto cpj = bj.closest_point(x);
        const Eigen::MatrixXd Qi = orthonormal_frame(bi.tangent_frame(cpi.param));
        const Eigen::MatrixXd Qj = orthonormal_frame(bj.tangent_frame(cpj.param));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Qi.transpose() * Qj);
        const double smin = svd.singularValues().minCoeff();
        const double angle = std::acos(std::clamp(smin, -1.0, 1.0));
        if (angle > tol_.tangent_angle) return false;
        // two-sided patch distance on r-balls in parameter space
        return patch_within(bi, cpi.param, bj, radius) && patch_within(bj, cpj.param, bi, radius);
    }

    bool patch_within(const Branch& src, const Eigen::VectorXd& q0, const Branch& dst,
                      double radius) const {
        const int n = src.dim();
        const int samples = 8 * n + 1;
        for (int s = 0; s < samples; ++s) {
            Eigen::VectorXd q = q0;
            if (s > 0) {
                const auto u = halton_point(static_cast<std::size_t>(s), n);
                for (int c = 0; c < n; ++c) q[c] += radius * (2.0 * u[static_cast<std::size_t>(c)] - 1.0);
            }
            q = src.domain().clamp(q);
            if (dst.closest_point(src.point(q)).distance > tol_.coincidence) return false;
        }
        return true;
    }

    static Eigen::MatrixXd orthonormal_frame(const Eigen::MatrixXd& F) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(F);
        Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(F.rows(), F.cols());
        return Q;
    }

    std::shared_ptr<const Chart> chart_;
    std::vector<Branch> branches_;
    std::vector<Rational> weights_;
    Tolerances tol_;
};

struct HalvedUnionResult {
    std::optional<BranchingStructure> structure;
    ThetaMismatch mismatch;
};

// Disjoint union of two presentations of the same weight function, with
// all weights halved; theta of the result equals theta of either input.
inline HalvedUnionResult halved_union(const BranchingStructure& s1, const BranchingStructure& s2) {
    HalvedUnionResult out;
    if (s1.dim() != s2.dim()) throw std::invalid_argument("halved union dimension mismatch");
    out.mismatch = s1.compare_theta(s2);
    if (!out.mismatch.ok) return out;
    std::vector<Branch> branches = s1.branches();
    std::vector<Rational> weights;
    for (const auto& w : s1.weights()) weights.push_back(w / 2);
    for (const auto& b : s2.branches()) branches.push_back(b);
    for (const auto& w : s2.weights()) weights.push_back(w / 2);
    out.structure =
        BranchingStructure(s1.chart(), std::move(branches), std::move(weights), s1.tolerances());
    return out;
}

}  // namespace branchform
