#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "branchform/branched.hpp"
#include "branchform/geometry.hpp"

namespace fixtures {

using namespace branchform;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline std::shared_ptr<const Chart> trivial_chart2(double half = 1.5) {
    return std::make_shared<const Chart>(Chart::trivial(
        ChartDomain::box(Eigen::Vector2d(-half, -half), Eigen::Vector2d(half, half))));
}

// Z/2 generated by the antipodal map; preserves the circle's orientation.
inline std::shared_ptr<const Chart> antipodal_chart2(double half = 1.5) {
    std::vector<GroupElement> els;
    els.push_back({"e", SmoothMap::identity(2)});
    els.push_back({"a", SmoothMap::parse(2, {"0 - x0", "0 - x1"})});
    return std::make_shared<const Chart>(
        ChartDomain::box(Eigen::Vector2d(-half, -half), Eigen::Vector2d(half, half)), els,
        std::vector<std::vector<int>>{{0, 1}, {1, 0}}, 0);
}

// Z/4 rotations.
inline std::shared_ptr<const Chart> z4_chart2(double half = 1.5) {
    std::vector<GroupElement> els;
    els.push_back({"e", SmoothMap::identity(2)});
    els.push_back({"r", SmoothMap::parse(2, {"0 - x1", "x0"})});
    els.push_back({"r2", SmoothMap::parse(2, {"0 - x0", "0 - x1"})});
    els.push_back({"r3", SmoothMap::parse(2, {"x1", "0 - x0"})});
    std::vector<std::vector<int>> table{{0, 1, 2, 3}, {1, 2, 3, 0}, {2, 3, 0, 1}, {3, 0, 1, 2}};
    return std::make_shared<const Chart>(
        ChartDomain::box(Eigen::Vector2d(-half, -half), Eigen::Vector2d(half, half)), els, table,
        0);
}

inline Branch circle_branch(std::shared_ptr<const Chart> chart, int resolution = 8) {
    return Branch(std::move(chart), ParamDomain({DomainFactor::periodic(kTwoPi)}),
                  SmoothMap::parse(1, {"cos(x0)", "sin(x0)"}), 1, resolution, "circle");
}

// Polar disk: s is the quadrant coordinate (s = 0 on the rim), theta
// periodic. The parameter frame is negatively oriented, hence sign -1.
inline Branch disk_branch(std::shared_ptr<const Chart> chart, int resolution = 8) {
    return Branch(std::move(chart),
                  ParamDomain({DomainFactor::quadrant(1.0), DomainFactor::periodic(kTwoPi)}),
                  SmoothMap::parse(2, {"(1 - x0) * cos(x1)", "(1 - x0) * sin(x1)"}), -1,
                  resolution, "disk");
}

inline Branch graph_branch(std::shared_ptr<const Chart> chart, const std::string& height,
                           int resolution = 8, const std::string& name = "graph") {
    return Branch(std::move(chart), ParamDomain({DomainFactor::interval(-1.0, 1.0)}),
                  SmoothMap::parse(1, {"x0", height}), 1, resolution, name);
}

// {y = 0} and {y = x^3}, tangent to second order at the origin.
inline BranchingStructure cubic_tangency(const Rational& w1 = Rational(1, 3),
                                         const Rational& w2 = Rational(2, 3),
                                         int resolution = 8) {
    auto chart = trivial_chart2(1.2);
    std::vector<Branch> branches{graph_branch(chart, "0", resolution, "axis"),
                                 graph_branch(chart, "x0^3", resolution, "cubic")};
    return BranchingStructure(chart, branches, {w1, w2});
}

}  // namespace fixtures
