#include <catch2/catch_amalgamated.hpp>

#include "branchform/branched.hpp"
#include "fixtures.hpp"

using namespace branchform;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

BranchingStructure transverse_lines(int resolution = 8) {
    auto chart = fixtures::trivial_chart2(1.2);
    Branch horizontal = fixtures::graph_branch(chart, "0", resolution, "h");
    Branch vertical(chart, ParamDomain({DomainFactor::interval(-1.0, 1.0)}),
                    SmoothMap::parse(1, {"0", "x0"}), 1, resolution, "v");
    return BranchingStructure(chart, {horizontal, vertical}, {Rational(1, 2), Rational(1, 2)});
}

}  // namespace

TEST_CASE("theta sums the weights of incident branches") {
    SECTION("coincident duplicates") {
        auto chart = fixtures::trivial_chart2(1.2);
        Branch line = fixtures::graph_branch(chart, "0");
        BranchingStructure s(chart, {line, line}, {Rational(1, 2), Rational(1, 2)});
        REQUIRE(s.theta(vec2(0.25, 0.0)) == Rational(1));
    }
    SECTION("off-support and single-branch points of the cubic tangency") {
        auto s = fixtures::cubic_tangency();
        REQUIRE(s.theta(vec2(0.0, 1.0)) == Rational(0));
        REQUIRE(s.theta(vec2(0.5, 0.0)) == Rational(1, 3));
        REQUIRE(s.theta(vec2(0.5, 0.125)) == Rational(2, 3));
        REQUIRE(s.theta(vec2(0.0, 0.0)) == Rational(1));
    }
}

TEST_CASE("weights must be positive") {
    auto chart = fixtures::trivial_chart2(1.2);
    Branch line = fixtures::graph_branch(chart, "0");
    REQUIRE_THROWS_AS(BranchingStructure(chart, {line}, {Rational(0)}), std::invalid_argument);
}

TEST_CASE("classification at tangencies and coincidences") {
    auto s = fixtures::cubic_tangency();
    SECTION("single incident branch is good") {
        auto pc = s.classify_point(vec2(0.5, 0.0), 0.1);
        REQUIRE(pc.good);
        REQUIRE(pc.incident == std::vector<int>{0});
    }
    SECTION("tangency point is bad with singleton classes") {
        auto pc = s.classify_point(vec2(0.0, 0.0), 0.1);
        REQUIRE_FALSE(pc.good);
        REQUIRE(pc.incident == std::vector<int>{0, 1});
        REQUIRE(pc.partition.size() == 2);
    }
    SECTION("off-support point is rejected") {
        REQUIRE_THROWS_AS(s.classify_point(vec2(0.0, 1.0), 0.1), std::invalid_argument);
    }
    SECTION("duplicated branch is good everywhere") {
        auto chart = fixtures::trivial_chart2(1.2);
        Branch line = fixtures::graph_branch(chart, "0");
        BranchingStructure dup(chart, {line, line}, {Rational(1, 2), Rational(1, 2)});
        auto pc = dup.classify_point(vec2(0.3, 0.0), 0.1);
        REQUIRE(pc.good);
        REQUIRE(pc.partition.size() == 1);
        REQUIRE(pc.partition[0] == std::vector<int>{0, 1});
    }
    SECTION("transverse intersection is bad") {
        auto pc = transverse_lines().classify_point(vec2(0.0, 0.0), 0.1);
        REQUIRE_FALSE(pc.good);
        REQUIRE(pc.partition.size() == 2);
    }
}

TEST_CASE("tangent branches per coincidence class") {
    SECTION("single line") {
        auto chart = fixtures::trivial_chart2(1.2);
        BranchingStructure s(chart, {fixtures::graph_branch(chart, "0")}, {Rational(1)});
        auto spaces = s.tangent_branches(vec2(0.3, 0.0), 0.1);
        REQUIRE(spaces.size() == 1);
        REQUIRE(std::abs(std::abs(spaces[0](0, 0)) - 1.0) < 1e-12);
        REQUIRE(std::abs(spaces[0](1, 0)) < 1e-12);
    }
    SECTION("cubic tangency at the origin: both classes share the axis tangent") {
        auto spaces = fixtures::cubic_tangency().tangent_branches(vec2(0.0, 0.0), 0.1);
        REQUIRE(spaces.size() == 2);
        for (const auto& sp : spaces) {
            REQUIRE(std::abs(std::abs(sp(0, 0)) - 1.0) < 1e-9);
            REQUIRE(std::abs(sp(1, 0)) < 1e-9);
        }
    }
    SECTION("transverse lines give two distinct subspaces") {
        auto spaces = transverse_lines().tangent_branches(vec2(0.0, 0.0), 0.1);
        REQUIRE(spaces.size() == 2);
        const double overlap = std::abs((spaces[0].transpose() * spaces[1])(0, 0));
        REQUIRE(overlap < 1e-9);
    }
}

TEST_CASE("bad set density shrinks like one over resolution") {
    SECTION("single branch has no bad points") {
        auto chart = fixtures::trivial_chart2(1.2);
        BranchingStructure s(chart, {fixtures::graph_branch(chart, "0")}, {Rational(1)});
        REQUIRE(s.bad_set_density(8, 0.1) == 0.0);
    }
    SECTION("cubic tangency: only the origin vertices are bad") {
        auto s = fixtures::cubic_tangency();
        const double f8 = s.bad_set_density(8, 0.1);
        const double f16 = s.bad_set_density(16, 0.1);
        REQUIRE(f8 == Catch::Approx(1.0 / 9.0));
        REQUIRE(f16 == Catch::Approx(1.0 / 17.0));
    }
    SECTION("transverse lines: one bad vertex per branch") {
        const double f = transverse_lines().bad_set_density(8, 0.1);
        REQUIRE(f == Catch::Approx(1.0 / 9.0));
    }
}

TEST_CASE("index data is constant across a cell in a fixed coincidence regime") {
    auto s = fixtures::cubic_tangency();
    // the cell [0.5, 0.75] on the axis branch stays in the single-branch regime
    for (double x : {0.51, 0.6, 0.67, 0.74}) {
        auto pc = s.classify_point(vec2(x, 0.0), 0.05);
        REQUIRE(pc.good);
        REQUIRE(pc.incident == std::vector<int>{0});
    }
}

TEST_CASE("theta is invariant under the chart group") {
    auto chart = fixtures::antipodal_chart2();
    BranchingStructure s(chart, {fixtures::circle_branch(chart, 16)}, {Rational(1)});
    for (int k = 0; k < 32; ++k) {
        const double t = fixtures::kTwoPi * k / 32.0;
        const Eigen::VectorXd x = vec2(std::cos(t), std::sin(t));
        REQUIRE(s.theta(x) == s.theta(chart->apply(1, x)));
    }
}

TEST_CASE("orientation compatibility of group actions on oriented branches") {
    SECTION("antipodal map preserves the circle orientation") {
        auto chart = fixtures::antipodal_chart2();
        BranchingStructure s(chart, {fixtures::circle_branch(chart, 16)}, {Rational(1)});
        REQUIRE(s.check_orientation_compatibility().ok);
    }
    SECTION("a mirror reflection reverses it") {
        std::vector<GroupElement> els;
        els.push_back({"e", SmoothMap::identity(2)});
        els.push_back({"m", SmoothMap::parse(2, {"x0", "0 - x1"})});
        auto chart = std::make_shared<const Chart>(
            ChartDomain::box(vec2(-1.5, -1.5), vec2(1.5, 1.5)), els,
            std::vector<std::vector<int>>{{0, 1}, {1, 0}}, 0);
        BranchingStructure s(chart, {fixtures::circle_branch(chart, 16)}, {Rational(1)});
        REQUIRE_FALSE(s.check_orientation_compatibility().ok);
    }
}

TEST_CASE("halved union duplicates presentations with halved weights") {
    auto chart = fixtures::trivial_chart2(1.2);
    Branch line = fixtures::graph_branch(chart, "0");
    BranchingStructure s(chart, {line}, {Rational(1)});
    SECTION("self union") {
        auto res = halved_union(s, s);
        REQUIRE(res.mismatch.ok);
        REQUIRE(res.structure.has_value());
        REQUIRE(res.structure->weights() ==
                std::vector<Rational>{Rational(1, 2), Rational(1, 2)});
        REQUIRE(res.structure->theta(vec2(0.3, 0.0)) == Rational(1));
    }
    SECTION("mismatched supports are rejected with a witness") {
        BranchingStructure other(chart, {fixtures::graph_branch(chart, "x0^3", 8, "cubic")},
                                 {Rational(1)});
        auto res = halved_union(s, other);
        REQUIRE_FALSE(res.mismatch.ok);
        REQUIRE_FALSE(res.structure.has_value());
        REQUIRE(res.mismatch.lhs != res.mismatch.rhs);
    }
}

TEST_CASE("split presentation has the same theta almost everywhere") {
    auto chart = fixtures::trivial_chart2(1.2);
    // one branch over [-1, 1] vs two halves
    Branch whole = fixtures::graph_branch(chart, "0", 8, "whole");
    Branch left(chart, ParamDomain({DomainFactor::interval(-1.0, 0.0)}),
                SmoothMap::parse(1, {"x0", "0"}), 1, 4, "left");
    Branch right(chart, ParamDomain({DomainFactor::interval(0.0, 1.0)}),
                 SmoothMap::parse(1, {"x0", "0"}), 1, 4, "right");
    BranchingStructure s1(chart, {whole}, {Rational(1)});
    BranchingStructure s2(chart, {left, right}, {Rational(1), Rational(1)});
    auto res = halved_union(s1, s2);
    REQUIRE(res.mismatch.ok);
    REQUIRE(res.structure->theta(vec2(0.31, 0.0)) == Rational(1));
}
