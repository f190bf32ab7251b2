#include <catch2/catch_amalgamated.hpp>

#include "branchform/geometry.hpp"
#include "fixtures.hpp"

using namespace branchform;
using fixtures::kTwoPi;

namespace {

std::shared_ptr<const Chart> reflection_chart() {
    std::vector<GroupElement> els;
    els.push_back({"e", SmoothMap::identity(2)});
    els.push_back({"s", SmoothMap::parse(2, {"x0", "0 - x1"})});
    return std::make_shared<const Chart>(
        ChartDomain::box(Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2)), els,
        std::vector<std::vector<int>>{{0, 1}, {1, 0}}, 0);
}

std::shared_ptr<const Chart> z3_chart() {
    const double c = -0.5, s = 0.86602540378443864676;
    std::vector<GroupElement> els;
    els.push_back({"e", SmoothMap::identity(2)});
    els.push_back({"r", SmoothMap::parse(2, {"-0.5*x0 - 0.86602540378443864676*x1",
                                             "0.86602540378443864676*x0 - 0.5*x1"})});
    els.push_back({"r2", SmoothMap::parse(2, {"-0.5*x0 + 0.86602540378443864676*x1",
                                              "-0.86602540378443864676*x0 - 0.5*x1"})});
    (void)c;
    (void)s;
    return std::make_shared<const Chart>(
        ChartDomain::box(Eigen::Vector2d(-1.5, -1.5), Eigen::Vector2d(1.5, 1.5)), els,
        std::vector<std::vector<int>>{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}}, 0);
}

}  // namespace

TEST_CASE("degeneracy index counts vanishing quadrant coordinates") {
    ParamDomain Q({DomainFactor::quadrant(1.0), DomainFactor::quadrant(1.0),
                   DomainFactor::interval(-10.0, 10.0)});
    Eigen::Vector3d corner(0.0, 0.0, 5.0);
    REQUIRE(degeneracy_index(Q, corner) == 2);
    Eigen::Vector3d interior(0.5, 0.5, 0.0);
    REQUIRE(degeneracy_index(Q, interior) == 0);
    Eigen::Vector3d edge(1e-15, 1.0, 0.0);
    REQUIRE(degeneracy_index(Q, edge) == 1);
    Eigen::Vector3d outside(2.0, 0.5, 0.0);
    REQUIRE_THROWS_AS(degeneracy_index(Q, outside), std::invalid_argument);
}

TEST_CASE("mesh covers the domain exactly") {
    ParamDomain square({DomainFactor::quadrant(1.0), DomainFactor::quadrant(1.0)});
    auto cells = mesh_domain(square, 2);
    REQUIRE(cells.size() == 4);
    double vol = 0.0;
    for (const auto& c : cells) vol += c.volume();
    REQUIRE(vol == 1.0);

    ParamDomain circle({DomainFactor::periodic(kTwoPi)});
    REQUIRE(mesh_domain(circle, 8).size() == 8);

    // sum of quadrature weights equals the volume
    double wsum = 0.0;
    for (const auto& c : mesh_domain(square, 3))
        for_each_quad_node(c, 5, [&](const Eigen::VectorXd&, double w) { wsum += w; });
    REQUIRE(wsum == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("boundary faces exist only for quadrant coordinates") {
    auto chart = fixtures::trivial_chart2();
    REQUIRE(boundary_faces(fixtures::circle_branch(chart)).empty());

    Branch square(chart, ParamDomain({DomainFactor::quadrant(1.0), DomainFactor::quadrant(1.0)}),
                  SmoothMap::identity(2), 1, 4, "square");
    auto faces = boundary_faces(square);
    REQUIRE(faces.size() == 2);
    for (const auto& f : faces) REQUIRE(f.face.dim() == 1);
    // face at q0 = 0 flips the sign, face at q1 = 0 keeps it
    REQUIRE(faces[0].face.orientation() == -1);
    REQUIRE(faces[1].face.orientation() == 1);

    auto disk_faces = boundary_faces(fixtures::disk_branch(chart));
    REQUIRE(disk_faces.size() == 1);
    REQUIRE(disk_faces[0].face.orientation() == 1);
}

TEST_CASE("graph-form branches carry the prescribed tangent at the origin") {
    auto chart = fixtures::trivial_chart2(3.0);
    ParamDomain Q({DomainFactor::interval(-1.0, 1.0)});
    Eigen::MatrixXd frame(2, 1);
    frame << 1.0, 0.0;

    SECTION("flat graph is affine") {
        auto A = SmoothMap::parse(1, {"0", "0"});
        Branch b = branch_from_graph(chart, frame, A, Q);
        Eigen::VectorXd q(1);
        q << 0.7;
        REQUIRE((b.point(q) - Eigen::Vector2d(0.7, 0.0)).norm() < 1e-15);
    }
    SECTION("parabola correction leaves the origin tangent equal to the frame") {
        auto A = SmoothMap::parse(1, {"0", "x0^2"});
        Branch b = branch_from_graph(chart, frame, A, Q);
        Eigen::VectorXd zero(1);
        zero << 0.0;
        // oracle: Phi(q) = (q, q^2), tangent at 0 is (1, 0)
        REQUIRE((b.tangent_frame(zero) - frame).norm() < 1e-14);
        Eigen::VectorXd q(1);
        q << 0.5;
        REQUIRE(b.point(q)[1] == Catch::Approx(0.25));
    }
    SECTION("nonzero A(0) is rejected") {
        auto A = SmoothMap::parse(1, {"0", "x0^2 + 1/10"});
        REQUIRE_THROWS_AS(branch_from_graph(chart, frame, A, Q), std::invalid_argument);
    }
    SECTION("nonzero DA(0) is rejected") {
        auto A = SmoothMap::parse(1, {"0", "x0/2"});
        REQUIRE_THROWS_AS(branch_from_graph(chart, frame, A, Q), std::invalid_argument);
    }
}

TEST_CASE("group invariance of branch families") {
    SECTION("circle under a third-turn rotation") {
        auto chart = z3_chart();
        auto rep = check_group_invariance(*chart, {fixtures::circle_branch(chart, 16)});
        REQUIRE(rep.max_violation < 1e-7);
    }
    SECTION("horizontal axis is fixed by the vertical reflection") {
        auto chart = reflection_chart();
        auto rep = check_group_invariance(*chart, {fixtures::graph_branch(chart, "0")});
        REQUIRE(rep.max_violation < 1e-9);
    }
    SECTION("shifted line is moved by the reflection") {
        auto chart = reflection_chart();
        auto rep = check_group_invariance(*chart, {fixtures::graph_branch(chart, "1")});
        REQUIRE(rep.max_violation == Catch::Approx(2.0).margin(1e-6));
        REQUIRE(rep.worst_group_element == 1);
    }
}

TEST_CASE("group action diffeomorphism proxy: jacobians nonsingular at samples") {
    auto chart = fixtures::z4_chart2();
    for (int g = 0; g < chart->group_order(); ++g)
        for (int k = 0; k < 16; ++k) {
            const Eigen::VectorXd x = chart->domain().sample(static_cast<std::size_t>(k));
            REQUIRE(std::abs(chart->action(g).jacobian(x).determinant()) > 0.0);
        }
    REQUIRE(chart->action_composition_defect() < 1e-9);
}

TEST_CASE("broken group tables are rejected") {
    ChartDomain dom = ChartDomain::box(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1));
    std::vector<GroupElement> els;
    els.push_back({"e", SmoothMap::identity(2)});
    els.push_back({"a", SmoothMap::parse(2, {"0 - x0", "0 - x1"})});
    // 'a' has no inverse in this table
    REQUIRE_THROWS_AS(Chart(dom, els, {{0, 1}, {1, 1}}, 0), GroupAxiomError);
}

TEST_CASE("branch validation catches chart escapes") {
    auto small = fixtures::trivial_chart2(0.5);
    auto rep = fixtures::circle_branch(small).validate();
    REQUIRE_FALSE(rep.ok);
    REQUIRE_FALSE(rep.inside_chart);

    auto rep2 = fixtures::circle_branch(fixtures::trivial_chart2()).validate();
    REQUIRE(rep2.ok);
    // polar disk: collapsed center ring is exempt from the injectivity proxy
    auto rep3 = fixtures::disk_branch(fixtures::trivial_chart2()).validate();
    REQUIRE(rep3.ok);
}

TEST_CASE("effective quotient separates acting and ineffective parts") {
    auto chart = fixtures::z4_chart2();
    auto eq = EffectiveQuotient::compute(*chart);
    REQUIRE(eq.ineffective.size() == 1);
    REQUIRE(eq.effective_order == Rational(4));
}
