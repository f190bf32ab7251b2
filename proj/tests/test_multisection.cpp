#include <catch2/catch_amalgamated.hpp>

#include "branchform/multisection.hpp"
#include "fixtures.hpp"

using namespace branchform;

namespace {

std::shared_ptr<const Chart> line_chart(double half = 1.5) {
    Eigen::VectorXd lo(1), hi(1);
    lo << -half;
    hi << half;
    return std::make_shared<const Chart>(Chart::trivial(ChartDomain::box(lo, hi)));
}

Eigen::VectorXd vec1(double a) {
    Eigen::VectorXd v(1);
    v << a;
    return v;
}

}  // namespace

TEST_CASE("multisection weights must sum to one") {
    auto s0 = SmoothMap::parse(1, {"0"});
    REQUIRE_THROWS_AS(Multisection({s0}, {Rational(1, 2)}), std::invalid_argument);
    REQUIRE_THROWS_AS(Multisection({s0, s0}, {Rational(1), Rational(-1) + Rational(1)}),
                      std::invalid_argument);
    REQUIRE_NOTHROW(Multisection({s0, s0}, {Rational(1, 2), Rational(1, 2)}));
}

TEST_CASE("lambda follows the empty-sum convention") {
    Multisection m({SmoothMap::parse(1, {"1/2"}), SmoothMap::parse(1, {"x0"}),
                    SmoothMap::parse(1, {"0 - x0"})},
                   {Rational(1, 2), Rational(1, 4), Rational(1, 4)});
    Eigen::VectorXd e(1);
    SECTION("no section matches") {
        e << 9.0;
        REQUIRE(m.lambda_value(vec1(0.3), e) == Rational(0));
    }
    SECTION("single match") {
        e << 0.3;
        REQUIRE(m.lambda_value(vec1(0.3), e) == Rational(1, 4));
    }
    SECTION("coinciding sections add up") {
        e << 0.0;
        // at x = 0 sections two and three coincide at 0
        REQUIRE(m.lambda_value(vec1(0.0), e) == Rational(1, 2));
        // at x = 1/2 the constant section and the identity section coincide
        e << 0.5;
        REQUIRE(m.lambda_value(vec1(0.5), e) == Rational(3, 4));
    }
}

TEST_CASE("zero-dimensional solve brackets and polishes simple roots") {
    auto chart = line_chart();
    SECTION("quadratic with trivial multisection") {
        ToySection f(chart, SmoothMap::parse(1, {"x0^2 - 1/4"}));
        auto sol = solve(f, Multisection::trivial(1, 1), 256);
        REQUIRE(sol.dim == 0);
        REQUIRE(sol.points.size() == 2);
        REQUIRE(sol.points[0].x[0] == Catch::Approx(-0.5).margin(1e-10));
        REQUIRE(sol.points[0].sign == -1);
        REQUIRE(sol.points[1].x[0] == Catch::Approx(0.5).margin(1e-10));
        REQUIRE(sol.points[1].sign == 1);
    }
    SECTION("x^2 against the two-sheet +/- epsilon multisection") {
        ToySection f(chart, SmoothMap::parse(1, {"x0^2"}));
        Multisection m({SmoothMap::parse(1, {"1/100"}), SmoothMap::parse(1, {"-1/100"})},
                       {Rational(1, 2), Rational(1, 2)});
        auto sol = solve(f, m, 256);
        REQUIRE(sol.points.size() == 2);  // +sqrt(eps), -sqrt(eps); lower sheet empty
        for (const auto& p : sol.points) {
            REQUIRE(p.section == 0);
            REQUIRE(p.weight == Rational(1, 2));
            REQUIRE(std::abs(std::abs(p.x[0]) - 0.1) < 1e-10);
        }
        REQUIRE(signed_count(sol) == Rational(0));
    }
    SECTION("no zeros, empty set") {
        ToySection f(chart, SmoothMap::parse(1, {"x0^2 + 1"}));
        auto sol = solve(f, Multisection::trivial(1, 1), 128);
        REQUIRE(sol.points.empty());
        REQUIRE(signed_count(sol) == Rational(0));
    }
    SECTION("degenerate zero aborts") {
        ToySection f(chart, SmoothMap::parse(1, {"x0^2"}));
        REQUIRE_THROWS_AS(solve(f, Multisection::trivial(1, 1), 256), GoodPositionError);
    }
}

TEST_CASE("psi counts signed weighted zeros") {
    auto chart = line_chart();
    auto one = make_form(1, 0, {{{}, "1"}});
    SECTION("x^2 with +/- epsilon gives zero") {
        ToySection f(chart, SmoothMap::parse(1, {"x0^2"}));
        Multisection m({SmoothMap::parse(1, {"1/100"}), SmoothMap::parse(1, {"-1/100"})},
                       {Rational(1, 2), Rational(1, 2)});
        auto sol = solve(f, m, 256);
        REQUIRE(signed_count(sol) == Rational(0));
        REQUIRE(invariant_psi(sol, one) == 0.0);
    }
    SECTION("cubic gives one") {
        ToySection f(chart, SmoothMap::parse(1, {"x0^3 - x0"}));
        auto sol = solve(f, Multisection::trivial(1, 1), 256);
        REQUIRE(sol.points.size() == 3);
        REQUIRE(sol.points[0].sign == 1);
        REQUIRE(sol.points[1].sign == -1);
        REQUIRE(sol.points[2].sign == 1);
        REQUIRE(signed_count(sol) == Rational(1));
        REQUIRE(invariant_psi(sol, one) == 1.0);
    }
    SECTION("psi is linear in the integrand") {
        ToySection f(chart, SmoothMap::parse(1, {"x0^3 - x0"}));
        auto sol = solve(f, Multisection::trivial(1, 1), 256);
        auto three = make_form(1, 0, {{{}, "3"}});
        REQUIRE(invariant_psi(sol, three) ==
                Catch::Approx(3.0 * invariant_psi(sol, one)).margin(1e-14));
    }
}

TEST_CASE("homotopy sweep keeps psi constant") {
    auto chart = line_chart();
    auto one = make_form(1, 0, {{{}, "1"}});
    SECTION("perturbed cubic") {
        auto ft = SmoothMap::parse(2, {"x0^3 - x0 + x1/10"});
        auto rep = homotopy_invariance_check(chart, ft, Multisection::trivial(1, 1), one, 21, 256);
        REQUIRE(rep.proper);
        REQUIRE(rep.flagged_count == 0);
        REQUIRE(rep.max_deviation == 0.0);
        REQUIRE(rep.steps.size() == 21);
        for (const auto& s : rep.steps) REQUIRE(s.psi == 1.0);
    }
    SECTION("zero escaping the box trips the properness proxy") {
        auto ft = SmoothMap::parse(2, {"x0 - 7/5*x1"});
        auto rep = homotopy_invariance_check(chart, ft, Multisection::trivial(1, 1), one, 11, 256,
                                             0.2);
        REQUIRE_FALSE(rep.proper);
        REQUIRE_FALSE(rep.properness_witness.empty());
    }
}

TEST_CASE("one-dimensional solution sets are traced as curves") {
    Eigen::VectorXd lo(2), hi(2);
    lo << -1.5, -1.5;
    hi << 1.5, 1.5;
    auto chart = std::make_shared<const Chart>(Chart::trivial(ChartDomain::box(lo, hi)));
    ToySection f(chart, SmoothMap::parse(2, {"x0^2 + x1^2 - 1"}));
    auto sol = solve(f, Multisection::trivial(2, 1), 64);
    REQUIRE(sol.dim == 1);
    REQUIRE(sol.curves.size() == 1);
    REQUIRE(sol.curves[0].closed);
    for (const auto& p : sol.curves[0].points)
        REQUIRE(std::abs(p.squaredNorm() - 1.0) < 1e-9);

    SECTION("stokes consistency: integral of an exact form over a closed curve") {
        auto omega = exterior_derivative(make_form(2, 0, {{{}, "x0 * x1"}}));
        REQUIRE(std::abs(invariant_psi(sol, omega)) < 1e-8);
    }
    SECTION("arc integral recovers the circumference up to orientation") {
        auto arc = make_form(2, 1, {{{0}, "0 - x1"}, {{1}, "x0"}});
        const double val = invariant_psi(sol, arc);
        REQUIRE(std::abs(std::abs(val) - fixtures::kTwoPi) < 5e-3);
    }
}
