#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "nlkpp/metric.hpp"

using namespace nlkpp;

namespace {

// Root of sinh(q)/q = 2: the homogeneous radial slope at mu = -2 (J_bar = c0 = 1).
constexpr double kSlopeStar = 2.1773;

StencilWeights quarter_weights() {
    return build_weights(make_kernel(Profile::uniform_ball, 1, 1.0, 1.0), 0.25);
}

const CoefficientField& cb_field() {
    static const CoefficientField f = make_checkerboard(1, 1.0, 0.6, 1.0, 0.2, 1, 16.0, 1.0);
    return f;
}

// Shared tables, built once per process.
const HamiltonianTable& cb_table() {
    static const HamiltonianTable tab =
        tabulate_hbar(cb_field(), quarter_weights(),
                      {-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0}, {0.2, 0.1, 0.05, 0.025}, {1, 2, 3});
    return tab;
}

const HamiltonianTable& const_table() {
    static const HamiltonianTable tab = [] {
        std::vector<double> ps;
        for (int k = -12; k <= 12; ++k) ps.push_back(k * 0.25);
        return tabulate_hbar(make_constant(1.0, 1, 16.0),
                             build_weights(make_kernel(Profile::uniform_ball, 1, 1.0, 1.0), 0.05),
                             ps, {0.2, 0.1, 0.05, 0.025}, {1});
    }();
    return tab;
}

int node_of(const GridField& m, double x) {
    return static_cast<int>(std::lround((x - m.x0) / m.h));
}

}  // namespace

// ============================================================================
// homogeneous medium: radial slope against the scalar root oracle
// ============================================================================

TEST_CASE("homogeneous radial slope matches the dual root", "[metric][oracle]") {
    auto w = build_weights(make_kernel(Profile::uniform_ball, 1, 1.0, 1.0), 0.1);
    auto cst = make_constant(1.0, 1, 16.0);
    auto rl = radial_limit(cst, w, {0.0, 0.0}, -2.0, {1.0, 0.0}, {8.0, 16.0, 24.0, 32.0},
                           const_table());
    REQUIRE_THAT(rl.m_bar, Catch::Matchers::WithinAbs(-kSlopeStar, 0.03 * kSlopeStar));
    REQUIRE(rl.fit_residual < 1e-4);
    // finite-radius bias decays: the largest radius sits closest to the limit
    REQUIRE(std::abs(rl.ratios.back() - rl.m_bar) < std::abs(rl.ratios.front() - rl.m_bar));
    double dual = dual_formula(const_table(), {0.0, 0.0}, -2.0, {1.0, 0.0});
    REQUIRE_THAT(dual, Catch::Matchers::WithinAbs(-kSlopeStar, 0.01 * kSlopeStar));
    REQUIRE(std::abs(rl.m_bar - dual) <= 0.01 * std::abs(dual));
    // mirror direction agrees to round-off
    auto rm = radial_limit(cst, w, {0.0, 0.0}, -2.0, {-1.0, 0.0}, {8.0, 16.0, 24.0, 32.0},
                           const_table());
    REQUIRE_THAT(rm.m_bar, Catch::Matchers::WithinAbs(rl.m_bar, 1e-9));
}

// ============================================================================
// pinned-ball structure
// ============================================================================

TEST_CASE("pinned ball carries its boundary data exactly", "[metric][oracle]") {
    auto sol = solve_metric(cb_field(), quarter_weights(), {0.0, 0.0}, -2.0, {0.0, 0.0}, 8.0,
                            cb_table());
    REQUIRE(sol.converged);
    int pinned = 0;
    for (int i = 0; i < sol.m.n1; ++i) {
        double x = sol.m.x(i);
        if (std::abs(x) <= 1.0 + 1e-12) {
            REQUIRE(sol.m.at(i) == 0.0);
            ++pinned;
        } else {
            REQUIRE(sol.m.at(i) < 0.0);  // mu below H(0): strictly decaying outward
        }
    }
    REQUIRE(pinned >= 9);
    // the recorded jump obeys the barrier-parameter bound
    REQUIRE(sol.jump <= sol.a1 * (1.0 + 1.5 * 0.25) + 1e-12);
    REQUIRE(sol.a1 > 0.0);
    REQUIRE(sol.a2 == 0.0);
}

TEST_CASE("solution values never fall below the barrier cone", "[metric][property]") {
    auto sol = solve_metric(cb_field(), quarter_weights(), {0.0, 0.0}, -2.0, {0.0, 0.0}, 8.0,
                            cb_table());
    for (int i = 0; i < sol.m.n1; ++i)
        REQUIRE(sol.m.at(i) >= -sol.a1 * std::abs(sol.m.x(i)) - 1e-12);
}

TEST_CASE("deeper levels force deeper solutions", "[metric][property]") {
    auto w = quarter_weights();
    auto lo = solve_metric(cb_field(), w, {0.0, 0.0}, -2.5, {0.0, 0.0}, 8.0, cb_table());
    auto hi = solve_metric(cb_field(), w, {0.0, 0.0}, -2.0, {0.0, 0.0}, 8.0, cb_table());
    REQUIRE((lo.m.vals <= hi.m.vals + 1e-9).all());
}

TEST_CASE("converged nodes solve their scalar root equation", "[metric]") {
    auto w = quarter_weights();
    auto sol = solve_metric(cb_field(), w, {0.0, 0.0}, -2.0, {0.0, 0.0}, 8.0, cb_table(), 1e-11);
    for (int i = node_of(sol.m, -6.0); i <= node_of(sol.m, 6.0); ++i) {
        double root = metric_root_at(sol, w, cb_field(), i, 0);
        REQUIRE_THAT(root, Catch::Matchers::WithinAbs(sol.m.at(i), 1e-9));
    }
    REQUIRE(sol.residual_sup < 1e-7);
}

// ============================================================================
// stationarity and superadditivity
// ============================================================================

TEST_CASE("joint shifts of field and pin relabel the solution bitwise", "[metric][oracle]") {
    auto w = quarter_weights();
    auto base = solve_metric(cb_field(), w, {0.0, 0.0}, -2.0, {0.0, 0.0}, 8.0, cb_table());
    // dyadic spacing + integer shift: every coordinate stays exact
    auto moved = solve_metric(shift(cb_field(), {2.0, 0.0}), w, {0.0, 0.0}, -2.0, {-2.0, 0.0},
                              8.0, cb_table());
    REQUIRE(moved.a1 == base.a1);
    REQUIRE((moved.m.vals == base.m.vals).all());

    auto kern2 = make_kernel(Profile::uniform_ball, 2, 1.0, 1.0);
    auto w2 = build_weights(kern2, 0.25);
    auto cb2 = make_checkerboard(3, 1.0, 0.6, 1.0, 0.2, 2, 16.0, 1.0);
    // the table only guards well-posedness (mu = -2 is far below either level);
    // the constant medium gives an exact estimate at this torus size
    auto tab2 = tabulate_hbar(make_constant(1.0, 2, 16.0), w2, {-1.0, 0.0, 1.0},
                              {0.2, 0.1, 0.05, 0.025}, {1});
    auto a2 = solve_metric(cb2, w2, {0.0, 0.0}, -2.0, {0.0, 0.0}, 8.0, tab2);
    auto b2 = solve_metric(shift(cb2, {2.0, -3.0}), w2, {0.0, 0.0}, -2.0, {-2.0, 3.0}, 8.0, tab2);
    REQUIRE((a2.m.vals == b2.m.vals).all());
}

TEST_CASE("passage costs are superadditive up to the recorded defect", "[metric][property]") {
    auto w = quarter_weights();
    auto mA = solve_metric(cb_field(), w, {0.0, 0.0}, -2.0, {0.0, 0.0}, 12.0, cb_table());
    auto mB = solve_metric(cb_field(), w, {0.0, 0.0}, -2.0, {4.0, 0.0}, 12.0, cb_table());
    double C = std::max(max_unit_ball_osc(mA), max_unit_ball_osc(mB));
    REQUIRE(C > 0.0);
    double mA4 = mA.m.at(node_of(mA.m, 4.0));
    for (double z = -7.0; z <= 11.0; z += 0.25) {
        double lhs = mA.m.at(node_of(mA.m, z));
        double rhs = mB.m.at(node_of(mB.m, z)) + mA4 - C;
        REQUIRE(lhs >= rhs - 1e-9);
    }
}

TEST_CASE("moving the pin moves the solution at a bounded rate", "[metric][property]") {
    auto w = quarter_weights();
    auto fine = build_weights(make_kernel(Profile::uniform_ball, 1, 1.0, 1.0), 0.125);
    double prev_ratio = 0.0;
    for (const auto* ws : {&w, &fine}) {
        auto p0 = solve_metric(cb_field(), *ws, {0.0, 0.0}, -2.0, {0.0, 0.0}, 8.0, cb_table());
        auto p1 = solve_metric(cb_field(), *ws, {0.0, 0.0}, -2.0, {0.25, 0.0}, 8.0, cb_table());
        double sup = 0.0;
        for (double z = -6.0; z <= 6.0; z += 0.25)
            sup = std::max(sup, std::abs(p0.m.at(node_of(p0.m, z)) - p1.m.at(node_of(p1.m, z))));
        double ratio = sup / 0.25;
        // observed constant ~6.2, dominated by the data jump at the pinned rim;
        // the point is that it stays finite and stable across resolutions
        REQUIRE(ratio <= 8.0);
        if (prev_ratio > 0.0) REQUIRE(std::abs(ratio - prev_ratio) <= 2.0);
        prev_ratio = ratio;
    }
}

// ============================================================================
// subadditive averaging across seeds
// ============================================================================

TEST_CASE("cross-seed ratio spread shrinks with the radius", "[metric][property]") {
    auto w = quarter_weights();
    std::vector<double> first, last, devs;
    double dual = dual_formula(cb_table(), {0.0, 0.0}, -2.0, {1.0, 0.0});
    for (std::uint64_t s = 1; s <= 5; ++s) {
        auto rl = radial_limit(reseed(cb_field(), s), w, {0.0, 0.0}, -2.0, {1.0, 0.0},
                               {8.0, 16.0, 24.0}, cb_table());
        first.push_back(rl.ratios.front());
        last.push_back(rl.ratios.back());
        devs.push_back(std::abs(rl.ratios.back() - dual) / std::abs(dual));
    }
    auto spread = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
    };
    REQUIRE(spread(last) < spread(first));
    // duality closure for random media: largest-radius ratios within 7%
    for (double d : devs) REQUIRE(d <= 0.07);
}

// ============================================================================
// dual slope formula
// ============================================================================

TEST_CASE("dual formula is positively homogeneous and vanishes at zero", "[metric][oracle]") {
    double d1 = dual_formula(const_table(), {0.0, 0.0}, -2.0, {1.0, 0.0});
    REQUIRE(dual_formula(const_table(), {0.0, 0.0}, -2.0, {0.0, 0.0}) == 0.0);
    REQUIRE(dual_formula(const_table(), {0.0, 0.0}, -2.0, {2.0, 0.0}) == 2.0 * d1);
    REQUIRE(d1 < 0.0);
    // the mirror direction picks the other crossing of the symmetric level set
    double dm = dual_formula(const_table(), {0.0, 0.0}, -2.0, {-1.0, 0.0});
    REQUIRE_THAT(dm, Catch::Matchers::WithinAbs(d1, 1e-9));
}

TEST_CASE("dual formula rejects degenerate levels", "[metric][errors]") {
    // level above the maximum of the Hamiltonian: empty level set
    REQUIRE_THROWS_AS(dual_formula(const_table(), {0.0, 0.0}, -0.5, {1.0, 0.0}), IllPosed);
    // level below the table edge: the crossing escapes the tabulated range
    double edge = const_table().eval(const_table().p_max());
    REQUIRE_THROWS_AS(dual_formula(const_table(), {0.0, 0.0}, edge - 0.01, {1.0, 0.0}),
                      LevelSetEscapesTable);
}

// ============================================================================
// validation
// ============================================================================

TEST_CASE("pinned-problem input validation", "[metric][errors]") {
    auto w = quarter_weights();
    // level not strictly below the Hamiltonian
    REQUIRE_THROWS_AS(
        solve_metric(cb_field(), w, {0.0, 0.0}, -0.5, {0.0, 0.0}, 8.0, cb_table()), IllPosed);
    REQUIRE_THROWS_AS(
        solve_metric(cb_field(), w, {0.0, 0.0}, -2.0, {0.0, 0.0}, 4.0, cb_table()), InvalidParam);
    REQUIRE_THROWS_AS(
        solve_metric(cb_field(), w, {0.0, 0.0}, -2.0, {0.0, 0.0}, 8.1, cb_table()), InvalidParam);
    REQUIRE_THROWS_AS(
        solve_metric(cb_field(), w, {0.0, 1.0}, -2.0, {0.0, 0.0}, 8.0, cb_table()), InvalidParam);
    REQUIRE_THROWS_AS(
        solve_metric(cb_field(), w, {0.0, 0.0}, -2.0, {0.0, 0.0}, 8.0, cb_table(), 1e-9, 1),
        MaxIterExceeded);
}

TEST_CASE("radial evaluation input validation", "[metric][errors]") {
    auto w = quarter_weights();
    REQUIRE_THROWS_AS(radial_limit(cb_field(), w, {0.0, 0.0}, -2.0, {1.0, 0.0}, {1.0, 8.0},
                                   cb_table()),
                      InvalidParam);  // radius inside the pinned ball
    REQUIRE_THROWS_AS(radial_limit(cb_field(), w, {0.0, 0.0}, -2.0, {2.0, 0.0}, {8.0},
                                   cb_table()),
                      InvalidParam);  // direction not unit
    REQUIRE_THROWS_AS(radial_limit(cb_field(), w, {0.0, 0.0}, -2.0, {1.0, 0.0}, {},
                                   cb_table()),
                      InvalidParam);
}
