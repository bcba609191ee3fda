#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nlkpp/cell.hpp"
#include "nlkpp/nonlocal.hpp"

using namespace nlkpp;

namespace {

StencilWeights line_weights(double h = 0.05) {
    return build_weights(make_kernel(Profile::uniform_ball, 1, 1.0, 1.0), h);
}

// Discrete moment generating function S_h(p) = sum_k w_k e^{-y_k p}, evaluated
// through the transport sum over a zero field (the solver's own quadrature).
double discrete_mgf(const StencilWeights& w, double p) {
    auto zero = make_halo_field(1, w.h, 2 * w.halo + 1, 1, w.halo, 0.0, 0.0);
    return exp_transport(w, {p, 0.0}, zero, w.halo);
}

}  // namespace

// ============================================================================
// constant medium: closed form lambda v = c0 - J_bar + S_h(p)
// ============================================================================

TEST_CASE("constant medium solves match the closed form", "[cell][oracle]") {
    auto w = line_weights();
    auto cst = make_constant(1.0, 1, 16.0);
    for (double p : {0.5, 1.0, 2.0})
        for (double lam : {0.2, 0.05}) {
            auto sol = solve_cell(cst, w, {p, 0.0}, lam);
            REQUIRE(sol.converged);
            double closed = 1.0 - w.j_bar + discrete_mgf(w, p);
            REQUIRE_THAT(sol.lambda_v0, Catch::Matchers::WithinAbs(closed, 5e-9));
            // the solution field is constant on a constant medium
            REQUIRE(sol.v.vals.maxCoeff() - sol.v.vals.minCoeff() < 1e-7);
        }
}

TEST_CASE("zero tilt on a constant medium is solved exactly at init", "[cell][oracle]") {
    // S_h(0) equals the kernel mass bitwise, so the residual vanishes at once
    auto sol = solve_cell(make_constant(1.0, 1, 16.0), line_weights(), {0.0, 0.0}, 0.2);
    REQUIRE(sol.converged);
    REQUIRE(sol.iterations == 0);
    REQUIRE(sol.lambda_v0 == 1.0);
    auto rough = solve_cell(make_constant(1.3, 1, 16.0), line_weights(), {0.0, 0.0}, 0.2);
    REQUIRE_THAT(rough.lambda_v0, Catch::Matchers::WithinAbs(1.3, 1e-9));
}

TEST_CASE("adding a constant to the medium shifts lambda v by that constant", "[cell][oracle]") {
    auto w = line_weights();
    auto a = solve_cell(make_constant(1.0, 1, 16.0), w, {1.0, 0.0}, 0.1);
    auto b = solve_cell(make_constant(1.5, 1, 16.0), w, {1.0, 0.0}, 0.1);
    REQUIRE_THAT(b.lambda_v0 - a.lambda_v0, Catch::Matchers::WithinAbs(0.5, 1e-8));
}

// ============================================================================
// random media: comparison bounds and monotonicity
// ============================================================================

TEST_CASE("lambda v0 is sandwiched by the constant-medium extremes", "[cell][property]") {
    auto w = line_weights();
    for (std::uint64_t s : {1, 2, 3}) {
        auto cb = make_checkerboard(s, 1.0, 0.6, 1.0, 0.2, 1, 16.0, 1.0);
        auto sol = solve_cell(cb, w, {1.0, 0.0}, 0.1);
        REQUIRE(sol.converged);
        double sh = discrete_mgf(w, 1.0);
        REQUIRE(sol.lambda_v0 >= 0.6 - w.j_bar + sh - 1e-8);
        REQUIRE(sol.lambda_v0 <= 1.0 - w.j_bar + sh + 1e-8);
    }
}

TEST_CASE("lambda v0 is monotone in the medium", "[cell][property]") {
    auto w = line_weights();
    // same seed, same blend geometry, pointwise larger rates
    auto lo = make_checkerboard(5, 1.0, 0.5, 0.9, 0.2, 1, 16.0, 1.0);
    auto hi = make_checkerboard(5, 1.0, 0.6, 1.0, 0.2, 1, 16.0, 1.0);
    for (double p : {0.0, 1.0}) {
        auto sa = solve_cell(lo, w, {p, 0.0}, 0.1);
        auto sb = solve_cell(hi, w, {p, 0.0}, 0.1);
        REQUIRE(sa.lambda_v0 <= sb.lambda_v0 + 1e-8);
    }
}

// ============================================================================
// frozen two-dimensional oracles (checkerboard, h = 0.25, L = 24, tol 1e-7)
// ============================================================================

TEST_CASE("two-dimensional checkerboard solves reproduce frozen values", "[cell][oracle]") {
    auto kern = make_kernel(Profile::uniform_ball, 2, 1.0, 1.0);
    auto w = build_weights(kern, 0.25);
    auto base = make_checkerboard(1, 1.0, 0.6, 1.0, 0.2, 2, 24.0, 1.0);
    const std::vector<double> at_02 = {-0.90888, -0.89201, -0.90390, -0.77855};
    const std::vector<double> at_0025 = {-0.86508, -0.88382, -0.86550, -0.83265};
    for (std::uint64_t s = 1; s <= 4; ++s) {
        auto sol = solve_cell(reseed(base, s), w, {0.0, 0.0}, 0.2, 1e-7);
        REQUIRE(sol.converged);
        REQUIRE_THAT(-sol.lambda_v0, Catch::Matchers::WithinAbs(at_02[s - 1], 1e-5));
    }
    for (std::uint64_t s = 1; s <= 4; ++s) {
        auto sol = solve_cell(reseed(base, s), w, {0.0, 0.0}, 0.025, 1e-7);
        REQUIRE(sol.converged);
        REQUIRE_THAT(-sol.lambda_v0, Catch::Matchers::WithinAbs(at_0025[s - 1], 1e-5));
    }
}

// ============================================================================
// damped-limit estimation and the tabulated Hamiltonian
// ============================================================================

TEST_CASE("effective Hamiltonian estimate is exact on a constant medium", "[cell][oracle]") {
    auto w = line_weights();
    auto est = estimate_hbar(make_constant(1.0, 1, 16.0), w, {1.0, 0.0});
    REQUIRE_THAT(est.value, Catch::Matchers::WithinAbs(w.j_bar - discrete_mgf(w, 1.0) - 1.0, 1e-10));
    REQUIRE(est.error_bar >= 0.0);
    REQUIRE(est.error_bar <= 1e-9);
    REQUIRE(est.lambda_means.size() == 4);
    REQUIRE(est.lambda_stds.size() == 4);
    REQUIRE(est.per_seed.size() == 4);
}

TEST_CASE("non-shrinking lambda gaps are rejected", "[cell][errors]") {
    auto w = line_weights();
    auto cb = make_checkerboard(1, 1.0, 0.6, 1.0, 0.2, 1, 16.0, 1.0);
    // tiny first step then a huge jump: the damped limit cannot be trusted
    REQUIRE_THROWS_AS(estimate_hbar(cb, w, {1.0, 0.0}, {0.2, 0.199, 0.02}, {1}), NonConvergent);
    // a starved iteration budget surfaces the same failure
    REQUIRE_THROWS_AS(estimate_hbar(cb, w, {1.0, 0.0}, {0.2, 0.1, 0.05}, {1}, 1e-9, 3), NonConvergent);
}

TEST_CASE("starved solves return their best iterate flagged", "[cell]") {
    auto sol = solve_cell(make_checkerboard(1, 1.0, 0.6, 1.0, 0.2, 1, 16.0, 1.0), line_weights(),
                          {1.0, 0.0}, 0.05, 1e-9, 3);
    REQUIRE_FALSE(sol.converged);
    REQUIRE(sol.iterations == 3);
    REQUIRE(sol.residual_sup > 0.0);
    REQUIRE(std::isfinite(sol.residual_sup));
}

TEST_CASE("estimation input validation", "[cell][errors]") {
    auto w = line_weights();
    auto cst = make_constant(1.0, 1, 16.0);
    REQUIRE_THROWS_AS(solve_cell(cst, w, {1.0, 0.0}, 0.0), InvalidParam);
    REQUIRE_THROWS_AS(solve_cell(cst, w, {1.0, 0.0}, 0.1, 0.0), InvalidParam);
    REQUIRE_THROWS_AS(estimate_hbar(cst, w, {1.0, 0.0}, {0.2, 0.1}, {1}), InvalidParam);
    REQUIRE_THROWS_AS(estimate_hbar(cst, w, {1.0, 0.0}, {0.2, 0.2, 0.1}, {1}), InvalidParam);
    REQUIRE_THROWS_AS(estimate_hbar(cst, w, {1.0, 0.0}, {0.2, 0.1, 0.05}, {}), InvalidParam);
    // torus must hold the stencil and be commensurate with it
    REQUIRE_THROWS_AS(solve_cell(make_constant(1.0, 1, 3.0), w, {1.0, 0.0}, 0.1), InvalidParam);
    REQUIRE_THROWS_AS(solve_cell(make_constant(1.0, 1, 16.03), w, {1.0, 0.0}, 0.1), InvalidParam);
    REQUIRE_THROWS_AS(solve_cell(make_constant(1.0, 2, 16.0), w, {1.0, 0.0}, 0.1), InvalidParam);
}

TEST_CASE("tabulated Hamiltonian is symmetric and concave on a constant medium",
          "[cell][oracle]") {
    auto w = line_weights();
    auto tab = tabulate_hbar(make_constant(1.0, 1, 16.0), w, {-2.0, -1.0, 0.0, 1.0, 2.0},
                             {0.2, 0.1, 0.05, 0.025}, {1});
    REQUIRE(tab.symmetry_dev <= 1e-12);
    REQUIRE(tab.concavity_ok);
    REQUIRE_THAT(tab.value[2], Catch::Matchers::WithinAbs(-1.0, 1e-9));  // H(0) = -c0
    for (std::size_t k = 0; k < tab.p.size(); ++k) {
        double closed = w.j_bar - discrete_mgf(w, tab.p[k]) - 1.0;
        REQUIRE_THAT(tab.value[k], Catch::Matchers::WithinAbs(closed, 1e-8));
    }
}

TEST_CASE("table interpolation is piecewise linear with clamping", "[cell]") {
    HamiltonianTable tab;
    tab.p = {-1.0, 0.0, 1.0};
    tab.value = {-2.0, -1.0, -2.0};
    tab.error_bar = {0.0, 0.0, 0.0};
    REQUIRE(tab.eval(0.0) == -1.0);
    REQUIRE(tab.eval(1.0) == -2.0);
    REQUIRE_THAT(tab.eval(0.5), Catch::Matchers::WithinAbs(-1.5, 1e-15));
    REQUIRE_THAT(tab.eval(-0.25), Catch::Matchers::WithinAbs(-1.25, 1e-15));
    REQUIRE(tab.eval(3.0) == -2.0);   // clamped
    REQUIRE(tab.eval(-3.0) == -2.0);
    REQUIRE(tab.max_abs_slope() == 1.0);
    HamiltonianTable bad;
    bad.p = {0.0};
    bad.value = {-1.0};
    REQUIRE_THROWS_AS(bad.eval(0.0), InvalidParam);
}

TEST_CASE("tabulation rejects malformed tilt grids", "[cell][errors]") {
    auto w = line_weights();
    auto cst = make_constant(1.0, 1, 16.0);
    REQUIRE_THROWS_AS(tabulate_hbar(cst, w, {0.0}, {0.2, 0.1, 0.05}, {1}), InvalidParam);
    REQUIRE_THROWS_AS(tabulate_hbar(cst, w, {-1.0, 0.0, 0.5}, {0.2, 0.1, 0.05}, {1}), InvalidParam);
    REQUIRE_THROWS_AS(tabulate_hbar(cst, w, {-1.0, 1.0, 0.0}, {0.2, 0.1, 0.05}, {1}), InvalidParam);
}

// ============================================================================
// corrector diagnostics
// ============================================================================

TEST_CASE("corrector oscillation vanishes on a constant medium", "[cell]") {
    auto sol = solve_cell(make_constant(1.0, 1, 16.0), line_weights(), {1.0, 0.0}, 0.1);
    auto d = diagnostics(sol, 2.0);
    REQUIRE(d.R == 2.0);
    REQUIRE(d.osc < 1e-7);
    REQUIRE(d.c_osc < 1e-7);
    double sh = discrete_mgf(sol.weights, 1.0);
    REQUIRE_THAT(d.psi_min, Catch::Matchers::WithinAbs(sh, 1e-6));
    REQUIRE_THAT(d.psi_max, Catch::Matchers::WithinAbs(sh, 1e-6));
}

TEST_CASE("diagnostics window must fit the torus", "[cell][errors]") {
    auto sol = solve_cell(make_constant(1.0, 1, 16.0), line_weights(), {1.0, 0.0}, 0.1);
    REQUIRE_THROWS_AS(diagnostics(sol, 0.2), InvalidParam);   // below r1/2
    REQUIRE_THROWS_AS(diagnostics(sol, 8.0), InvalidParam);   // above L/4
    REQUIRE_NOTHROW(diagnostics(sol, 4.0));
}

TEST_CASE("tilt sensitivity matches the constant-medium difference quotient",
          "[cell][oracle]") {
    auto w = line_weights();
    auto cst = make_constant(1.0, 1, 16.0);
    double got = lipschitz_p_check(cst, w, {0.0, 0.0}, {1.0, 0.0}, 0.1);
    double want = std::abs(discrete_mgf(w, 1.0) - discrete_mgf(w, 0.0));
    REQUIRE_THAT(got, Catch::Matchers::WithinAbs(want, 1e-7));
    REQUIRE(lipschitz_p_check(cst, w, {1.0, 0.0}, {1.0, 0.0}, 0.1) == 0.0);
}
