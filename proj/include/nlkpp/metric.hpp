#pragma once

#include <vector>

#include "nlkpp/cell.hpp"
#include "nlkpp/grid.hpp"
#include "nlkpp/kernel.hpp"
#include "nlkpp/media.hpp"

namespace nlkpp {

// ==========================================================================
// Exit-cost problem: first-passage solutions pinned to zero on a unit ball.
//
// Solves  J_bar - Phi_p(m) - c = mu  outside D1 = B(z1, 1), with m = 0 on D1
// and a linear barrier prescribed outside the computational box.  mu must lie
// strictly below the effective Hamiltonian at tilt p.
// ==========================================================================

struct MetricSolution {
    Point p{};                 // exponential tilt
    double mu = 0.0;           // level (must satisfy mu < Hbar(p))
    Point z1{};                // center of the pinned ball D1 = B(z1, 1)
    double r_dom = 0.0;        // half-width of the box, centered on z1
    GridField m;               // solution field (halo carries the barrier)
    double a1 = 0.0;           // barrier slope: exterior data is -a1*|z - z1|
    double a2 = 0.0;           // boundary data on D1 (identically zero here)
    double jump = 0.0;         // max |m| on the node ring adjacent to D1
    double residual_sup = 0.0; // sup |J_bar - Phi(m) - c - mu| over trusted nodes
    bool converged = false;
    int sweeps = 0;
};

// Solve the pinned problem by monotone Gauss-Seidel from a subsolution
// barrier.  `table` supplies Hbar(p) for the well-posedness check
// mu < Hbar(p) - error_bar; throws IllPosed otherwise, InvalidParam for
// r_dom < 8 or grids incommensurate with the box, MaxIterExceeded when the
// sweep budget runs out.
MetricSolution solve_metric(const CoefficientField& field,
                            const StencilWeights& weights, Point p, double mu,
                            Point z1, double r_dom, const HamiltonianTable& table,
                            double tol = 1e-9, int max_sweeps = 200000);

// One nodewise root update s = m(z) + log(Q/b) at logical node (i, j); used
// by stationarity and monotonicity property checks.  Frozen nodes pass
// through unchanged.
double metric_root_at(const MetricSolution& sol, const StencilWeights& weights,
                      const CoefficientField& field, int i, int j);

struct RadialLimit {
    Point e{};                  // unit direction
    std::vector<double> ts;     // evaluation radii
    std::vector<double> ratios; // m(t e)/t
    double m_bar = 0.0;         // extrapolated limit (intercept of 1/t fit)
    double slope = 0.0;         // fitted coefficient of 1/t
    double fit_residual = 0.0;  // rms deviation of the fit
};

// Estimate lim m(t e)/t from a single solve on a box containing max(ts),
// fitting ratios against 1/t.
RadialLimit radial_limit(const CoefficientField& field,
                         const StencilWeights& weights, Point p, double mu,
                         Point e, const std::vector<double>& ts,
                         const HamiltonianTable& table, double tol = 1e-9);

// Dual slope formula  m_bar(z) = inf { z.q : Hbar(p + q) = mu }  evaluated by
// scanning the tabulated Hamiltonian for level crossings.  Throws
// LevelSetEscapesTable when {Hbar(p+q) >= mu} touches the table edge, IllPosed
// when mu >= max Hbar.
double dual_formula(const HamiltonianTable& table, Point p, double mu, Point z);

// Largest oscillation of m over unit balls centered at interior nodes;
// serves as the recorded superadditivity defect constant.
double max_unit_ball_osc(const MetricSolution& sol);

} // namespace nlkpp
