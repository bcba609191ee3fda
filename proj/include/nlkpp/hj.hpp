#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nlkpp/cell.hpp"
#include "nlkpp/kpp.hpp"

namespace nlkpp {

// ==========================================================================
// Front-propagation limit: obstacle problem  max(phi_t + Hbar(phi_x), phi) = 0
// solved with a monotone Lax-Friedrichs scheme on a line segment, phi <= 0.
// ==========================================================================

struct VISolution {
    double h = 0.0;
    double dt = 0.0;
    double alpha = 0.0;      // dissipation coefficient = max |Hbar'|
    double m_big = 0.0;      // depth of the far-field plateau
    double init_slope = 0.0; // cone slope of the initial envelope
    Eigen::ArrayXd xs;       // node coordinates
    std::vector<double> times;
    std::vector<Eigen::ArrayXd> frames;
};

// March the obstacle problem to time T from the envelope initial datum
// phi0 = max(-m_big, -P dist(x, [g0_a, g0_b])) with P the table edge slope.
// dt = 0 picks 0.8x the CFL bound h/(2 alpha); a user dt above the bound
// throws CFLViolation.  Gradients leaving the tabulated range beyond 1e-9
// throw TableRangeExceeded.
VISolution solve_vi(const HamiltonianTable& table, double g0_a, double g0_b,
                    double T, double h, double dt = 0.0, int snapshot_every = 0);

// One obstacle-projected Lax-Friedrichs update with copy-neighbor (Neumann)
// endpoints (exposed for the scheme-monotonicity property tests).
Eigen::ArrayXd vi_step_once(const HamiltonianTable& table,
                            const Eigen::ArrayXd& phi, double h, double dt,
                            double alpha);

// Locations where phi crosses the front indicator level -delta
// (delta = 0 picks 1e-6 * m_big).
std::vector<double> front_crossings(const Eigen::ArrayXd& xs,
                                    const Eigen::ArrayXd& phi, double delta);

// Least-squares speed of the outermost crossing over t in [t0, t1];
// side = +1 tracks the rightmost crossing, -1 the leftmost.
SpeedFit measure_vi_speed(const VISolution& sol, double t0, double t1,
                          int side = 1, double delta = 0.0);

// Minimal-slope formula for the asymptotic front speed in direction e = +-1:
// w = min_{q > 0} -Hbar(-q e) / q, located by scan plus golden-section.
// Throws LevelSetEscapesTable when the minimizer presses the table edge.
double predicted_speed(const HamiltonianTable& table, int e = 1);

} // namespace nlkpp
