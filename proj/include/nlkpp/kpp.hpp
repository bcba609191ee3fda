#pragma once

#include <vector>

#include "nlkpp/kernel.hpp"
#include "nlkpp/media.hpp"
#include "nlkpp/nonlocal.hpp"

namespace nlkpp {

// f(x, u) = c(x) u (1 - u): the canonical KPP reaction.
struct ReactionSpec {
    CoefficientField field;
};

enum class FrontProfile { bump, plateau };

// Initial data with compact support G0 plus the grid it lives on:
// a periodic box [-half_width, half_width)^dim with spacing h.
struct InitialCondition {
    int dim = 1;
    double h = 0.05;
    double half_width = 10.0;
    double g0_a = -1.0, g0_b = 1.0;      // x-range of G0
    double g0_a_y = -1.0, g0_b_y = 1.0;  // y-range (2-D box)
    FrontProfile profile = FrontProfile::plateau;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<GridField> frames;
    double dt = 0.0;
};

GridField build_initial(const InitialCondition& ic);

// Explicit Euler on u_t = L u + c u (1 - u); monotone under the CFL bound.
Trajectory simulate(const ReactionSpec& reaction, const StencilWeights& weights,
                    const InitialCondition& u0, double T, double dt, int snapshot_every);

// Hyperbolically rescaled equation u_t = (1/eps)[L_eps u + c(x/eps) u (1 - u)],
// integrated on the macroscopic grid of u0 (spacing h = eps * micro spacing).
Trajectory simulate_scaled(double eps, const ReactionSpec& reaction, const Kernel& kernel,
                           const InitialCondition& u0, double T, double dt,
                           int snapshot_every = 0);

GridField hopf_cole(const GridField& u, double eps, double floor_val = 1e-300);

std::vector<Point> extract_front(const GridField& u, double level = 0.5);

struct SpeedFit {
    double speed = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // rms of fit residuals
};

// Least-squares slope of the rightmost level crossing over t in [t0, t1].
SpeedFit measure_speed_1d(const Trajectory& traj, double level, double t0, double t1);

// One explicit-Euler step (exposed for the comparison-principle property tests).
void kpp_step(const StencilWeights& weights, const NeighborTable& table,
              const Eigen::ArrayXd& cvals, double dt, double inv_eps,
              GridField& u, GridField& scratch);

}  // namespace nlkpp
