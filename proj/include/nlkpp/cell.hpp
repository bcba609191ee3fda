#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nlkpp/media.hpp"
#include "nlkpp/nonlocal.hpp"

namespace nlkpp {

// Solution of the lambda-damped cell problem
//   lambda v + J_bar - Phi(v) - c = 0,  Phi(v)(z) = sum_k w_k e^{-y_k.p} e^{v(z-y_k)-v(z)}
// on the periodized medium.
struct CellSolution {
    Point p{0.0, 0.0};
    double lambda = 0.0;
    GridField v;
    double residual_sup = 0.0;
    int iterations = 0;
    bool converged = false;
    double lambda_v0 = 0.0;  // lambda * v(0)
    StencilWeights weights;  // stencil the solve used (diagnostics re-apply it)
};

CellSolution solve_cell(const CoefficientField& field, const StencilWeights& weights,
                        Point p, double lambda, double tol = 1e-9, int max_iter = 200000);

struct HbarEstimate {
    double value = 0.0;
    double error_bar = 0.0;
    std::vector<double> lambda_means;              // cross-seed mean of -lambda v(0)
    std::vector<double> lambda_stds;               // cross-seed std (ddof = 1)
    std::vector<std::vector<double>> per_seed;     // [lambda index][seed index]
};

// Richardson extrapolation in lambda of the cross-seed mean of -lambda v(0).
// error bar = max(|extrapolation correction|, cross-seed std at smallest lambda).
HbarEstimate estimate_hbar(const CoefficientField& field, const StencilWeights& weights,
                           Point p, std::vector<double> lambda_seq = {0.2, 0.1, 0.05, 0.025},
                           std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5},
                           double tol = 1e-9, int max_iter = 200000, int threads = 1);

struct HamiltonianTable {
    std::vector<double> p;          // increasing, symmetric about 0
    std::vector<double> value;
    std::vector<double> error_bar;
    // provenance
    std::vector<double> lambda_seq;
    std::vector<std::uint64_t> seeds;
    int extrap_order = 1;
    std::string field_desc;
    bool concavity_ok = true;       // midpoint inequality within 2x error bars
    double symmetry_dev = 0.0;      // max |H(p) - H(-p)|

    // piecewise-linear interpolation, clamped to the tabulated range; callers
    // that must not extrapolate guard slopes separately (TableRangeExceeded)
    double eval(double q) const;
    double max_abs_slope() const;
    double p_min() const { return p.front(); }
    double p_max() const { return p.back(); }
};

HamiltonianTable tabulate_hbar(const CoefficientField& field, const StencilWeights& weights,
                               const std::vector<double>& p_grid,
                               std::vector<double> lambda_seq = {0.2, 0.1, 0.05, 0.025},
                               std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5},
                               double tol = 1e-9, int max_iter = 200000, int threads = 1);

struct CellDiagnostics {
    double R = 0.0;
    double osc = 0.0;       // osc of v over the torus ball B(0,R)
    double c_osc = 0.0;     // osc / R
    double psi_min = 0.0;   // bounds of Psi = Phi * e^{w}, w = v - v(0), over B(0,R)
    double psi_max = 0.0;
};

CellDiagnostics diagnostics(const CellSolution& sol, double R);

// sup_z |lambda v(z;p1) - lambda v(z;p2)| / |p1 - p2|; 0 when p1 == p2.
double lipschitz_p_check(const CoefficientField& field, const StencilWeights& weights,
                         Point p1, Point p2, double lambda, double tol = 1e-9);

// One damped pseudo-time update (exposed for monotonicity property tests):
// v + dtau * (-lambda v - J_bar + Phi(v) + c) over logical nodes.
Eigen::ArrayXd cell_update_once(const StencilWeights& weights, const NeighborTable& table,
                                Point p, const Eigen::ArrayXd& v, const Eigen::ArrayXd& cvals,
                                double lambda, double dtau);

}  // namespace nlkpp
