#pragma once

#include <cstdint>
#include <vector>

#include "nlkpp/grid.hpp"

namespace nlkpp {

enum class Generator { constant, periodic, checkerboard, poisson_bumps };

// Stationary ergodic reaction-rate field c(z, omega), realized from a seed and
// periodized onto a torus of side period_length. evaluate() is a pure function
// of (parameters, seed, z): all randomness is counter-based hashing of cell
// indices, so shifted copies re-derive identical values from coordinates.
struct CoefficientField {
    int dimension = 1;
    Generator generator = Generator::constant;
    std::uint64_t seed = 0;
    double period_length = 16.0;
    double c_min = 1.0;       // >= kappa > 0
    double c_max = 1.0;
    double osc_rho = 0.0;     // c_max - c_min; must stay < J_bar of the paired kernel
    double lipschitz_K = 0.0;
    double mollify_sigma = 0.0;

    // generator-specific parameters
    double c0 = 1.0;                              // constant
    double periodic_base = 0.0, periodic_amp = 0.0;  // periodic cos profile
    double cell = 1.0, c_lo = 0.0, c_hi = 0.0;    // checkerboard
    double intensity = 0.0, base = 0.0, amplitude = 0.0, bump_radius = 0.0;  // poisson
    std::vector<Point> bump_centers;              // realized once, in [0, L)^dim

    // accumulated shift offset: evaluate folds z + shift_offset into the torus
    Point shift_offset{0.0, 0.0};
};

CoefficientField make_constant(double c0, int dimension = 1, double period_length = 16.0);

// c(z) = base + amp * prod_axis cos(2*pi*z_i / period_length); requires amp <= base
// so the positivity floor survives.
CoefficientField make_periodic(double base, double amp, int dimension = 1,
                               double period_length = 16.0);

CoefficientField make_checkerboard(std::uint64_t seed, double cell, double c_lo, double c_hi,
                                   double sigma, int dimension = 1,
                                   double period_length = 16.0, double j_bar = 1.0);

CoefficientField make_poisson_bumps(std::uint64_t seed, double intensity, double base,
                                    double amplitude, double bump_radius, int dimension = 1,
                                    double period_length = 16.0, double j_bar = 1.0);

double evaluate(const CoefficientField& field, Point z);

CoefficientField shift(const CoefficientField& field, Point a);

// Grid-quadrature average of c over the ball of radius R centered at 0.
double empirical_mean(const CoefficientField& field, double R);

// Same generator and parameters, fresh realization (used by cross-seed ensembles).
CoefficientField reseed(const CoefficientField& field, std::uint64_t seed);

// Sample c at every stored node (halo included) of the given grid geometry.
GridField sample_to_grid(const CoefficientField& field, const GridField& geometry);

// C^infty transition 0 -> 1 over r in [-1, 1]: theta(r) = psi(1+r)/(psi(1+r)+psi(1-r)),
// psi(t) = exp(-1/t) for t > 0. Shared by the checkerboard blend and tests.
double smooth_step(double r);

// Mass of one poisson bump profile (direct quadrature), used by mean oracles.
double bump_profile_mass(double amplitude, double radius, int dimension);

}  // namespace nlkpp
