#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "nlkpp/grid.hpp"

namespace nlkpp {

enum class Profile { uniform_ball, cosine_bump, triangle };

// Radially symmetric dispersal kernel J with compact support B(0, r_bar),
// J >= A > 0 on B(0, r1), total mass J_bar.
struct Kernel {
    Profile profile = Profile::uniform_ball;
    int dim = 1;
    double r_bar = 1.0;
    double r1 = 1.0;
    double A = 0.5;
    double J_bar = 1.0;
};

Kernel make_kernel(Profile profile, int dim = 1, double r_bar = 1.0, double J_bar = 1.0);

// Radial density J(|y|) of the profile, normalized analytically to mass J_bar.
double kernel_density(const Kernel& kernel, double r);

// Symmetric midpoint quadrature of the kernel on grid offsets.
// offsets are stored in canonical order: zero offset first, then +/- pairs
// adjacent (positive representative first) sorted by (|y|^2, di, dj), so
// left-to-right reductions cancel odd moments exactly.
struct StencilWeights {
    int dim = 1;
    double h = 0.1;
    double r_bar = 1.0;
    double r1 = 1.0;   // kernel core radius, carried for diagnostics preconditions
    double j_bar = 1.0;
    int halo = 0;  // max |offset component|, the ring a nonlocal op can touch
    std::vector<std::array<int, 2>> offsets;  // grid offsets (di, dj); dj = 0 in 1-D
    Eigen::ArrayXd weights;

    Point offset_point(std::size_t k) const {
        return {offsets[k][0] * h, dim == 2 ? offsets[k][1] * h : 0.0};
    }
};

StencilWeights build_weights(const Kernel& kernel, double h);

// Canonical-order (left-to-right) mass of the stencil; build_weights absorbs
// rounding so this equals the kernel mass bitwise. Reductions in other orders
// may differ by ulps and are not part of the contract.
double stencil_mass(const StencilWeights& weights);

}  // namespace nlkpp
