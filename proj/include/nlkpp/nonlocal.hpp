#pragma once

#include "nlkpp/grid.hpp"
#include "nlkpp/kernel.hpp"

namespace nlkpp {

// Exponent cap guarding every exponential sum: beyond this a fixed-point
// iterate is diverging and must fail loudly rather than poison results.
inline constexpr double kExpCap = 700.0;

// L u(x) = sum_k w_k (u(x - y_k) - u(x)).
double apply_diffusion(const StencilWeights& weights, const GridField& u, int i, int j = 0);

// Phi(z) = sum_k w_k exp(-y_k . p + w(z - y_k) - w(z)); each exponent is a
// single sum checked against kExpCap before exponentiation.
double exp_transport(const StencilWeights& weights, Point p, const GridField& w,
                     int i, int j = 0);

// Psi(z) = Phi(z) * exp(w(z)).
double psi_quantity(const StencilWeights& weights, Point p, const GridField& w,
                    int i, int j = 0);

// Per-offset gather table: neighbor_index[k][node] = storage index of node - y_k.
// Shared by every solver's hot loop; built once per (grid, stencil) pair.
struct NeighborTable {
    Eigen::Index n = 0;                       // logical node count
    std::vector<std::vector<Eigen::Index>> map;  // [offset k][logical node]
    std::vector<Eigen::Index> self;           // storage index of each logical node
};

NeighborTable build_neighbor_table(const GridField& geometry, const StencilWeights& weights);

// Whole-field diffusion over logical nodes using a prebuilt table.
Eigen::ArrayXd apply_diffusion_all(const StencilWeights& weights, const GridField& u,
                                   const NeighborTable& table);

}  // namespace nlkpp
