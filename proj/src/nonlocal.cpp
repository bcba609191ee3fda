#include "nlkpp/nonlocal.hpp"

#include <cmath>

#include "nlkpp/errors.hpp"

namespace nlkpp {

double apply_diffusion(const StencilWeights& weights, const GridField& u, int i, int j) {
    double uz = u.at(i, j);
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.offsets.size(); ++k) {
        const auto& o = weights.offsets[k];
        acc += weights.weights[static_cast<Eigen::Index>(k)] * (u.at(i - o[0], j - o[1]) - uz);
    }
    return acc;
}

double exp_transport(const StencilWeights& weights, Point p, const GridField& w,
                     int i, int j) {
    double wz = w.at(i, j);
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.offsets.size(); ++k) {
        const auto& o = weights.offsets[k];
        double yx = o[0] * weights.h;
        double yy = o[1] * weights.h;
        double e = -(yx * p.x + yy * p.y) + w.at(i - o[0], j - o[1]) - wz;
        if (e > kExpCap) throw Overflow("exp_transport exponent exceeds cap");
        acc += weights.weights[static_cast<Eigen::Index>(k)] * std::exp(e);
    }
    return acc;
}

double psi_quantity(const StencilWeights& weights, Point p, const GridField& w,
                    int i, int j) {
    double wz = w.at(i, j);
    if (wz > kExpCap) throw Overflow("psi_quantity exponent exceeds cap");
    return exp_transport(weights, p, w, i, j) * std::exp(wz);
}

NeighborTable build_neighbor_table(const GridField& g, const StencilWeights& weights) {
    if (!g.periodic && g.halo < weights.halo)
        throw HaloMissing("field halo narrower than the stencil reach");
    NeighborTable t;
    t.n = static_cast<Eigen::Index>(g.n1) * (g.dim == 2 ? g.n2 : 1);
    t.self.resize(t.n);
    t.map.assign(weights.offsets.size(), std::vector<Eigen::Index>(t.n));
    Eigen::Index node = 0;
    int n2 = g.dim == 2 ? g.n2 : 1;
    for (int i = 0; i < g.n1; ++i) {
        for (int j = 0; j < n2; ++j, ++node) {
            t.self[node] = g.idx(i, j);
            for (std::size_t k = 0; k < weights.offsets.size(); ++k)
                t.map[k][node] = g.idx(i - weights.offsets[k][0], j - weights.offsets[k][1]);
        }
    }
    return t;
}

Eigen::ArrayXd apply_diffusion_all(const StencilWeights& weights, const GridField& u,
                                   const NeighborTable& t) {
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(t.n);
    for (std::size_t k = 0; k < weights.offsets.size(); ++k) {
        double wk = weights.weights[static_cast<Eigen::Index>(k)];
        const auto& m = t.map[k];
        for (Eigen::Index q = 0; q < t.n; ++q) out[q] += wk * u.vals[m[q]];
    }
    for (Eigen::Index q = 0; q < t.n; ++q) out[q] -= weights.j_bar * u.vals[t.self[q]];
    return out;
}

}  // namespace nlkpp
