#include "nlkpp/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "nlkpp/errors.hpp"

namespace nlkpp {

namespace {

// Unnormalized radial shapes; mass normalization is analytic per (profile, dim).
double shape(Profile p, double s) {  // s = r / r_bar in [0, 1]
    switch (p) {
        case Profile::uniform_ball:
            return 1.0;
        case Profile::cosine_bump:
            return 1.0 + std::cos(M_PI * s);
        case Profile::triangle:
            return 1.0 - s;
    }
    return 0.0;
}

double shape_mass(Profile p, double r_bar, int dim) {
    switch (p) {
        case Profile::uniform_ball:
            return dim == 1 ? 2.0 * r_bar : M_PI * r_bar * r_bar;
        case Profile::cosine_bump:
            // 1-D: int_{-R}^{R} (1 + cos(pi r/R)) dr = 2R
            // 2-D: int (1 + cos(pi r/R)) over the disc = R^2 (pi - 4/pi)
            return dim == 1 ? 2.0 * r_bar : r_bar * r_bar * (M_PI - 4.0 / M_PI);
        case Profile::triangle:
            // 1-D: int = R; 2-D: int = pi R^2 / 3
            return dim == 1 ? r_bar : M_PI * r_bar * r_bar / 3.0;
    }
    return 0.0;
}

}  // namespace

Kernel make_kernel(Profile profile, int dim, double r_bar, double J_bar) {
    if (dim != 1 && dim != 2) throw InvalidParam("dimension must be 1 or 2");
    if (r_bar <= 0 || J_bar <= 0) throw InvalidParam("r_bar and J_bar must be positive");
    Kernel k;
    k.profile = profile;
    k.dim = dim;
    k.r_bar = r_bar;
    k.J_bar = J_bar;
    k.r1 = profile == Profile::uniform_ball ? r_bar : r_bar / 2.0;
    k.A = kernel_density(k, k.r1);
    return k;
}

double kernel_density(const Kernel& kernel, double r) {
    if (r > kernel.r_bar) return 0.0;
    double norm = kernel.J_bar / shape_mass(kernel.profile, kernel.r_bar, kernel.dim);
    return norm * shape(kernel.profile, r / kernel.r_bar);
}

StencilWeights build_weights(const Kernel& kernel, double h) {
    if (h <= 0) throw InvalidParam("h must be positive");
    if (h > kernel.r1 / 4.0 + 1e-12)
        throw InvalidParam("h too coarse: need h <= r1/4 to resolve the kernel core");

    const int dim = kernel.dim;
    const int sub = dim == 1 ? 8 : 4;  // midpoint subsampling per axis
    const int kmax = static_cast<int>(std::floor(kernel.r_bar / h)) + 1;

    // raw midpoint weights per offset cell
    auto raw_weight = [&](int di, int dj) {
        double yc_x = di * h, yc_y = dj * h;
        double acc = 0.0;
        if (dim == 1) {
            for (int a = 0; a < sub; ++a) {
                double x = yc_x - h / 2.0 + (a + 0.5) * h / sub;
                acc += kernel_density(kernel, std::abs(x));
            }
            return acc * h / sub;
        }
        for (int a = 0; a < sub; ++a) {
            double x = yc_x - h / 2.0 + (a + 0.5) * h / sub;
            for (int b = 0; b < sub; ++b) {
                double y = yc_y - h / 2.0 + (b + 0.5) * h / sub;
                acc += kernel_density(kernel, std::hypot(x, y));
            }
        }
        return acc * h * h / (sub * sub);
    };

    // positive representatives: (di > 0) or (di == 0 && dj > 0)
    struct Rep {
        int di, dj;
        double w;
        double y2;
    };
    std::vector<Rep> reps;
    double w_zero = raw_weight(0, 0);
    int jmax = dim == 2 ? kmax : 0;
    for (int di = -kmax; di <= kmax; ++di) {
        for (int dj = -jmax; dj <= jmax; ++dj) {
            if (di < 0 || (di == 0 && dj <= 0)) continue;
            double w = raw_weight(di, dj);
            if (w > 0.0) reps.push_back({di, dj, w, double(di) * di + double(dj) * dj});
        }
    }
    std::sort(reps.begin(), reps.end(), [](const Rep& a, const Rep& b) {
        if (a.y2 != b.y2) return a.y2 < b.y2;
        if (a.di != b.di) return a.di < b.di;
        return a.dj < b.dj;
    });

    StencilWeights sw;
    sw.dim = dim;
    sw.h = h;
    sw.r_bar = kernel.r_bar;
    sw.r1 = kernel.r1;
    sw.j_bar = kernel.J_bar;

    std::vector<double> w;
    sw.offsets.push_back({0, 0});
    w.push_back(w_zero);
    for (const Rep& r : reps) {
        sw.offsets.push_back({r.di, r.dj});
        w.push_back(r.w);  // mirrored weight copied below: exact +/- symmetry
        sw.offsets.push_back({-r.di, -r.dj});
        w.push_back(r.w);
    }

    // scale so the canonical-order sum equals J_bar, then absorb the last
    // rounding ulps into the zero-offset weight so equality is bitwise
    double total = 0.0;
    for (double x : w) total += x;
    double scale = kernel.J_bar / total;
    for (double& x : w) x *= scale;
    for (int pass = 0; pass < 8; ++pass) {
        double s = 0.0;
        for (double x : w) s += x;
        if (s == kernel.J_bar) break;
        w[0] += kernel.J_bar - s;
    }

    sw.weights = Eigen::Map<Eigen::ArrayXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    int halo = 0;
    for (auto& o : sw.offsets) halo = std::max({halo, std::abs(o[0]), std::abs(o[1])});
    sw.halo = halo;
    return sw;
}

double stencil_mass(const StencilWeights& weights) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < weights.weights.size(); ++k) s += weights.weights[k];
    return s;
}

}  // namespace nlkpp
