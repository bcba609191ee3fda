#include "nlkpp/media.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "nlkpp/errors.hpp"
#include "nlkpp/rng.hpp"

namespace nlkpp {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

double fold(double t, double L) {
    double r = std::fmod(t, L);
    return r < 0 ? r + L : r;
}

int wrap_cell(long long i, int m) {
    long long r = i % m;
    return static_cast<int>(r < 0 ? r + m : r);
}

// One cell bit of the random tiling. 1-D and 2-D combine the folded cell
// indices differently but both reduce to pure splitmix64 hashing.
bool cell_bit(std::uint64_t seed, int i) {
    return (splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(i)) & 1ULL) != 0;
}

bool cell_bit(std::uint64_t seed, int i, int j) {
    std::uint64_t si = splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(i));
    return (splitmix64(si ^ (static_cast<std::uint64_t>(j) * kGolden)) & 1ULL) != 0;
}

// Per-axis blend of the tiling: at most two cells contribute near a boundary.
struct AxisBlend {
    int idx[2];
    double w[2];
    int count;
};

AxisBlend axis_blend(double zf, double cell, double sigma, int m) {
    AxisBlend b{};
    double t = zf / cell;
    double i0d = std::floor(t);
    double s = t - i0d;
    long long i0 = static_cast<long long>(i0d);
    if (s * cell < sigma) {
        double w = smooth_step(s * cell / sigma);
        b.idx[0] = wrap_cell(i0, m);
        b.w[0] = w;
        b.idx[1] = wrap_cell(i0 - 1, m);
        b.w[1] = 1.0 - w;
        b.count = 2;
    } else if ((1.0 - s) * cell < sigma) {
        double w = smooth_step((1.0 - s) * cell / sigma);
        b.idx[0] = wrap_cell(i0, m);
        b.w[0] = w;
        b.idx[1] = wrap_cell(i0 + 1, m);
        b.w[1] = 1.0 - w;
        b.count = 2;
    } else {
        b.idx[0] = wrap_cell(i0, m);
        b.w[0] = 1.0;
        b.count = 1;
    }
    return b;
}

double eval_checkerboard(const CoefficientField& f, double zx, double zy) {
    int m = static_cast<int>(std::llround(f.period_length / f.cell));
    AxisBlend bx = axis_blend(fold(zx, f.period_length), f.cell, f.mollify_sigma, m);
    if (f.dimension == 1) {
        double out = 0.0;
        for (int a = 0; a < bx.count; ++a)
            out += bx.w[a] * (cell_bit(f.seed, bx.idx[a]) ? f.c_hi : f.c_lo);
        return out;
    }
    AxisBlend by = axis_blend(fold(zy, f.period_length), f.cell, f.mollify_sigma, m);
    double out = 0.0;
    for (int a = 0; a < bx.count; ++a)
        for (int b = 0; b < by.count; ++b)
            out += bx.w[a] * by.w[b] *
                   (cell_bit(f.seed, bx.idx[a], by.idx[b]) ? f.c_hi : f.c_lo);
    return out;
}

// Compactly supported C^infty bump profile, peak 1 at r = 0, support |r| < 1.
double bump_profile(double s2) {
    if (s2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s2));
}

double eval_poisson(const CoefficientField& f, double zx, double zy) {
    double L = f.period_length;
    double fx = fold(zx, L);
    double fy = f.dimension == 2 ? fold(zy, L) : 0.0;
    double r = f.bump_radius;
    double sum = 0.0;
    for (const Point& c : f.bump_centers) {
        // nearest periodic image per axis
        double dx = fx - c.x;
        dx -= L * std::round(dx / L);
        double s2 = (dx * dx) / (r * r);
        if (f.dimension == 2) {
            double dy = fy - c.y;
            dy -= L * std::round(dy / L);
            s2 += (dy * dy) / (r * r);
        }
        sum += f.amplitude * bump_profile(s2);
    }
    return std::min(f.base + sum, f.base + f.amplitude);
}

// Poisson(mean) count by Knuth's product method on a deterministic stream.
int poisson_count(RngStream& rng, double mean) {
    double limit = std::exp(-mean);
    int k = 0;
    double prod = 1.0;
    do {
        prod *= rng.next_double();
        ++k;
    } while (prod > limit);
    return k - 1;
}

// Realize the point set per unit cell of the torus so the expected total
// count is intensity * L^dim; each cell draws from its own hashed stream.
std::vector<Point> realize_poisson_centers(std::uint64_t seed, double intensity,
                                           double period_length, int dimension) {
    std::vector<Point> centers;
    int mc = std::max(1, static_cast<int>(std::llround(period_length)));
    double cell_len = period_length / mc;
    int mcy = dimension == 2 ? mc : 1;
    double cell_vol = dimension == 2 ? cell_len * cell_len : cell_len;
    for (int ci = 0; ci < mc; ++ci) {
        for (int cj = 0; cj < mcy; ++cj) {
            std::uint64_t sub = splitmix64(splitmix64(seed ^ 0xB5C0FBCFULL) ^
                                           (static_cast<std::uint64_t>(ci) * kGolden +
                                            static_cast<std::uint64_t>(cj)));
            RngStream rng(sub);
            int cnt = poisson_count(rng, intensity * cell_vol);
            for (int k = 0; k < cnt; ++k) {
                Point c;
                c.x = (ci + rng.next_double()) * cell_len;
                c.y = dimension == 2 ? (cj + rng.next_double()) * cell_len : 0.0;
                centers.push_back(c);
            }
        }
    }
    return centers;
}

double numeric_max_abs_slope(double (*g)(double), double a, double b) {
    const int n = 4000;
    double best = 0.0;
    double prev = g(a);
    for (int i = 1; i <= n; ++i) {
        double t = a + (b - a) * i / n;
        double cur = g(t);
        best = std::max(best, std::abs(cur - prev) / ((b - a) / n));
        prev = cur;
    }
    return best;
}

}  // namespace

double smooth_step(double r) {
    auto psi = [](double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; };
    double a = psi(1.0 + r);
    double b = psi(1.0 - r);
    return a / (a + b);
}

double bump_profile_mass(double amplitude, double radius, int dimension) {
    const int n = 20000;
    double sum = 0.0;
    if (dimension == 1) {
        double h = 2.0 * radius / n;
        for (int i = 0; i < n; ++i) {
            double x = -radius + (i + 0.5) * h;
            sum += amplitude * bump_profile((x * x) / (radius * radius)) * h;
        }
    } else {
        // radial shell quadrature: mass = int_0^R amp * profile(r^2/R^2) * 2*pi*r dr
        double h = radius / n;
        for (int i = 0; i < n; ++i) {
            double r = (i + 0.5) * h;
            sum += amplitude * bump_profile((r * r) / (radius * radius)) *
                   2.0 * M_PI * r * h;
        }
    }
    return sum;
}

CoefficientField make_constant(double c0, int dimension, double period_length) {
    if (dimension != 1 && dimension != 2) throw InvalidParam("dimension must be 1 or 2");
    if (c0 <= 0) throw InvalidParam("c0 must be positive");
    if (period_length <= 0) throw InvalidParam("period_length must be positive");
    CoefficientField f;
    f.dimension = dimension;
    f.generator = Generator::constant;
    f.period_length = period_length;
    f.c0 = c0;
    f.c_min = f.c_max = c0;
    f.osc_rho = 0.0;
    f.lipschitz_K = 0.0;
    return f;
}

CoefficientField make_periodic(double base, double amp, int dimension, double period_length) {
    if (dimension != 1 && dimension != 2) throw InvalidParam("dimension must be 1 or 2");
    if (amp < 0 || base - amp <= 0) throw InvalidParam("need 0 < base - amp (positivity floor)");
    if (period_length <= 0) throw InvalidParam("period_length must be positive");
    CoefficientField f;
    f.dimension = dimension;
    f.generator = Generator::periodic;
    f.period_length = period_length;
    f.periodic_base = base;
    f.periodic_amp = amp;
    f.c_min = base - amp;
    f.c_max = base + amp;
    f.osc_rho = 2.0 * amp;
    f.lipschitz_K = amp * 2.0 * M_PI / period_length * (dimension == 2 ? 2.0 : 1.0);
    return f;
}

CoefficientField make_checkerboard(std::uint64_t seed, double cell, double c_lo, double c_hi,
                                   double sigma, int dimension, double period_length,
                                   double j_bar) {
    if (dimension != 1 && dimension != 2) throw InvalidParam("dimension must be 1 or 2");
    if (c_lo <= 0) throw InvalidParam("c_lo must be >= kappa > 0");
    if (c_hi < c_lo) throw InvalidParam("need c_lo <= c_hi");
    if (c_hi - c_lo >= j_bar)
        throw OscillationViolation("c_hi - c_lo must stay below the kernel mass J_bar");
    if (cell <= 0) throw InvalidParam("cell must be positive");
    if (sigma <= 0 || sigma >= cell / 2) throw InvalidParam("need 0 < sigma < cell/2");
    double m = period_length / cell;
    if (std::abs(m - std::round(m)) > 1e-9 || std::round(m) < 2)
        throw InvalidParam("period_length must be an integer multiple (>= 2) of cell");
    CoefficientField f;
    f.dimension = dimension;
    f.generator = Generator::checkerboard;
    f.seed = seed;
    f.period_length = period_length;
    f.cell = cell;
    f.c_lo = c_lo;
    f.c_hi = c_hi;
    f.mollify_sigma = sigma;
    f.c_min = c_lo;
    f.c_max = c_hi;
    f.osc_rho = c_hi - c_lo;
    double theta_slope = numeric_max_abs_slope(&smooth_step, 0.0, 1.0);
    f.lipschitz_K = (c_hi - c_lo) * theta_slope / sigma * (dimension == 2 ? 2.0 : 1.0);
    return f;
}

CoefficientField make_poisson_bumps(std::uint64_t seed, double intensity, double base,
                                    double amplitude, double bump_radius, int dimension,
                                    double period_length, double j_bar) {
    if (dimension != 1 && dimension != 2) throw InvalidParam("dimension must be 1 or 2");
    if (intensity < 0) throw InvalidParam("intensity must be nonnegative");
    if (base <= 0) throw InvalidParam("base must be >= kappa > 0");
    if (amplitude < 0) throw InvalidParam("amplitude must be nonnegative");
    if (amplitude >= j_bar)
        throw OscillationViolation("amplitude must stay below the kernel mass J_bar");
    if (bump_radius <= 0) throw InvalidParam("bump_radius must be positive");
    if (period_length <= 0) throw InvalidParam("period_length must be positive");
    CoefficientField f;
    f.dimension = dimension;
    f.generator = Generator::poisson_bumps;
    f.seed = seed;
    f.period_length = period_length;
    f.intensity = intensity;
    f.base = base;
    f.amplitude = amplitude;
    f.bump_radius = bump_radius;
    f.mollify_sigma = bump_radius;
    f.c_min = base;
    f.c_max = base + amplitude;
    f.osc_rho = amplitude;

    if (intensity > 0 && amplitude > 0)
        f.bump_centers = realize_poisson_centers(seed, intensity, period_length, dimension);

    double slope = 0.0;  // max |d/ds bump_profile(s^2)| over s in [0,1], computed once
    {
        const int n = 4000;
        double prev = bump_profile(0.0);
        for (int i = 1; i <= n; ++i) {
            double s = static_cast<double>(i) / n;
            double cur = bump_profile(s * s);
            slope = std::max(slope, std::abs(cur - prev) * n);
            prev = cur;
        }
    }
    // overlap slack: a few bumps may stack before the clip engages
    f.lipschitz_K = amplitude * slope / bump_radius * 8.0;
    return f;
}

double evaluate(const CoefficientField& field, Point z) {
    double zx = z.x + field.shift_offset.x;
    double zy = z.y + field.shift_offset.y;
    switch (field.generator) {
        case Generator::constant:
            return field.c0;
        case Generator::periodic: {
            double L = field.period_length;
            double v = std::cos(2.0 * M_PI * fold(zx, L) / L);
            if (field.dimension == 2) v *= std::cos(2.0 * M_PI * fold(zy, L) / L);
            return field.periodic_base + field.periodic_amp * v;
        }
        case Generator::checkerboard:
            return eval_checkerboard(field, zx, zy);
        case Generator::poisson_bumps:
            return eval_poisson(field, zx, zy);
    }
    throw InvalidParam("unknown generator");
}

CoefficientField shift(const CoefficientField& field, Point a) {
    CoefficientField f = field;
    f.shift_offset.x = field.shift_offset.x + a.x;
    f.shift_offset.y = field.shift_offset.y + a.y;
    return f;
}

double empirical_mean(const CoefficientField& field, double R) {
    if (R <= 0) throw InvalidParam("R must be positive");
    if (R > field.period_length / 2.0 + 1e-12)
        throw InvalidParam("R must not exceed period_length/2");
    if (field.dimension == 1) {
        const int n = 4096;
        double h = 2.0 * R / n;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += evaluate(field, {-R + i * h, 0.0});
        return sum / n;
    }
    const int n = 256;
    double h = 2.0 * R / n;
    double sum = 0.0;
    long cnt = 0;
    for (int i = 0; i < n; ++i) {
        double x = -R + (i + 0.5) * h;
        for (int j = 0; j < n; ++j) {
            double y = -R + (j + 0.5) * h;
            if (x * x + y * y <= R * R) {
                sum += evaluate(field, {x, y});
                ++cnt;
            }
        }
    }
    return sum / static_cast<double>(cnt);
}

GridField sample_to_grid(const CoefficientField& field, const GridField& geometry) {
    GridField g = geometry;
    int lo = g.periodic ? 0 : -g.halo;
    int hi1 = g.periodic ? g.n1 : g.n1 + g.halo;
    int hi2 = g.dim == 2 ? (g.periodic ? g.n2 : g.n2 + g.halo) : 1;
    int lo2 = g.dim == 2 ? lo : 0;
    for (int i = lo; i < hi1; ++i)
        for (int j = lo2; j < hi2; ++j)
            g.at(i, j) = evaluate(field, g.node(i, j));
    return g;
}

CoefficientField reseed(const CoefficientField& field, std::uint64_t seed) {
    CoefficientField f = field;
    f.seed = seed;
    if (field.generator == Generator::poisson_bumps && field.intensity > 0 &&
        field.amplitude > 0)
        f.bump_centers = realize_poisson_centers(seed, field.intensity, field.period_length,
                                                 field.dimension);
    return f;
}

}  // namespace nlkpp
