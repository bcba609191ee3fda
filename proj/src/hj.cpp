#include "nlkpp/hj.hpp"

#include <algorithm>
#include <cmath>

#include "nlkpp/errors.hpp"

namespace nlkpp {

namespace {

// Numerical Hamiltonian with the range guard: arguments may overshoot the
// table by at most 1e-9 (the eval clamp); anything further is a hard error.
double lf_hamiltonian(const HamiltonianTable& table, double pm, double pp,
                      double alpha) {
    const double arg = 0.5 * (pm + pp);
    const double pmax = table.p.back();
    const double pmin = table.p.front();
    if (arg > pmax + 1e-9 || arg < pmin - 1e-9)
        throw TableRangeExceeded("gradient left the tabulated range");
    return table.eval(arg) - 0.5 * alpha * (pp - pm);
}

double dist_to_interval(double x, double a, double b) {
    return std::max({a - x, x - b, 0.0});
}

} // namespace

// ==========================================================================
// vi_step_once
// ==========================================================================

Eigen::ArrayXd vi_step_once(const HamiltonianTable& table,
                            const Eigen::ArrayXd& phi, double h, double dt,
                            double alpha) {
    const Eigen::Index n = phi.size();
    if (n < 3) throw InvalidParam("need at least three nodes");
    Eigen::ArrayXd out = phi;
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        const double pm = (phi[i] - phi[i - 1]) / h;
        const double pp = (phi[i + 1] - phi[i]) / h;
        const double hval = lf_hamiltonian(table, pm, pp, alpha);
        out[i] = std::min(0.0, phi[i] - dt * hval);
    }
    // Neumann ends: the far-field plateau rises uniformly, so mirroring the
    // neighbor avoids an artificial boundary layer.
    out[0] = out[1];
    out[n - 1] = out[n - 2];
    return out;
}

// ==========================================================================
// solve_vi
// ==========================================================================

VISolution solve_vi(const HamiltonianTable& table, double g0_a, double g0_b,
                    double T, double h, double dt, int snapshot_every) {
    if (!(g0_b > g0_a)) throw InvalidParam("empty initial set");
    if (!(T > 0.0) || !(h > 0.0)) throw InvalidParam("T and h must be positive");

    VISolution sol;
    sol.h = h;
    sol.alpha = table.max_abs_slope();
    if (!(sol.alpha > 0.0)) throw InvalidParam("degenerate Hamiltonian table");

    const double cfl = h / (2.0 * sol.alpha);
    if (dt == 0.0) {
        dt = 0.8 * cfl;
    } else if (dt > cfl + 1e-15 || dt <= 0.0) {
        throw CFLViolation("time step exceeds h / (2 max |Hbar'|)");
    }
    const int steps = static_cast<int>(std::ceil(T / dt - 1e-9));
    dt = T / steps; // land exactly on T; only shrinks dt, so CFL still holds
    sol.dt = dt;

    double hmax = 0.0;
    for (double v : table.value) hmax = std::max(hmax, std::abs(v));
    sol.m_big = 2.0 * T * hmax + 10.0;

    // Envelope initial datum: cone of slope P (the table edge slope) about
    // G0, clipped below at -m_big.  A sharp cliff would pin the discrete
    // front; the cone keeps gradients inside the tabulated range.
    const std::size_t nt = table.p.size();
    const double slope_lo = std::abs((table.value[1] - table.value[0]) /
                                     (table.p[1] - table.p[0]));
    const double slope_hi = std::abs((table.value[nt - 1] - table.value[nt - 2]) /
                                     (table.p[nt - 1] - table.p[nt - 2]));
    sol.init_slope = std::max(slope_lo, slope_hi);

    const double reach = std::max(std::abs(g0_a), std::abs(g0_b)) +
                         sol.alpha * T + 4.0 * h + sol.m_big / sol.init_slope;
    const int half = static_cast<int>(std::ceil(reach / h));
    const Eigen::Index n = 2 * static_cast<Eigen::Index>(half) + 1;

    sol.xs.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        sol.xs[i] = (static_cast<double>(i) - half) * h;

    Eigen::ArrayXd cur(n), nxt(n);
    for (Eigen::Index i = 0; i < n; ++i)
        cur[i] = std::max(-sol.m_big,
                          -sol.init_slope * dist_to_interval(sol.xs[i], g0_a, g0_b));
    nxt = cur;

    if (snapshot_every <= 0) snapshot_every = std::max(1, steps / 64);

    sol.times.push_back(0.0);
    sol.frames.push_back(cur);
    for (int s = 1; s <= steps; ++s) {
        for (Eigen::Index i = 1; i + 1 < n; ++i) {
            const double pm = (cur[i] - cur[i - 1]) / h;
            const double pp = (cur[i + 1] - cur[i]) / h;
            const double hval = lf_hamiltonian(table, pm, pp, sol.alpha);
            nxt[i] = std::min(0.0, cur[i] - dt * hval);
        }
        nxt[0] = nxt[1];
        nxt[n - 1] = nxt[n - 2];
        cur.swap(nxt);
        if (s % snapshot_every == 0 || s == steps) {
            sol.times.push_back(s * dt);
            sol.frames.push_back(cur);
        }
    }
    return sol;
}

// ==========================================================================
// front_crossings
// ==========================================================================

std::vector<double> front_crossings(const Eigen::ArrayXd& xs,
                                    const Eigen::ArrayXd& phi, double delta) {
    if (xs.size() != phi.size()) throw InvalidParam("size mismatch");
    std::vector<double> out;
    const double lev = -delta;
    for (Eigen::Index i = 0; i + 1 < phi.size(); ++i) {
        const double a = phi[i] - lev;
        const double b = phi[i + 1] - lev;
        if (a == 0.0) out.push_back(xs[i]);
        if ((a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0))
            out.push_back(xs[i] + (xs[i + 1] - xs[i]) * a / (a - b));
    }
    if (phi[phi.size() - 1] == lev) out.push_back(xs[xs.size() - 1]);
    return out;
}

// ==========================================================================
// measure_vi_speed
// ==========================================================================

SpeedFit measure_vi_speed(const VISolution& sol, double t0, double t1, int side,
                          double delta) {
    if (delta == 0.0) delta = 1e-6 * sol.m_big;
    std::vector<double> ts, xs;
    for (std::size_t f = 0; f < sol.frames.size(); ++f) {
        const double t = sol.times[f];
        if (t < t0 - 1e-12 || t > t1 + 1e-12) continue;
        const auto cross = front_crossings(sol.xs, sol.frames[f], delta);
        if (cross.empty()) throw EmptyFront("no front crossing in window frame");
        ts.push_back(t);
        xs.push_back(side >= 0 ? cross.back() : cross.front());
    }
    if (ts.size() < 2) throw InvalidParam("need at least two frames in window");

    const std::size_t n = ts.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sx += ts[k];
        sy += xs[k];
        sxx += ts[k] * ts[k];
        sxy += ts[k] * xs[k];
    }
    SpeedFit fit;
    const double den = n * sxx - sx * sx;
    fit.speed = (n * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.speed * sx) / n;
    double rss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = xs[k] - (fit.speed * ts[k] + fit.intercept);
        rss += r * r;
    }
    fit.residual = std::sqrt(rss / n);
    return fit;
}

// ==========================================================================
// predicted_speed
// ==========================================================================

double predicted_speed(const HamiltonianTable& table, int e) {
    if (e != 1 && e != -1) throw InvalidParam("direction must be +-1");
    // Feasible q: -q e must stay inside the table.
    const double qmax = (e == 1) ? -table.p.front() : table.p.back();
    if (!(qmax > 0.0)) throw InvalidParam("table does not cover direction -e");

    const auto f = [&](double q) { return -table.eval(-q * e) / q; };

    const int nscan = 4000;
    int best = 1;
    double fbest = 1e300;
    for (int j = 1; j <= nscan; ++j) {
        const double q = qmax * j / nscan;
        const double v = f(q);
        if (v < fbest) {
            fbest = v;
            best = j;
        }
    }
    if (best >= nscan - 1)
        throw LevelSetEscapesTable("speed minimizer presses the table edge");

    double lo = qmax * (best - 1) / nscan;
    double hi = qmax * (best + 1) / nscan;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo);
    double x2 = lo + gr * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = f(x2);
        }
    }
    return std::min(f1, f2);
}

} // namespace nlkpp
