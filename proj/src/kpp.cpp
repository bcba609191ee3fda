#include "nlkpp/kpp.hpp"

#include <algorithm>
#include <cmath>

#include "nlkpp/errors.hpp"

namespace nlkpp {

namespace {

double profile_value(const InitialCondition& ic, double x, double y) {
    auto axis = [&](double t, double a, double b) {
        if (t <= a || t >= b) return 0.0;
        if (ic.profile == FrontProfile::bump) {
            double s = (2.0 * t - a - b) / (b - a);
            return std::exp(1.0 - 1.0 / (1.0 - s * s));
        }
        // plateau: trapezoid capped at 1; the ramp is grid-resolved but kept
        // narrow so the 1/2-level starts at the edge of the support
        double ramp = std::min((b - a) / 4.0, 4.0 * ic.h);
        return std::min({(t - a) / ramp, (b - t) / ramp, 1.0});
    };
    double v = axis(x, ic.g0_a, ic.g0_b);
    if (ic.dim == 2) v *= axis(y, ic.g0_a_y, ic.g0_b_y);
    return v;
}

void check_range(const GridField& u) {
    double lo = u.vals.minCoeff(), hi = u.vals.maxCoeff();
    if (lo < -1e-12 || hi > 1.0 + 1e-12)
        throw RangeViolation("state left [0,1] beyond round-off slack");
}

Trajectory run_euler(const CoefficientField& medium, const StencilWeights& weights,
                     const InitialCondition& ic, double T, double dt, int snapshot_every,
                     double eps) {
    if (T < 0) throw InvalidParam("T must be nonnegative");
    double cfl = 0.9 * eps / (weights.j_bar + medium.c_max);
    if (dt <= 0) throw InvalidParam("dt must be positive");
    if (dt > cfl * (1.0 + 1e-12))
        throw CFLViolation("dt exceeds the monotone bound 0.9*eps/(J_bar + c_max)");

    GridField u = build_initial(ic);
    // medium sampled at x/eps: the scaled run reads the microscopic field
    GridField cgrid = u;
    {
        int n2 = u.dim == 2 ? u.n2 : 1;
        for (int i = 0; i < u.n1; ++i)
            for (int j = 0; j < n2; ++j)
                cgrid.at(i, j) = evaluate(medium, {u.x(i) / eps, u.dim == 2 ? u.y(j) / eps : 0.0});
    }
    NeighborTable table = build_neighbor_table(u, weights);
    Eigen::ArrayXd cvals(table.n);
    for (Eigen::Index q = 0; q < table.n; ++q) cvals[q] = cgrid.vals[table.self[q]];

    Trajectory traj;
    traj.dt = dt;
    traj.times.push_back(0.0);
    traj.frames.push_back(u);

    long steps = static_cast<long>(std::ceil(T / dt - 1e-9));
    GridField scratch = u;
    double inv_eps = 1.0 / eps;
    for (long m = 1; m <= steps; ++m) {
        double step_dt = std::min(dt, T - (m - 1) * dt);
        kpp_step(weights, table, cvals, step_dt, inv_eps, u, scratch);
        check_range(u);
        double t = std::min(m * dt, T);
        bool last = m == steps;
        if (last || (snapshot_every > 0 && m % snapshot_every == 0)) {
            traj.times.push_back(t);
            traj.frames.push_back(u);
        }
    }
    return traj;
}

}  // namespace

void kpp_step(const StencilWeights& weights, const NeighborTable& table,
              const Eigen::ArrayXd& cvals, double dt, double inv_eps,
              GridField& u, GridField& scratch) {
    Eigen::ArrayXd& next = scratch.vals;
    next = u.vals;
    for (std::size_t k = 0; k < weights.offsets.size(); ++k) {
        double a = dt * inv_eps * weights.weights[static_cast<Eigen::Index>(k)];
        const auto& m = table.map[k];
        for (Eigen::Index q = 0; q < table.n; ++q) next[table.self[q]] += a * u.vals[m[q]];
    }
    double b = dt * inv_eps;
    for (Eigen::Index q = 0; q < table.n; ++q) {
        double uz = u.vals[table.self[q]];
        next[table.self[q]] += b * (-weights.j_bar * uz + cvals[q] * uz * (1.0 - uz));
    }
    std::swap(u.vals, scratch.vals);
}

GridField build_initial(const InitialCondition& ic) {
    if (ic.g0_b <= ic.g0_a) throw InvalidParam("G0 interval empty");
    if (ic.half_width <= 0 || ic.h <= 0) throw InvalidParam("bad grid extents");
    int n = static_cast<int>(std::llround(2.0 * ic.half_width / ic.h));
    if (n < 4) throw InvalidParam("grid too small");
    GridField u = make_periodic_field(ic.dim, ic.h, n, ic.dim == 2 ? n : 1,
                                      -ic.half_width, ic.dim == 2 ? -ic.half_width : 0.0);
    int n2 = u.dim == 2 ? u.n2 : 1;
    for (int i = 0; i < u.n1; ++i)
        for (int j = 0; j < n2; ++j)
            u.at(i, j) = profile_value(ic, u.x(i), u.dim == 2 ? u.y(j) : 0.0);
    return u;
}

Trajectory simulate(const ReactionSpec& reaction, const StencilWeights& weights,
                    const InitialCondition& u0, double T, double dt, int snapshot_every) {
    return run_euler(reaction.field, weights, u0, T, dt, snapshot_every, 1.0);
}

Trajectory simulate_scaled(double eps, const ReactionSpec& reaction, const Kernel& kernel,
                           const InitialCondition& u0, double T, double dt,
                           int snapshot_every) {
    if (eps <= 0) throw InvalidParam("eps must be positive");
    // the macroscopic grid must resolve the scaled kernel reach with >= 8 nodes
    if (u0.h > eps * kernel.r_bar / 8.0 + 1e-12)
        throw InvalidParam("grid spacing cannot resolve eps*r_bar with 8 nodes");
    StencilWeights micro = build_weights(kernel, u0.h / eps);
    return run_euler(reaction.field, micro, u0, T, dt, snapshot_every, eps);
}

GridField hopf_cole(const GridField& u, double eps, double floor_val) {
    if (floor_val <= 0) throw InvalidParam("floor must be positive");
    if (eps <= 0) throw InvalidParam("eps must be positive");
    GridField phi = u;
    phi.vals = eps * u.vals.max(floor_val).log();
    return phi;
}

std::vector<Point> extract_front(const GridField& u, double level) {
    if (level <= 0 || level >= 1) throw InvalidParam("level must lie in (0,1)");
    std::vector<Point> pts;
    auto scan = [&](auto value, auto coord, int count, auto emit) {
        for (int i = 0; i + 1 < count; ++i) {
            double a = value(i), b = value(i + 1);
            if ((a - level) * (b - level) < 0 || (a == level && b != level)) {
                double t = (level - a) / (b - a);
                emit(coord(i) + t * (coord(i + 1) - coord(i)));
            }
        }
    };
    if (u.dim == 1) {
        scan([&](int i) { return u.at(i); }, [&](int i) { return u.x(i); }, u.n1,
             [&](double x) { pts.push_back({x, 0.0}); });
    } else {
        for (int j = 0; j < u.n2; ++j)
            scan([&](int i) { return u.at(i, j); }, [&](int i) { return u.x(i); }, u.n1,
                 [&](double x) { pts.push_back({x, u.y(j)}); });
        for (int i = 0; i < u.n1; ++i)
            scan([&](int j) { return u.at(i, j); }, [&](int j) { return u.y(j); }, u.n2,
                 [&](double y) { pts.push_back({u.x(i), y}); });
    }
    if (pts.empty()) throw EmptyFront("state never crosses the level");
    return pts;
}

SpeedFit measure_speed_1d(const Trajectory& traj, double level, double t0, double t1) {
    std::vector<double> ts, xs;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        double t = traj.times[k];
        if (t < t0 - 1e-12 || t > t1 + 1e-12) continue;
        auto pts = extract_front(traj.frames[k], level);  // EmptyFront propagates
        double x = pts[0].x;
        for (const auto& p : pts) x = std::max(x, p.x);
        ts.push_back(t);
        xs.push_back(x);
    }
    if (ts.size() < 2) throw InvalidParam("need at least two snapshots in the window");
    double n = static_cast<double>(ts.size());
    double st = 0, sx = 0, stt = 0, stx = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        st += ts[k];
        sx += xs[k];
        stt += ts[k] * ts[k];
        stx += ts[k] * xs[k];
    }
    SpeedFit fit;
    fit.speed = (n * stx - st * sx) / (n * stt - st * st);
    fit.intercept = (sx - fit.speed * st) / n;
    double ss = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        double r = xs[k] - (fit.intercept + fit.speed * ts[k]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

}  // namespace nlkpp
