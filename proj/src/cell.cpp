#include "nlkpp/cell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlkpp/errors.hpp"
#include "nlkpp/pool.hpp"

namespace nlkpp {

namespace {

Eigen::ArrayXd transport_factors(const StencilWeights& weights, Point p) {
    Eigen::ArrayXd epk(static_cast<Eigen::Index>(weights.offsets.size()));
    for (std::size_t k = 0; k < weights.offsets.size(); ++k) {
        Point y = weights.offset_point(k);
        epk[static_cast<Eigen::Index>(k)] =
            weights.weights[static_cast<Eigen::Index>(k)] * std::exp(-(y.x * p.x + y.y * p.y));
    }
    return epk;
}

double max_drift_exponent(const StencilWeights& weights, Point p) {
    double m = 0.0;
    for (std::size_t k = 0; k < weights.offsets.size(); ++k) {
        Point y = weights.offset_point(k);
        m = std::max(m, std::abs(y.x * p.x + y.y * p.y));
    }
    return m;
}

// Phi over all nodes via the shifted-exponential convolution: with
// E = exp(v - max v), Phi(z) = sum_k epk_k E(z - y_k) / E(z). Identical in
// exact arithmetic to the nodewise single-exponent sum, and overflow-safe
// as long as osc(v) + max |y.p| stays below the exponent cap.
void phi_all(const Eigen::ArrayXd& epk, const NeighborTable& table, const Eigen::ArrayXd& v,
             double drift_exp, Eigen::ArrayXd& E, Eigen::ArrayXd& phi) {
    double vmax = v.maxCoeff();
    double vmin = v.minCoeff();
    if (vmax - vmin + drift_exp > kExpCap)
        throw Overflow("cell iterate oscillation exceeds the exponent cap");
    E = (v - vmax).exp();
    phi.setZero(v.size());
    for (Eigen::Index k = 0; k < epk.size(); ++k) {
        double a = epk[k];
        const auto& m = table.map[static_cast<std::size_t>(k)];
        for (Eigen::Index q = 0; q < v.size(); ++q) phi[q] += a * E[m[q]];
    }
    phi /= E;
}

GridField cell_grid(const CoefficientField& field, const StencilWeights& weights) {
    double L = field.period_length;
    if (L < 4.0 * weights.r_bar - 1e-12)
        throw InvalidParam("torus side must be >= 4 * r_bar");
    double nd = L / weights.h;
    int n = static_cast<int>(std::llround(nd));
    if (std::abs(nd - n) > 1e-9 || n < 2)
        throw InvalidParam("grid spacing must divide the torus side");
    return make_periodic_field(field.dimension, weights.h, n, field.dimension == 2 ? n : 1,
                               0.0, 0.0);
}

}  // namespace

Eigen::ArrayXd cell_update_once(const StencilWeights& weights, const NeighborTable& table,
                                Point p, const Eigen::ArrayXd& v, const Eigen::ArrayXd& cvals,
                                double lambda, double dtau) {
    Eigen::ArrayXd epk = transport_factors(weights, p);
    Eigen::ArrayXd E, phi;
    phi_all(epk, table, v, max_drift_exponent(weights, p), E, phi);
    return v + dtau * (-lambda * v - weights.j_bar + phi + cvals);
}

CellSolution solve_cell(const CoefficientField& field, const StencilWeights& weights,
                        Point p, double lambda, double tol, int max_iter) {
    if (lambda <= 0) throw InvalidParam("lambda must be positive");
    if (tol <= 0) throw InvalidParam("tol must be positive");
    if (field.dimension != weights.dim) throw InvalidParam("field/stencil dimension mismatch");

    GridField grid = cell_grid(field, weights);
    NeighborTable table = build_neighbor_table(grid, weights);
    GridField cgrid = sample_to_grid(field, grid);
    const Eigen::ArrayXd& cvals = cgrid.vals;

    Eigen::ArrayXd epk = transport_factors(weights, p);
    double drift_exp = max_drift_exponent(weights, p);
    double lam0 = epk.sum();

    Eigen::ArrayXd v = Eigen::ArrayXd::Constant(cvals.size(), cvals.mean() / lambda);
    double dtau = 0.9 / (lambda + lam0);
    double prev = std::numeric_limits<double>::infinity();

    CellSolution sol;
    sol.p = p;
    sol.lambda = lambda;
    sol.weights = weights;

    Eigen::ArrayXd E, phi, r;
    for (int it = 0; it < max_iter; ++it) {
        phi_all(epk, table, v, drift_exp, E, phi);
        r = -lambda * v - weights.j_bar + phi + cvals;
        double sup = r.abs().maxCoeff();
        if (sup <= tol * lambda) {
            sol.converged = true;
            sol.residual_sup = sup;
            sol.iterations = it;
            grid.vals = v;
            sol.v = grid;
            sol.lambda_v0 = lambda * sol.v.at(0, 0);
            return sol;
        }
        if (sup > prev)
            dtau = std::max(dtau / 2.0, 1e-6);
        else
            dtau = std::min(dtau * 1.1, 0.9 / (lambda + phi.maxCoeff()));
        prev = sup;
        v += dtau * r;
    }
    // best iterate, flagged: callers decide whether a non-converged run is usable
    sol.converged = false;
    sol.residual_sup = prev;
    sol.iterations = max_iter;
    grid.vals = v;
    sol.v = grid;
    sol.lambda_v0 = lambda * sol.v.at(0, 0);
    return sol;
}

HbarEstimate estimate_hbar(const CoefficientField& field, const StencilWeights& weights,
                           Point p, std::vector<double> lambda_seq,
                           std::vector<std::uint64_t> seeds, double tol, int max_iter,
                           int threads) {
    if (lambda_seq.size() < 3) throw InvalidParam("need at least 3 lambda values");
    for (std::size_t i = 1; i < lambda_seq.size(); ++i)
        if (lambda_seq[i] >= lambda_seq[i - 1])
            throw InvalidParam("lambda_seq must be strictly decreasing");
    if (seeds.empty()) throw InvalidParam("need at least one seed");

    const int nl = static_cast<int>(lambda_seq.size());
    const int ns = static_cast<int>(seeds.size());
    HbarEstimate est;
    est.per_seed.assign(nl, std::vector<double>(ns, 0.0));

    parallel_for(nl * ns, threads, [&](int job) {
        int li = job / ns;
        int si = job % ns;
        CoefficientField f = reseed(field, seeds[static_cast<std::size_t>(si)]);
        CellSolution sol = solve_cell(f, weights, p, lambda_seq[static_cast<std::size_t>(li)],
                                      tol, max_iter);
        if (!sol.converged)
            throw NonConvergent("cell solve hit max_iter during H estimation");
        est.per_seed[static_cast<std::size_t>(li)][static_cast<std::size_t>(si)] =
            -sol.lambda_v0;
    });

    for (int li = 0; li < nl; ++li) {
        const auto& row = est.per_seed[static_cast<std::size_t>(li)];
        double mean = 0.0;
        for (double x : row) mean += x;
        mean /= ns;
        double var = 0.0;
        for (double x : row) var += (x - mean) * (x - mean);
        double sd = ns > 1 ? std::sqrt(var / (ns - 1)) : 0.0;
        est.lambda_means.push_back(mean);
        est.lambda_stds.push_back(sd);
    }

    // Cauchy-like check on the mean sequence: the last gap must not exceed the
    // first beyond the noise floor (seed noise at the smallest lambda plus the
    // per-solve residual tolerance, which dominates on deterministic media).
    std::vector<double> gaps;
    for (int li = 1; li < nl; ++li)
        gaps.push_back(std::abs(est.lambda_means[static_cast<std::size_t>(li)] -
                                est.lambda_means[static_cast<std::size_t>(li - 1)]));
    double noise = 2.0 * est.lambda_stds.back() / std::sqrt(static_cast<double>(ns)) +
                   4.0 * tol * lambda_seq.front() + 1e-14;
    if (gaps.back() > std::max(gaps.front(), noise))
        throw NonConvergent("lambda sequence gaps are not shrinking");

    double m_last = est.lambda_means[static_cast<std::size_t>(nl - 1)];
    double m_prev = est.lambda_means[static_cast<std::size_t>(nl - 2)];
    double l_last = lambda_seq[static_cast<std::size_t>(nl - 1)];
    double l_prev = lambda_seq[static_cast<std::size_t>(nl - 2)];
    est.value = m_last + (m_last - m_prev) * l_last / (l_prev - l_last);
    est.error_bar = std::max(std::abs(est.value - m_last), est.lambda_stds.back());
    return est;
}

double HamiltonianTable::eval(double q) const {
    if (p.size() < 2) throw InvalidParam("table needs at least two entries");
    double qc = std::clamp(q, p.front(), p.back());
    auto it = std::upper_bound(p.begin(), p.end(), qc);
    std::size_t hi = std::min(static_cast<std::size_t>(it - p.begin()), p.size() - 1);
    std::size_t lo = hi == 0 ? 0 : hi - 1;
    if (hi == lo) return value[lo];
    double t = (qc - p[lo]) / (p[hi] - p[lo]);
    return value[lo] + t * (value[hi] - value[lo]);
}

double HamiltonianTable::max_abs_slope() const {
    double m = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i)
        m = std::max(m, std::abs((value[i] - value[i - 1]) / (p[i] - p[i - 1])));
    return m;
}

HamiltonianTable tabulate_hbar(const CoefficientField& field, const StencilWeights& weights,
                               const std::vector<double>& p_grid,
                               std::vector<double> lambda_seq,
                               std::vector<std::uint64_t> seeds, double tol, int max_iter,
                               int threads) {
    if (p_grid.size() < 2) throw InvalidParam("p_grid needs at least two entries");
    for (std::size_t i = 1; i < p_grid.size(); ++i)
        if (p_grid[i] <= p_grid[i - 1]) throw InvalidParam("p_grid must be increasing");
    for (double q : p_grid) {
        bool found = false;
        for (double r : p_grid)
            if (std::abs(q + r) < 1e-12) found = true;
        if (!found) throw InvalidParam("p_grid must be symmetric about 0");
    }

    HamiltonianTable table;
    table.p = p_grid;
    table.value.assign(p_grid.size(), 0.0);
    table.error_bar.assign(p_grid.size(), 0.0);
    table.lambda_seq = lambda_seq;
    table.seeds = seeds;

    parallel_for(static_cast<int>(p_grid.size()), threads, [&](int i) {
        HbarEstimate est = estimate_hbar(field, weights, {p_grid[static_cast<std::size_t>(i)], 0.0},
                                         lambda_seq, seeds, tol, max_iter, 1);
        table.value[static_cast<std::size_t>(i)] = est.value;
        table.error_bar[static_cast<std::size_t>(i)] = est.error_bar;
    });

    for (std::size_t i = 0; i < table.p.size(); ++i) {
        for (std::size_t j = i; j < table.p.size(); ++j) {
            if (std::abs(table.p[i] + table.p[j]) < 1e-12)
                table.symmetry_dev =
                    std::max(table.symmetry_dev, std::abs(table.value[i] - table.value[j]));
        }
    }
    for (std::size_t i = 1; i + 1 < table.p.size(); ++i) {
        if (std::abs(table.p[i + 1] - table.p[i] - (table.p[i] - table.p[i - 1])) > 1e-9)
            continue;  // midpoint check needs an equispaced triple
        double mid = table.value[i];
        double avg = 0.5 * (table.value[i - 1] + table.value[i + 1]);
        double slack = 2.0 * std::max({table.error_bar[i - 1], table.error_bar[i],
                                       table.error_bar[i + 1]});
        if (mid < avg - slack) table.concavity_ok = false;
    }
    return table;
}

CellDiagnostics diagnostics(const CellSolution& sol, double R) {
    const StencilWeights& w = sol.weights;
    const GridField& v = sol.v;
    double L = v.n1 * v.h;
    if (R < w.r1 / 2.0 - 1e-12 || R > L / 4.0 + 1e-12)
        throw InvalidParam("need r1/2 <= R <= torus_side/4");

    GridField wfield = v;
    double v0 = v.at(0, 0);
    wfield.vals = v.vals - v0;

    auto torus_dist = [&](double t, double side) {
        double d = std::abs(std::fmod(t, side));
        return std::min(d, side - d);
    };

    CellDiagnostics d;
    d.R = R;
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -vmin;
    d.psi_min = std::numeric_limits<double>::infinity();
    d.psi_max = 0.0;
    int n2 = v.dim == 2 ? v.n2 : 1;
    for (int i = 0; i < v.n1; ++i) {
        double dx = torus_dist(v.x(i), L);
        for (int j = 0; j < n2; ++j) {
            double dy = v.dim == 2 ? torus_dist(v.y(j), v.n2 * v.h) : 0.0;
            if (dx * dx + dy * dy > R * R) continue;
            double val = v.at(i, j);
            vmin = std::min(vmin, val);
            vmax = std::max(vmax, val);
            double psi = psi_quantity(w, sol.p, wfield, i, j);
            d.psi_min = std::min(d.psi_min, psi);
            d.psi_max = std::max(d.psi_max, psi);
        }
    }
    d.osc = vmax - vmin;
    d.c_osc = d.osc / R;
    return d;
}

double lipschitz_p_check(const CoefficientField& field, const StencilWeights& weights,
                         Point p1, Point p2, double lambda, double tol) {
    double dist = std::hypot(p1.x - p2.x, p1.y - p2.y);
    if (dist == 0.0) return 0.0;
    CellSolution a = solve_cell(field, weights, p1, lambda, tol);
    CellSolution b = solve_cell(field, weights, p2, lambda, tol);
    double sup = (lambda * (a.v.vals - b.v.vals)).abs().maxCoeff();
    return sup / dist;
}

}  // namespace nlkpp
