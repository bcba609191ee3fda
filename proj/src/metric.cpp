#include "nlkpp/metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "nlkpp/errors.hpp"
#include "nlkpp/nonlocal.hpp"

namespace nlkpp {

namespace {

double euclid(Point a, Point b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

// Linear exterior/initial data: a downward cone of slope a1 about z1.
double cone_value(Point z, Point z1, double a1) { return -a1 * euclid(z, z1); }

struct NodePlan {
    int i = 0;
    int j = 0;
    std::size_t store = 0;       // storage index in the halo field
    Point z{};                   // node coordinate
    double c = 0.0;              // medium sampled at z
    double b = 0.0;              // j_bar - w0 - c - mu (must be > 0)
    std::vector<std::size_t> nb; // storage indices of z - y_k, k != 0
};

// Subsolution test for the cone of slope a1: at every active node the cone
// must satisfy j_bar - Phi(cone) - c - mu <= 0.  Evaluated in closed form so
// it needs no stored field values.
bool cone_is_subsolution(const std::vector<NodePlan>& plan,
                         const StencilWeights& weights,
                         const std::vector<double>& epk, Point z1, double mu,
                         double a1) {
    const double w0 = weights.weights[0];
    for (const auto& node : plan) {
        const double here = cone_value(node.z, z1, a1);
        double phi = w0;
        for (std::size_t k = 1; k < weights.offsets.size(); ++k) {
            const Point y = weights.offset_point(k);
            const Point zm{node.z.x - y.x, node.z.y - y.y};
            phi += epk[k] * std::exp(cone_value(zm, z1, a1) - here);
        }
        if (weights.j_bar - phi - node.c - mu > 1e-12) return false;
    }
    return true;
}

} // namespace

// ==========================================================================
// solve_metric
// ==========================================================================

MetricSolution solve_metric(const CoefficientField& field,
                            const StencilWeights& weights, Point p, double mu,
                            Point z1, double r_dom, const HamiltonianTable& table,
                            double tol, int max_sweeps) {
    if (weights.dim != field.dimension)
        throw InvalidParam("stencil and medium dimension mismatch");
    if (r_dom < 8.0) throw InvalidParam("domain half-width must be at least 8");
    if (!(tol > 0.0)) throw InvalidParam("tolerance must be positive");

    // Well-posedness: mu must sit strictly below the effective Hamiltonian at
    // this tilt, beyond the tabulated uncertainty.
    if (weights.dim == 1 && p.y != 0.0)
        throw InvalidParam("one-dimensional stencil with transverse tilt");
    const double hbar_p = table.eval(weights.dim == 1 ? p.x : p.x);
    double margin = 0.0;
    for (double eb : table.error_bar) margin = std::max(margin, eb);
    if (mu >= hbar_p - margin)
        throw IllPosed("level mu is not strictly below the effective Hamiltonian");

    const double h = weights.h;
    const int half = static_cast<int>(std::lround(r_dom / h));
    if (std::abs(half * h - r_dom) > 1e-9)
        throw InvalidParam("domain half-width not commensurate with grid spacing");
    const int n1 = 2 * half + 1;
    const int n2 = (weights.dim == 2) ? n1 : 1;

    MetricSolution sol;
    sol.p = p;
    sol.mu = mu;
    sol.z1 = z1;
    sol.r_dom = r_dom;
    // The box is centered on the pin: the discrete problem is then exactly
    // shift-equivariant (field shifted by a, center shifted by -a relabels
    // nodes without changing any arithmetic).
    sol.m = make_halo_field(weights.dim, h, n1, n2, weights.halo,
                            z1.x - r_dom, weights.dim == 2 ? z1.y - r_dom : 0.0);
    GridField& m = sol.m;

    // Tilted weights for k != 0; the k = 0 term contributes the constant w0.
    const std::size_t K = weights.offsets.size();
    std::vector<double> epk(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const Point y = weights.offset_point(k);
        epk[k] = weights.weights[k] * std::exp(-(y.x * p.x + y.y * p.y));
    }
    const double w0 = weights.weights[0];

    // Classify nodes and precompute per-node data.  Lexicographic order of
    // the plan is the forward sweep order.
    std::vector<NodePlan> plan;
    plan.reserve(static_cast<std::size_t>(n1) * n2);
    std::vector<std::size_t> d1_store;
    for (int i = 0; i < n1; ++i) {
        for (int j = 0; j < n2; ++j) {
            const Point z = m.node(i, j);
            if (euclid(z, z1) <= 1.0 + 1e-12) {
                d1_store.push_back(m.idx(i, j));
                continue;
            }
            NodePlan node;
            node.i = i;
            node.j = j;
            node.store = m.idx(i, j);
            node.z = z;
            node.c = evaluate(field, z);
            node.b = weights.j_bar - w0 - node.c - mu;
            if (node.b <= 0.0)
                throw IllPosed("j_bar - w0 - c - mu must stay positive");
            node.nb.resize(K);
            for (std::size_t k = 1; k < K; ++k)
                node.nb[k] = m.idx(i - weights.offsets[k][0],
                                   j - weights.offsets[k][1]);
            plan.push_back(std::move(node));
        }
    }
    if (plan.empty()) throw InvalidParam("no nodes outside the pinned ball");

    // Barrier slope: double until the cone is a discrete subsolution, then
    // bisect down while keeping the verified upper end.
    double a_hi = 0.5;
    bool found = false;
    for (int it = 0; it < 9; ++it) {
        if (cone_is_subsolution(plan, weights, epk, z1, mu, a_hi)) {
            found = true;
            break;
        }
        a_hi *= 2.0;
    }
    if (!found) throw IllPosed("no linear subsolution up to slope 128");
    double a_lo = (a_hi == 0.5) ? 0.0 : a_hi / 2.0;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (a_lo + a_hi);
        if (cone_is_subsolution(plan, weights, epk, z1, mu, mid))
            a_hi = mid;
        else
            a_lo = mid;
    }
    sol.a1 = a_hi;
    sol.a2 = 0.0;

    // Initialize: barrier everywhere (including the halo, which stays frozen),
    // data 0 on D1.
    for (int i = -m.halo; i < n1 + m.halo; ++i) {
        const int jlo = (weights.dim == 2) ? -m.halo : 0;
        const int jhi = (weights.dim == 2) ? n2 + m.halo : 1;
        for (int j = jlo; j < jhi; ++j)
            m.vals[m.idx(i, j)] = cone_value(m.node(i, j), z1, sol.a1);
    }
    for (std::size_t s : d1_store) m.vals[s] = 0.0;

    // Monotone Gauss-Seidel with alternating sweep direction.  Starting from
    // a subsolution, the nodewise root s = m + log(Q/b) only rises.
    double* vals = m.vals.data();
    int pass = 0;
    for (; pass < max_sweeps; ++pass) {
        double max_delta = 0.0;
        const bool forward = (pass % 2 == 0);
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(plan.size());
        for (std::ptrdiff_t t = 0; t < n; ++t) {
            const NodePlan& node = plan[forward ? t : n - 1 - t];
            const double cur = vals[node.store];
            double q = 0.0;
            for (std::size_t k = 1; k < K; ++k)
                q += epk[k] * std::exp(vals[node.nb[k]] - cur);
            const double s = cur + std::log(q / node.b);
            if (s > cur) {
                max_delta = std::max(max_delta, s - cur);
                vals[node.store] = s;
            }
        }
        if (max_delta <= tol) {
            sol.converged = true;
            ++pass;
            break;
        }
    }
    sol.sweeps = pass;
    if (!sol.converged) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "pinned-problem sweeps exhausted after %d passes", pass);
        throw MaxIterExceeded(buf);
    }

    // Diagnostics: equation residual away from the box boundary, and the
    // largest data mismatch on the ring of nodes adjacent to D1.
    double res = 0.0;
    double jump = 0.0;
    const double trust = r_dom - weights.r_bar;
    for (const auto& node : plan) {
        const double cur = vals[node.store];
        if (std::abs(node.z.x - z1.x) <= trust &&
            (weights.dim == 1 || std::abs(node.z.y - z1.y) <= trust)) {
            double q = 0.0;
            for (std::size_t k = 1; k < K; ++k)
                q += epk[k] * std::exp(vals[node.nb[k]] - cur);
            res = std::max(res, std::abs(node.b - q));
        }
        if (euclid(node.z, z1) <= 1.0 + 1.5 * h)
            jump = std::max(jump, std::abs(cur));
    }
    sol.residual_sup = res;
    sol.jump = jump;
    return sol;
}

// ==========================================================================
// metric_root_at
// ==========================================================================

double metric_root_at(const MetricSolution& sol, const StencilWeights& weights,
                      const CoefficientField& field, int i, int j) {
    const GridField& m = sol.m;
    const Point z = m.node(i, j);
    if (euclid(z, sol.z1) <= 1.0 + 1e-12) return m.at(i, j);
    const double w0 = weights.weights[0];
    const double c = evaluate(field, z);
    const double b = weights.j_bar - w0 - c - sol.mu;
    if (b <= 0.0) throw IllPosed("j_bar - w0 - c - mu must stay positive");
    const double cur = m.at(i, j);
    double q = 0.0;
    for (std::size_t k = 1; k < weights.offsets.size(); ++k) {
        const Point y = weights.offset_point(k);
        const double epk =
            weights.weights[k] * std::exp(-(y.x * sol.p.x + y.y * sol.p.y));
        q += epk * std::exp(m.at(i - weights.offsets[k][0],
                                 j - weights.offsets[k][1]) -
                            cur);
    }
    return cur + std::log(q / b);
}

// ==========================================================================
// radial_limit
// ==========================================================================

RadialLimit radial_limit(const CoefficientField& field,
                         const StencilWeights& weights, Point p, double mu,
                         Point e, const std::vector<double>& ts,
                         const HamiltonianTable& table, double tol) {
    if (ts.empty()) throw InvalidParam("no evaluation radii");
    const double h = weights.h;
    double t_max = 0.0;
    for (double t : ts) {
        if (t < 1.0 + 2.0 * h)
            throw InvalidParam("evaluation radius inside the pinned ball");
        t_max = std::max(t_max, t);
    }
    const double norm = std::sqrt(e.x * e.x + e.y * e.y);
    if (std::abs(norm - 1.0) > 1e-12)
        throw InvalidParam("direction must be a unit vector");

    double r_dom = std::ceil(t_max + 2.0 * weights.r_bar);
    r_dom = std::max(r_dom, 8.0);
    // Round up until commensurate with the spacing.
    while (std::abs(std::lround(r_dom / h) * h - r_dom) > 1e-9) r_dom += 1.0;

    const MetricSolution sol =
        solve_metric(field, weights, p, mu, Point{0.0, 0.0}, r_dom, table, tol);
    const GridField& m = sol.m;

    RadialLimit out;
    out.e = e;
    out.ts = ts;
    for (double t : ts) {
        const Point z{t * e.x, t * e.y};
        // Multilinear interpolation between the surrounding nodes.
        const double fi = (z.x - m.x0) / h;
        const int i0 = std::clamp(static_cast<int>(std::floor(fi)), 0, m.n1 - 2);
        const double wx = fi - i0;
        double val;
        if (m.dim == 1) {
            val = (1.0 - wx) * m.at(i0, 0) + wx * m.at(i0 + 1, 0);
        } else {
            const double fj = (z.y - m.y0) / h;
            const int j0 =
                std::clamp(static_cast<int>(std::floor(fj)), 0, m.n2 - 2);
            const double wy = fj - j0;
            val = (1.0 - wx) * (1.0 - wy) * m.at(i0, j0) +
                  wx * (1.0 - wy) * m.at(i0 + 1, j0) +
                  (1.0 - wx) * wy * m.at(i0, j0 + 1) +
                  wx * wy * m.at(i0 + 1, j0 + 1);
        }
        out.ratios.push_back(val / t);
    }

    // Least-squares fit ratios = m_bar + slope / t.
    const std::size_t n = ts.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double x = 1.0 / ts[k];
        sx += x;
        sy += out.ratios[k];
        sxx += x * x;
        sxy += x * out.ratios[k];
    }
    const double den = n * sxx - sx * sx;
    if (n >= 2 && std::abs(den) > 1e-30) {
        out.slope = (n * sxy - sx * sy) / den;
        out.m_bar = (sy - out.slope * sx) / n;
    } else {
        out.slope = 0.0;
        out.m_bar = sy / n;
    }
    double rss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double pred = out.m_bar + out.slope / ts[k];
        rss += (out.ratios[k] - pred) * (out.ratios[k] - pred);
    }
    out.fit_residual = std::sqrt(rss / n);
    return out;
}

// ==========================================================================
// dual_formula
// ==========================================================================

double dual_formula(const HamiltonianTable& table, Point p, double mu, Point z) {
    if (p.y != 0.0 || z.y != 0.0)
        throw InvalidParam("tabulated Hamiltonians are one-dimensional");
    const std::size_t n = table.p.size();
    if (n < 3) throw InvalidParam("table too small for level-set scan");

    // g(q) = Hbar(p + q) - mu on the representable range of q.
    std::vector<double> qs(n), g(n);
    double gmax = -1e300;
    for (std::size_t i = 0; i < n; ++i) {
        qs[i] = table.p[i] - p.x;
        g[i] = table.value[i] - mu;
        gmax = std::max(gmax, g[i]);
    }
    if (gmax <= 0.0)
        throw IllPosed("level mu is not strictly below the effective Hamiltonian");
    if (g.front() >= 0.0 || g.back() >= 0.0)
        throw LevelSetEscapesTable("superlevel set reaches the table edge");

    double best = 1e300;
    bool any = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const bool cross = (g[i] <= 0.0 && g[i + 1] > 0.0) ||
                           (g[i] > 0.0 && g[i + 1] <= 0.0) ||
                           (g[i] == 0.0);
        if (!cross) continue;
        double qstar;
        if (g[i] == 0.0)
            qstar = qs[i];
        else
            qstar = qs[i] + (qs[i + 1] - qs[i]) * (0.0 - g[i]) / (g[i + 1] - g[i]);
        best = std::min(best, z.x * qstar);
        any = true;
    }
    if (!any) throw IllPosed("no level crossing found in table");
    return best;
}

// ==========================================================================
// max_unit_ball_osc
// ==========================================================================

double max_unit_ball_osc(const MetricSolution& sol) {
    const GridField& m = sol.m;
    const double h = m.h;
    const int reach = static_cast<int>(std::floor(1.0 / h));
    double worst = 0.0;
    for (int i = 0; i < m.n1; ++i) {
        for (int j = 0; j < m.n2; ++j) {
            const Point zc = m.node(i, j);
            if (std::abs(zc.x) > sol.r_dom - 1.0) continue;
            if (m.dim == 2 && std::abs(zc.y) > sol.r_dom - 1.0) continue;
            double lo = 1e300, hi = -1e300;
            for (int di = -reach; di <= reach; ++di) {
                const int jlo = (m.dim == 2) ? -reach : 0;
                const int jhi = (m.dim == 2) ? reach : 0;
                for (int dj = jlo; dj <= jhi; ++dj) {
                    if (di * di + dj * dj > reach * reach) continue;
                    const int ii = i + di;
                    const int jj = j + dj;
                    if (ii < 0 || ii >= m.n1) continue;
                    if (m.dim == 2 && (jj < 0 || jj >= m.n2)) continue;
                    const double v = m.at(ii, m.dim == 2 ? jj : 0);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
            if (hi >= lo) worst = std::max(worst, hi - lo);
        }
    }
    return worst;
}

} // namespace nlkpp
