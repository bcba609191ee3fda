#include "nlkpp/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nlkpp/csvio.hpp"
#include "nlkpp/errors.hpp"
#include "nlkpp/hj.hpp"
#include "nlkpp/kpp.hpp"
#include "nlkpp/metric.hpp"
#include "nlkpp/pool.hpp"
#include "nlkpp/rng.hpp"

namespace nlkpp {

namespace {

using nlohmann::json;

// --------------------------------------------------------------------------
// key-path plumbing
// --------------------------------------------------------------------------

const json* walk(const json& doc, const std::string& key_path) {
    const json* cur = &doc;
    std::stringstream ss(key_path);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!cur->is_object()) return nullptr;
        auto it = cur->find(part);
        if (it == cur->end()) return nullptr;
        cur = &*it;
    }
    return cur;
}

[[noreturn]] void bad_key(const std::string& key_path, const char* want) {
    throw ConfigError("missing or invalid config key (expected " +
                      std::string(want) + "): " + key_path);
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void write_text(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << text;
    if (!out) throw ConfigError("write failed: " + path);
}

// Refuse to mix outputs of different configs in one directory.
void ensure_out_dir(const std::string& out_dir, const std::string& hash) {
    std::filesystem::create_directories(out_dir);
    const std::string rep_path = out_dir + "/report.json";
    if (!std::filesystem::exists(rep_path)) return;
    std::ifstream in(rep_path, std::ios::binary);
    json old;
    try {
        in >> old;
    } catch (const std::exception&) {
        throw ConfigError("unreadable existing report: " + rep_path);
    }
    const auto* prev = walk(old, "meta.config_hash");
    if (prev == nullptr || !prev->is_string())
        throw ConfigError("existing report lacks a config hash: " + rep_path);
    if (prev->get<std::string>() != hash)
        throw ConfigError("refusing to merge: " + out_dir + " holds results for " +
                          prev->get<std::string>() + ", current config is " + hash);
}

json make_report(const std::string& command, const std::string& hash,
                 const json& metrics, long long wall_ms) {
    json rep;
    rep["meta"]["command"] = command;
    rep["meta"]["config_hash"] = hash;
    rep["meta"]["code_version"] = "1.0.0";
    // wall-clock lives under meta and is excluded from the determinism contract
    rep["meta"]["wall_ms"] = wall_ms;
    rep["metrics"] = metrics;
    return rep;
}

void save_report(const std::string& out_dir, const json& rep) {
    write_text(out_dir + "/report.json", rep.dump(2) + "\n");
}

class WallClock {
  public:
    long long ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - t0_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::vector<std::uint64_t> seed_list(const ExperimentConfig& cfg,
                                     const std::string& key,
                                     std::vector<std::uint64_t> dflt) {
    if (!cfg.has(key)) return dflt;
    std::vector<std::uint64_t> out;
    for (double v : cfg.num_list(key)) {
        if (v < 0 || v != std::floor(v)) bad_key(key, "list of nonnegative integers");
        out.push_back(static_cast<std::uint64_t>(v));
    }
    if (out.empty()) bad_key(key, "nonempty seed list");
    return out;
}

// Linear interpolation of a 1-D grid field at x (clamped to the grid).
double interp1d(const GridField& g, double x) {
    const double fi = (x - g.x0) / g.h;
    const int i0 = std::clamp(static_cast<int>(std::floor(fi)), 0, g.n1 - 2);
    const double w = std::clamp(fi - i0, 0.0, 1.0);
    return (1.0 - w) * g.at(i0, 0) + w * g.at(i0 + 1, 0);
}

double interp_xs(const Eigen::ArrayXd& xs, const Eigen::ArrayXd& vals, double x) {
    const double h = xs[1] - xs[0];
    const double fi = (x - xs[0]) / h;
    const auto i0 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(fi)),
                                             0, xs.size() - 2);
    const double w = std::clamp(fi - static_cast<double>(i0), 0.0, 1.0);
    return (1.0 - w) * vals[i0] + w * vals[i0 + 1];
}

std::string describe_field(const CoefficientField& f) {
    char buf[160];
    switch (f.generator) {
        case Generator::constant:
            std::snprintf(buf, sizeof buf, "constant(c0=%g)", f.c0);
            break;
        case Generator::periodic:
            std::snprintf(buf, sizeof buf, "periodic(base=%g,amp=%g,L=%g)",
                          f.periodic_base, f.periodic_amp, f.period_length);
            break;
        case Generator::checkerboard:
            std::snprintf(buf, sizeof buf,
                          "checkerboard(cell=%g,c=[%g,%g],sigma=%g,L=%g,seed=%llu)",
                          f.cell, f.c_lo, f.c_hi, f.mollify_sigma, f.period_length,
                          static_cast<unsigned long long>(f.seed));
            break;
        case Generator::poisson_bumps:
            std::snprintf(buf, sizeof buf,
                          "poisson(intensity=%g,base=%g,amp=%g,r=%g,L=%g,seed=%llu)",
                          f.intensity, f.base, f.amplitude, f.bump_radius,
                          f.period_length, static_cast<unsigned long long>(f.seed));
            break;
    }
    return buf;
}

InitialCondition ic_from_config(const ExperimentConfig& cfg) {
    InitialCondition ic;
    ic.dim = 1;
    ic.h = cfg.num("sim.h");
    ic.half_width = cfg.num("sim.half_width");
    const auto g0 = cfg.num_list("sim.g0");
    if (g0.size() != 2 || !(g0[0] < g0[1])) bad_key("sim.g0", "[a, b] with a < b");
    ic.g0_a = g0[0];
    ic.g0_b = g0[1];
    const std::string prof = cfg.str_or("sim.profile", "plateau");
    if (prof == "plateau")
        ic.profile = FrontProfile::plateau;
    else if (prof == "bump")
        ic.profile = FrontProfile::bump;
    else
        bad_key("sim.profile", "\"plateau\" or \"bump\"");
    return ic;
}

void require_1d(const CoefficientField& f, const char* cmd) {
    if (f.dimension != 1)
        throw ConfigError(std::string(cmd) + " runs are one-dimensional; set medium.dim = 1");
}

std::pair<double, double> front_span(const GridField& u, double level) {
    const auto pts = extract_front(u, level);
    double lo = pts.front().x, hi = pts.front().x;
    for (const auto& q : pts) {
        lo = std::min(lo, q.x);
        hi = std::max(hi, q.x);
    }
    return {lo, hi};
}

} // namespace

// ==========================================================================
// ExperimentConfig
// ==========================================================================

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + path);
    ExperimentConfig cfg;
    try {
        in >> cfg.doc;
    } catch (const std::exception& e) {
        throw ConfigError("config is not valid JSON (" + path + "): " + e.what());
    }
    if (!cfg.doc.is_object()) throw ConfigError("config root must be an object");
    return cfg;
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    try {
        cfg.doc = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!cfg.doc.is_object()) throw ConfigError("config root must be an object");
    return cfg;
}

bool ExperimentConfig::has(const std::string& key_path) const {
    return walk(doc, key_path) != nullptr;
}

double ExperimentConfig::num(const std::string& key_path) const {
    const json* v = walk(doc, key_path);
    if (v == nullptr || !v->is_number()) bad_key(key_path, "number");
    return v->get<double>();
}

double ExperimentConfig::num_or(const std::string& key_path, double dflt) const {
    return has(key_path) ? num(key_path) : dflt;
}

std::int64_t ExperimentConfig::integer(const std::string& key_path) const {
    const json* v = walk(doc, key_path);
    if (v == nullptr || !v->is_number_integer()) bad_key(key_path, "integer");
    return v->get<std::int64_t>();
}

std::int64_t ExperimentConfig::integer_or(const std::string& key_path,
                                          std::int64_t dflt) const {
    return has(key_path) ? integer(key_path) : dflt;
}

std::string ExperimentConfig::str(const std::string& key_path) const {
    const json* v = walk(doc, key_path);
    if (v == nullptr || !v->is_string()) bad_key(key_path, "string");
    return v->get<std::string>();
}

std::string ExperimentConfig::str_or(const std::string& key_path,
                                     const std::string& dflt) const {
    return has(key_path) ? str(key_path) : dflt;
}

bool ExperimentConfig::flag_or(const std::string& key_path, bool dflt) const {
    const json* v = walk(doc, key_path);
    if (v == nullptr) return dflt;
    if (!v->is_boolean()) bad_key(key_path, "boolean");
    return v->get<bool>();
}

std::vector<double> ExperimentConfig::num_list(const std::string& key_path) const {
    const json* v = walk(doc, key_path);
    if (v == nullptr || !v->is_array()) bad_key(key_path, "array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
        if (!e.is_number()) bad_key(key_path, "array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<double> ExperimentConfig::num_list_or(const std::string& key_path,
                                                  std::vector<double> dflt) const {
    return has(key_path) ? num_list(key_path) : std::move(dflt);
}

std::string config_hash(const ExperimentConfig& cfg) {
    json science = cfg.doc;
    science.erase("out");
    science.erase("threads");
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(science.dump())));
    return buf;
}

// ==========================================================================
// config -> domain objects
// ==========================================================================

CoefficientField field_from_config(const ExperimentConfig& cfg) {
    const std::string kind = cfg.str("medium.kind");
    const int dim = static_cast<int>(cfg.integer_or("medium.dim", 1));
    const double L = cfg.num_or("medium.period", 16.0);
    const double j_bar = cfg.num_or("kernel.j_bar", 1.0);
    try {
        if (kind == "constant") return make_constant(cfg.num("medium.c0"), dim, L);
        if (kind == "periodic")
            return make_periodic(cfg.num("medium.base"), cfg.num("medium.amp"), dim, L);
        if (kind == "checkerboard")
            return make_checkerboard(static_cast<std::uint64_t>(cfg.integer("medium.seed")),
                                     cfg.num("medium.cell"), cfg.num("medium.c_lo"),
                                     cfg.num("medium.c_hi"), cfg.num("medium.sigma"),
                                     dim, L, j_bar);
        if (kind == "poisson_bumps")
            return make_poisson_bumps(static_cast<std::uint64_t>(cfg.integer("medium.seed")),
                                      cfg.num("medium.intensity"), cfg.num("medium.base"),
                                      cfg.num("medium.amplitude"),
                                      cfg.num("medium.bump_radius"), dim, L, j_bar);
    } catch (const OscillationViolation& e) {
        throw OscillationViolation("medium.c_lo/medium.c_hi (vs kernel.j_bar): " +
                                   std::string(e.what()));
    } catch (const InvalidParam& e) {
        throw ConfigError("medium: " + std::string(e.what()));
    }
    bad_key("medium.kind",
            "\"constant\", \"periodic\", \"checkerboard\", or \"poisson_bumps\"");
}

Kernel kernel_from_config(const ExperimentConfig& cfg) {
    const std::string prof = cfg.str_or("kernel.profile", "uniform_ball");
    Profile profile;
    if (prof == "uniform_ball")
        profile = Profile::uniform_ball;
    else if (prof == "cosine_bump")
        profile = Profile::cosine_bump;
    else if (prof == "triangle")
        profile = Profile::triangle;
    else
        bad_key("kernel.profile", "\"uniform_ball\", \"cosine_bump\", or \"triangle\"");
    const int dim = static_cast<int>(cfg.integer_or("medium.dim", 1));
    return make_kernel(profile, dim, cfg.num_or("kernel.r_bar", 1.0),
                       cfg.num_or("kernel.j_bar", 1.0));
}

// ==========================================================================
// table persistence
// ==========================================================================

void save_table(const HamiltonianTable& table, const std::string& dir,
                const std::string& hash) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < table.p.size(); ++i)
        rows.push_back({table.p[i], table.value[i], table.error_bar[i]});
    write_csv(dir + "/hbar.csv", {"config_hash=" + hash}, "p,value,error_bar", rows);

    json side;
    side["config_hash"] = hash;
    side["lambda_seq"] = table.lambda_seq;
    side["seeds"] = table.seeds;
    side["extrap_order"] = table.extrap_order;
    side["field"] = table.field_desc;
    side["concavity_ok"] = table.concavity_ok;
    side["symmetry_dev"] = table.symmetry_dev;
    write_text(dir + "/hbar.json", side.dump(2) + "\n");
}

HamiltonianTable load_table(const std::string& csv_path) {
    const CsvData data = read_csv(csv_path);
    if (data.header != std::vector<std::string>{"p", "value", "error_bar"})
        throw ConfigError("table CSV must have header p,value,error_bar: " + csv_path);
    HamiltonianTable table;
    for (const auto& row : data.rows) {
        if (row.size() != 3)
            throw ConfigError("table CSV row width mismatch: " + csv_path);
        table.p.push_back(row[0]);
        table.value.push_back(row[1]);
        table.error_bar.push_back(row[2]);
    }
    if (table.p.size() < 2) throw ConfigError("table CSV has fewer than 2 rows");
    for (std::size_t i = 0; i + 1 < table.p.size(); ++i)
        if (!(table.p[i] < table.p[i + 1]))
            throw ConfigError("table CSV p column must increase strictly");
    for (double e : table.error_bar)
        if (e < 0.0) throw ConfigError("table CSV error bars must be nonnegative");

    const std::filesystem::path side =
        std::filesystem::path(csv_path).replace_extension(".json");
    if (std::filesystem::exists(side)) {
        std::ifstream in(side, std::ios::binary);
        json meta;
        try {
            in >> meta;
        } catch (const std::exception&) {
            throw ConfigError("unreadable table sidecar: " + side.string());
        }
        if (meta.contains("lambda_seq"))
            table.lambda_seq = meta["lambda_seq"].get<std::vector<double>>();
        if (meta.contains("seeds"))
            table.seeds = meta["seeds"].get<std::vector<std::uint64_t>>();
        if (meta.contains("extrap_order")) table.extrap_order = meta["extrap_order"];
        if (meta.contains("field")) table.field_desc = meta["field"];
        if (meta.contains("concavity_ok")) table.concavity_ok = meta["concavity_ok"];
        if (meta.contains("symmetry_dev")) table.symmetry_dev = meta["symmetry_dev"];
    }
    return table;
}

HamiltonianTable table_from_config(const ExperimentConfig& cfg,
                                   const std::string& section, int threads) {
    if (cfg.has(section + ".table_csv"))
        return load_table(cfg.str(section + ".table_csv"));

    const double p_max = cfg.num_or("table.p_max", 2.0);
    const double p_min = cfg.num_or("table.p_min", -p_max);
    if (p_min != -p_max) bad_key("table.p_min", "-table.p_max (symmetric grid)");
    const auto n = cfg.integer_or("table.n", 17);
    if (n < 3 || n % 2 == 0) bad_key("table.n", "odd integer >= 3");

    // Mirrored construction keeps the grid symmetric to the last bit.
    const auto half = static_cast<std::size_t>((n - 1) / 2);
    std::vector<double> pg(static_cast<std::size_t>(n), 0.0);
    const double step = p_max / static_cast<double>(half);
    for (std::size_t k = 1; k <= half; ++k) {
        const double v = static_cast<double>(k) * step;
        pg[half + k] = v;
        pg[half - k] = -v;
    }

    const CoefficientField field = field_from_config(cfg);
    const Kernel kernel = kernel_from_config(cfg);
    const StencilWeights weights = build_weights(kernel, cfg.num("cell.h"));
    return tabulate_hbar(field, weights, pg,
                         cfg.num_list_or("cell.lambda_seq", {0.2, 0.1, 0.05, 0.025}),
                         seed_list(cfg, "cell.seeds", {1, 2, 3, 4, 5}),
                         cfg.num_or("cell.tol", 1e-9),
                         static_cast<int>(cfg.integer_or("cell.max_iter", 200000)),
                         threads);
}

// ==========================================================================
// cmd_hbar
// ==========================================================================

CommandResult cmd_hbar(const ExperimentConfig& cfg, const std::string& out_dir,
                       int threads) {
    const WallClock clock;
    const std::string hash = config_hash(cfg);
    ensure_out_dir(out_dir, hash);

    HamiltonianTable table;
    if (cfg.has("hbar.p")) {
        const auto pg = cfg.num_list("hbar.p");
        if (pg.empty()) bad_key("hbar.p", "nonempty p grid");
        const CoefficientField field = field_from_config(cfg);
        const Kernel kernel = kernel_from_config(cfg);
        const StencilWeights weights = build_weights(kernel, cfg.num("cell.h"));
        table = tabulate_hbar(field, weights, pg,
                              cfg.num_list_or("cell.lambda_seq", {0.2, 0.1, 0.05, 0.025}),
                              seed_list(cfg, "cell.seeds", {1, 2, 3, 4, 5}),
                              cfg.num_or("cell.tol", 1e-9),
                              static_cast<int>(cfg.integer_or("cell.max_iter", 200000)),
                              threads);
    } else {
        table = table_from_config(cfg, "hbar", threads);
    }
    save_table(table, out_dir, hash);

    json metrics;
    metrics["p"] = table.p;
    metrics["value"] = table.value;
    metrics["error_bar"] = table.error_bar;
    metrics["concavity_ok"] = table.concavity_ok;
    metrics["symmetry_dev"] = table.symmetry_dev;
    metrics["field"] = table.field_desc;
    CommandResult res;
    res.report = make_report("hbar", hash, metrics, clock.ms());
    save_report(out_dir, res.report);
    return res;
}

// ==========================================================================
// cmd_simulate
// ==========================================================================

CommandResult cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir,
                           int threads) {
    (void)threads; // a single trajectory is inherently sequential
    const WallClock clock;
    const std::string hash = config_hash(cfg);
    ensure_out_dir(out_dir, hash);

    const CoefficientField field = field_from_config(cfg);
    require_1d(field, "simulate");
    const Kernel kernel = kernel_from_config(cfg);
    const InitialCondition ic = ic_from_config(cfg);
    const double eps = cfg.num_or("sim.eps", 1.0);
    const double T = cfg.num("sim.T");
    const double dt = cfg.num("sim.dt");
    const int every = static_cast<int>(cfg.integer_or("sim.snapshot_every", 100));
    const double level = cfg.num_or("sim.level", 0.5);

    const Trajectory traj =
        simulate_scaled(eps, ReactionSpec{field}, kernel, ic, T, dt, every);

    std::vector<std::vector<double>> front_rows;
    for (std::size_t f = 0; f < traj.frames.size(); ++f) {
        const auto [lo, hi] = front_span(traj.frames[f], level);
        front_rows.push_back({traj.times[f], lo, hi});
    }
    write_csv(out_dir + "/front.csv", {"config_hash=" + hash}, "t,x_left,x_right",
              front_rows);

    if (cfg.flag_or("sim.save_snapshots", false)) {
        std::vector<std::vector<double>> rows;
        for (std::size_t f = 0; f < traj.frames.size(); ++f) {
            const GridField& u = traj.frames[f];
            for (int i = 0; i < u.n1; ++i)
                rows.push_back({traj.times[f], u.x(i), u.at(i, 0)});
        }
        write_csv(out_dir + "/snapshots.csv", {"config_hash=" + hash}, "t,x,u", rows);
    }

    const double t0 = cfg.num_or("sim.window_t0", T / 2.0);
    const double t1 = cfg.num_or("sim.window_t1", T);
    const SpeedFit fit = measure_speed_1d(traj, level, t0, t1);

    json metrics;
    metrics["speed"] = fit.speed;
    metrics["intercept"] = fit.intercept;
    metrics["fit_residual"] = fit.residual;
    metrics["eps"] = eps;
    metrics["dt"] = traj.dt;
    metrics["frames"] = traj.frames.size();
    metrics["window"] = {t0, t1};
    CommandResult res;
    res.report = make_report("simulate", hash, metrics, clock.ms());
    save_report(out_dir, res.report);
    return res;
}

// ==========================================================================
// cmd_vi
// ==========================================================================

CommandResult cmd_vi(const ExperimentConfig& cfg, const std::string& out_dir,
                     int threads) {
    const WallClock clock;
    const std::string hash = config_hash(cfg);
    ensure_out_dir(out_dir, hash);

    const HamiltonianTable table = table_from_config(cfg, "vi", threads);
    const auto g0 = cfg.num_list("vi.g0");
    if (g0.size() != 2 || !(g0[0] < g0[1])) bad_key("vi.g0", "[a, b] with a < b");
    const double T = cfg.num("vi.T");
    const double h = cfg.num("vi.h");
    const double dt = cfg.num_or("vi.dt", 0.0);
    const int every = static_cast<int>(cfg.integer_or("vi.snapshot_every", 0));

    const VISolution sol = solve_vi(table, g0[0], g0[1], T, h, dt, every);
    const double delta = cfg.num_or("vi.delta", 1e-6 * sol.m_big);

    std::vector<std::vector<double>> front_rows;
    for (std::size_t f = 0; f < sol.frames.size(); ++f) {
        const auto cross = front_crossings(sol.xs, sol.frames[f], delta);
        if (cross.empty()) throw EmptyFront("front region vanished from a frame");
        front_rows.push_back({sol.times[f], cross.front(), cross.back()});
    }
    write_csv(out_dir + "/vi_front.csv", {"config_hash=" + hash}, "t,x_left,x_right",
              front_rows);

    if (cfg.flag_or("vi.save_snapshots", false)) {
        std::vector<std::vector<double>> rows;
        for (std::size_t f = 0; f < sol.frames.size(); ++f)
            for (Eigen::Index i = 0; i < sol.xs.size(); ++i)
                rows.push_back({sol.times[f], sol.xs[i], sol.frames[f][i]});
        write_csv(out_dir + "/vi_phi.csv", {"config_hash=" + hash}, "t,x,phi", rows);
    }

    const SpeedFit fit = measure_vi_speed(sol, T / 2.0, T, 1, delta);
    json metrics;
    metrics["speed"] = fit.speed;
    metrics["intercept"] = fit.intercept;
    metrics["fit_residual"] = fit.residual;
    metrics["alpha"] = sol.alpha;
    metrics["m_big"] = sol.m_big;
    metrics["init_slope"] = sol.init_slope;
    metrics["dt"] = sol.dt;
    metrics["predicted_speed_right"] = predicted_speed(table, 1);
    CommandResult res;
    res.report = make_report("vi", hash, metrics, clock.ms());
    save_report(out_dir, res.report);
    return res;
}

// ==========================================================================
// cmd_metric
// ==========================================================================

CommandResult cmd_metric(const ExperimentConfig& cfg, const std::string& out_dir,
                         int threads) {
    const WallClock clock;
    const std::string hash = config_hash(cfg);
    ensure_out_dir(out_dir, hash);

    const CoefficientField base_field = field_from_config(cfg);
    require_1d(base_field, "metric");
    const Kernel kernel = kernel_from_config(cfg);
    const double h = cfg.num_or("metric.h", cfg.num("cell.h"));
    const StencilWeights weights = build_weights(kernel, h);
    const HamiltonianTable table = table_from_config(cfg, "metric", threads);

    const Point p{cfg.num_or("metric.p", 0.0), 0.0};
    double mu;
    if (cfg.has("metric.mu"))
        mu = cfg.num("metric.mu");
    else if (cfg.has("metric.mu_offset"))
        mu = table.eval(p.x) + cfg.num("metric.mu_offset");
    else
        bad_key("metric.mu", "metric.mu or metric.mu_offset");

    const auto dirs = cfg.num_list_or("metric.directions", {1.0, -1.0});
    for (double e : dirs)
        if (e == 0.0) bad_key("metric.directions", "nonzero directions (z = 0 excluded)");
    const auto ts = cfg.num_list("metric.ts");
    if (ts.size() < 2) bad_key("metric.ts", "at least two radii");
    const auto seeds = seed_list(cfg, "metric.seeds",
                                 {static_cast<std::uint64_t>(
                                     cfg.integer_or("medium.seed", 1))});
    const double tol = cfg.num_or("metric.tol", 1e-9);

    struct Task {
        std::uint64_t seed;
        double dir;
        RadialLimit rl;
        double dual = 0.0;
    };
    std::vector<Task> tasks;
    for (auto s : seeds)
        for (double e : dirs) tasks.push_back({s, e, {}, 0.0});

    parallel_for(static_cast<int>(tasks.size()), threads, [&](int k) {
        Task& t = tasks[k];
        const CoefficientField f = reseed(base_field, t.seed);
        t.rl = radial_limit(f, weights, p, mu, Point{t.dir > 0 ? 1.0 : -1.0, 0.0}, ts,
                            table, tol);
        t.dual = dual_formula(table, p, mu, Point{t.dir > 0 ? 1.0 : -1.0, 0.0});
    });

    std::vector<std::vector<double>> rows;
    json runs = json::array();
    double worst_agree = 0.0;
    for (const Task& t : tasks) {
        for (std::size_t i = 0; i < ts.size(); ++i)
            rows.push_back({static_cast<double>(t.seed), t.dir, ts[i], t.rl.ratios[i],
                            t.rl.m_bar});
        json r;
        r["seed"] = t.seed;
        r["direction"] = t.dir;
        r["m_bar"] = t.rl.m_bar;
        r["dual"] = t.dual;
        r["fit_residual"] = t.rl.fit_residual;
        const double agree = std::abs(t.rl.m_bar / t.dual - 1.0);
        r["rel_dev"] = agree;
        worst_agree = std::max(worst_agree, agree);
        runs.push_back(r);
    }
    write_csv(out_dir + "/metric.csv", {"config_hash=" + hash},
              "seed,direction,t,ratio,fitted_limit", rows);

    // Cross-seed spread of the radial ratios at the first and last radius.
    json spreads = json::array();
    if (seeds.size() >= 2) {
        for (double e : dirs) {
            auto spread_at = [&](std::size_t ti) {
                double mean = 0.0;
                int n = 0;
                for (const Task& t : tasks)
                    if (t.dir == e) {
                        mean += t.rl.ratios[ti];
                        ++n;
                    }
                mean /= n;
                double ss = 0.0;
                for (const Task& t : tasks)
                    if (t.dir == e) ss += (t.rl.ratios[ti] - mean) * (t.rl.ratios[ti] - mean);
                return std::sqrt(ss / (n - 1));
            };
            json s;
            s["direction"] = e;
            s["spread_first_t"] = spread_at(0);
            s["spread_last_t"] = spread_at(ts.size() - 1);
            spreads.push_back(s);
        }
    }

    json metrics;
    metrics["mu"] = mu;
    metrics["p"] = p.x;
    metrics["runs"] = runs;
    metrics["max_rel_dev"] = worst_agree;
    metrics["spreads"] = spreads;
    CommandResult res;
    res.report = make_report("metric", hash, metrics, clock.ms());
    save_report(out_dir, res.report);
    return res;
}

// ==========================================================================
// cmd_converge
// ==========================================================================

CommandResult cmd_converge(const ExperimentConfig& cfg, const std::string& out_dir,
                           int threads) {
    const WallClock clock;
    const std::string hash = config_hash(cfg);
    ensure_out_dir(out_dir, hash);

    const CoefficientField field = field_from_config(cfg);
    require_1d(field, "converge");
    const Kernel kernel = kernel_from_config(cfg);
    const HamiltonianTable table = table_from_config(cfg, "converge", threads);

    const auto eps_seq = cfg.num_list_or("converge.eps_seq", {0.4, 0.2, 0.1});
    if (eps_seq.size() < 2) bad_key("converge.eps_seq", "at least two eps values");
    for (std::size_t k = 0; k + 1 < eps_seq.size(); ++k)
        if (!(eps_seq[k + 1] < eps_seq[k]))
            bad_key("converge.eps_seq", "strictly decreasing eps");
    const double t_star = cfg.num_or("converge.t_star", 1.0);
    const double level = cfg.num_or("converge.level", 0.5);
    const double vi_h = cfg.num_or("converge.vi_h", 0.01);
    const InitialCondition ic = ic_from_config(cfg);
    const double dt = cfg.num("sim.dt");

    // Reference front from the obstacle problem at t*.
    const VISolution vi = solve_vi(table, ic.g0_a, ic.g0_b, t_star, vi_h);
    const double delta = 1e-6 * vi.m_big;
    const Eigen::ArrayXd& phi_star = vi.frames.back();
    const auto vi_cross = front_crossings(vi.xs, phi_star, delta);
    if (vi_cross.empty()) throw EmptyFront("obstacle-problem front region is empty");
    const double vi_left = vi_cross.front();
    const double vi_right = vi_cross.back();

    // Probes: interior at the origin (deep inside G0) plus quarter points
    // between the {phi = -0.2} boundary and the simulation box edge, checked
    // to lie inside {phi < -0.2}.
    struct Probe {
        double x;
        int region; // 0 interior, +-1 exterior side
        double phi;
    };
    std::vector<Probe> probes;
    probes.push_back({0.0, 0, interp_xs(vi.xs, phi_star, 0.0)});
    const auto phi02 = front_crossings(vi.xs, phi_star, 0.2);
    if (!phi02.empty()) {
        const double edge = ic.half_width - 2.0 * ic.h;
        for (int k = 1; k <= 3; ++k) {
            const double xr = phi02.back() + 0.25 * k * (edge - phi02.back());
            const double xl = phi02.front() + 0.25 * k * (-edge - phi02.front());
            for (double x : {xr, xl}) {
                const double ph = interp_xs(vi.xs, phi_star, x);
                if (ph < -0.2 && std::abs(x) < ic.half_width)
                    probes.push_back({x, x > 0 ? 1 : -1, ph});
            }
        }
    }

    struct EpsRun {
        double eps = 0.0;
        double d_h = 0.0;
        double left = 0.0, right = 0.0;
        std::vector<double> u_probe;
    };
    std::vector<EpsRun> runs(eps_seq.size());
    parallel_for(static_cast<int>(eps_seq.size()), threads, [&](int k) {
        EpsRun& r = runs[k];
        r.eps = eps_seq[k];
        const Trajectory traj =
            simulate_scaled(r.eps, ReactionSpec{field}, kernel, ic, t_star, dt, 0);
        const GridField& u = traj.frames.back();
        const auto [lo, hi] = front_span(u, level);
        r.left = lo;
        r.right = hi;
        r.d_h = std::max(std::abs(lo - vi_left), std::abs(hi - vi_right));
        for (const Probe& pr : probes) r.u_probe.push_back(interp1d(u, pr.x));
    });

    std::vector<std::vector<double>> conv_rows, probe_rows;
    for (const EpsRun& r : runs) {
        conv_rows.push_back({r.eps, r.d_h, r.left, r.right, vi_left, vi_right});
        for (std::size_t q = 0; q < probes.size(); ++q) {
            const double u = r.u_probe[q];
            const double dist = probes[q].region == 0 ? 1.0 - u : u;
            probe_rows.push_back({r.eps, probes[q].x,
                                  static_cast<double>(probes[q].region), u, dist});
        }
    }
    write_csv(out_dir + "/converge.csv", {"config_hash=" + hash},
              "eps,hausdorff,front_left,front_right,vi_left,vi_right", conv_rows);
    write_csv(out_dir + "/probes.csv", {"config_hash=" + hash},
              "eps,probe_x,region,u,dist_to_equilibrium", probe_rows);

    // Trend checks: reported, never silently passed.
    std::vector<std::string> violations;
    char buf[160];
    for (std::size_t k = 0; k + 1 < runs.size(); ++k) {
        if (!(runs[k + 1].d_h <= runs[k].d_h)) {
            std::snprintf(buf, sizeof buf,
                          "hausdorff increased from eps=%g (%g) to eps=%g (%g)",
                          runs[k].eps, runs[k].d_h, runs[k + 1].eps, runs[k + 1].d_h);
            violations.emplace_back(buf);
        }
    }
    for (std::size_t q = 0; q < probes.size(); ++q) {
        for (std::size_t k = 0; k < runs.size(); ++k) {
            const double u = runs[k].u_probe[q];
            if (probes[q].region == 0) {
                if (!(u >= 0.99)) {
                    std::snprintf(buf, sizeof buf,
                                  "interior probe x=%g fell to u=%g at eps=%g",
                                  probes[q].x, u, runs[k].eps);
                    violations.emplace_back(buf);
                }
            }
            if (k + 1 < runs.size()) {
                const double d0 = probes[q].region == 0 ? 1.0 - u : u;
                const double u1 = runs[k + 1].u_probe[q];
                const double d1 = probes[q].region == 0 ? 1.0 - u1 : u1;
                if (!(d1 <= d0)) {
                    std::snprintf(buf, sizeof buf,
                                  "probe x=%g distance grew from %g (eps=%g) to %g (eps=%g)",
                                  probes[q].x, d0, runs[k].eps, d1, runs[k + 1].eps);
                    violations.emplace_back(buf);
                }
            }
        }
    }
    for (const auto& v : violations) std::cerr << "trend violation: " << v << "\n";

    json metrics;
    metrics["eps"] = eps_seq;
    json jruns = json::array();
    for (const EpsRun& r : runs) {
        json jr;
        jr["eps"] = r.eps;
        jr["hausdorff"] = r.d_h;
        jr["front"] = {r.left, r.right};
        jr["probe_u"] = r.u_probe;
        jruns.push_back(jr);
    }
    metrics["runs"] = jruns;
    metrics["vi_front"] = {vi_left, vi_right};
    json jprobes = json::array();
    for (const Probe& pr : probes)
        jprobes.push_back({{"x", pr.x}, {"region", pr.region}, {"phi", pr.phi}});
    metrics["probes"] = jprobes;
    metrics["t_star"] = t_star;
    metrics["trend_ok"] = violations.empty();
    metrics["trend_violations"] = violations;

    CommandResult res;
    res.exit_code = violations.empty() ? 0 : 3;
    res.report = make_report("converge", hash, metrics, clock.ms());
    save_report(out_dir, res.report);
    return res;
}

// ==========================================================================
// cmd_validate
// ==========================================================================

namespace {

struct CheckResult {
    std::string name;
    bool ok = false;
    std::string observed;
};

template <typename F>
CheckResult run_check(const std::string& name, F&& body) {
    CheckResult r;
    r.name = name;
    try {
        r.observed = body();
        r.ok = true;
    } catch (const std::exception& e) {
        r.ok = false;
        r.observed = e.what();
    }
    return r;
}

std::string fmt_obs(const char* fmt, double a, double b = 0.0) {
    char buf[96];
    std::snprintf(buf, sizeof buf, fmt, a, b);
    return buf;
}

} // namespace

CommandResult cmd_validate(const ExperimentConfig& cfg, const std::string& out_dir,
                           int threads) {
    (void)threads;
    const WallClock clock;
    const std::string hash = config_hash(cfg);
    ensure_out_dir(out_dir, hash);

    std::vector<CheckResult> checks;

    checks.push_back(run_check("config.medium constructs", [&] {
        const CoefficientField f = field_from_config(cfg);
        return describe_field(f);
    }));
    checks.push_back(run_check("config.kernel constructs and meshes", [&] {
        const Kernel k = kernel_from_config(cfg);
        const StencilWeights w = build_weights(k, cfg.num("cell.h"));
        return fmt_obs("offsets=%g halo=%g", static_cast<double>(w.offsets.size()),
                       static_cast<double>(w.halo));
    }));

    bool field_ok = false;
    CoefficientField field;
    try {
        field = field_from_config(cfg);
        field_ok = true;
    } catch (const std::exception&) {
    }

    if (field_ok) {
        checks.push_back(run_check("medium range inside [c_min, c_max]", [&] {
            RngStream rng(0x5EEDu);
            double lo = 1e300, hi = -1e300;
            for (int i = 0; i < 2000; ++i) {
                const Point z{(rng.next_double() - 0.5) * 4.0 * field.period_length,
                              field.dimension == 2
                                  ? (rng.next_double() - 0.5) * 4.0 * field.period_length
                                  : 0.0};
                const double c = evaluate(field, z);
                lo = std::min(lo, c);
                hi = std::max(hi, c);
            }
            if (lo < field.c_min - 1e-12 || hi > field.c_max + 1e-12)
                throw RangeViolation(fmt_obs("observed [%.17g, %.17g]", lo, hi));
            return fmt_obs("observed [%.6g, %.6g]", lo, hi);
        }));
        checks.push_back(run_check("medium oscillation below kernel mass", [&] {
            const double j_bar = cfg.num_or("kernel.j_bar", 1.0);
            if (!(field.osc_rho < j_bar))
                throw OscillationViolation("medium.c_lo/medium.c_hi: osc >= kernel.j_bar");
            return fmt_obs("osc=%g < j_bar=%g", field.osc_rho, j_bar);
        }));
        checks.push_back(run_check("medium shift equivariance is exact", [&] {
            RngStream rng(0xC0FFEEu);
            double worst = 0.0;
            for (int i = 0; i < 16; ++i) {
                const Point a{(rng.next_double() - 0.5) * 10.0,
                              field.dimension == 2 ? (rng.next_double() - 0.5) * 10.0 : 0.0};
                const Point z{(rng.next_double() - 0.5) * 10.0,
                              field.dimension == 2 ? (rng.next_double() - 0.5) * 10.0 : 0.0};
                const double lhs = evaluate(shift(field, a), z);
                const double rhs = evaluate(field, Point{z.x + a.x, z.y + a.y});
                worst = std::max(worst, std::abs(lhs - rhs));
            }
            if (worst != 0.0) throw RangeViolation(fmt_obs("max dev %.3g", worst));
            return std::string("max dev 0");
        }));
    }

    const Kernel vk = make_kernel(Profile::uniform_ball, 1, 1.0, 1.0);
    const StencilWeights vw = build_weights(vk, 0.05);
    checks.push_back(run_check("stencil mass matches kernel mass bitwise", [&] {
        const double s = stencil_mass(vw);
        if (s != vk.J_bar) throw RangeViolation(fmt_obs("sum=%.17g", s));
        return fmt_obs("sum=%.17g", s);
    }));
    checks.push_back(run_check("stencil symmetry and odd moment", [&] {
        double m1 = 0.0;
        for (std::size_t k = 0; k < vw.offsets.size(); ++k)
            m1 += vw.weights[k] * vw.offset_point(k).x;
        if (m1 != 0.0) throw RangeViolation(fmt_obs("moment=%.3g", m1));
        return std::string("odd moment = 0 exactly");
    }));

    checks.push_back(run_check("constant-medium damped solve hits closed form", [&] {
        const CoefficientField cf = make_constant(1.0, 1, 16.0);
        const CellSolution sol = solve_cell(cf, vw, Point{1.0, 0.0}, 0.05, 1e-10);
        double s_h = 0.0;
        for (std::size_t k = 0; k < vw.offsets.size(); ++k)
            s_h += vw.weights[k] * std::exp(-vw.offset_point(k).x);
        const double exact = vk.J_bar - s_h - 1.0;
        const double dev = std::abs(-sol.lambda_v0 - exact);
        if (dev > 1e-8) throw RangeViolation(fmt_obs("dev=%.3g", dev));
        return fmt_obs("dev=%.3g", dev);
    }));

    checks.push_back(run_check("kpp step preserves ordering (200 trials)", [&] {
        GridField u = make_periodic_field(1, 0.25, 64, 1, -8.0, 0.0);
        GridField v = u, su = u, sv = u;
        const StencilWeights wq = build_weights(vk, 0.25);
        const NeighborTable tab = build_neighbor_table(u, wq);
        Eigen::ArrayXd cvals(64);
        for (int i = 0; i < 64; ++i) cvals[i] = 1.0;
        RngStream rng(0xABCDu);
        const double dt = 0.2;
        for (int trial = 0; trial < 200; ++trial) {
            for (int i = 0; i < 64; ++i) {
                u.vals[i] = rng.next_double() * 0.8;
                v.vals[i] = u.vals[i] + rng.next_double() * (1.0 - u.vals[i]);
            }
            GridField cu = u, cv = v;
            kpp_step(wq, tab, cvals, dt, 1.0, cu, su);
            kpp_step(wq, tab, cvals, dt, 1.0, cv, sv);
            for (int i = 0; i < 64; ++i)
                if (cu.vals[i] > cv.vals[i] + 1e-15)
                    throw RangeViolation(fmt_obs("ordering broke by %.3g", cu.vals[i] - cv.vals[i]));
        }
        return std::string("0 violations");
    }));

    if (cfg.has("sim.dt")) {
        checks.push_back(run_check("sim.dt satisfies the CFL bound", [&] {
            const CoefficientField f = field_from_config(cfg);
            const double eps = cfg.num_or("sim.eps", 1.0);
            const double j_bar = cfg.num_or("kernel.j_bar", 1.0);
            const double bound = 0.9 * eps / (j_bar + f.c_max);
            if (cfg.num("sim.dt") > bound)
                throw CFLViolation(fmt_obs("sim.dt: dt=%g > bound=%g", cfg.num("sim.dt"), bound));
            return fmt_obs("dt=%g <= bound=%g", cfg.num("sim.dt"), bound);
        }));
    }

    json jchecks = json::array();
    bool all_ok = true;
    for (const auto& c : checks) {
        json jc;
        jc["name"] = c.name;
        jc["ok"] = c.ok;
        jc["observed"] = c.observed;
        jchecks.push_back(jc);
        all_ok = all_ok && c.ok;
        if (!c.ok) std::cerr << "validate FAILED: " << c.name << ": " << c.observed << "\n";
    }

    json metrics;
    metrics["checks"] = jchecks;
    metrics["all_ok"] = all_ok;
    CommandResult res;
    res.exit_code = all_ok ? 0 : 1;
    res.report = make_report("validate", hash, metrics, clock.ms());
    save_report(out_dir, res.report);
    return res;
}

} // namespace nlkpp
