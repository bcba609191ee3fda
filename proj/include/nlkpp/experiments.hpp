#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "nlkpp/cell.hpp"
#include "nlkpp/kernel.hpp"
#include "nlkpp/media.hpp"

namespace nlkpp {

// ==========================================================================
// Experiment orchestration: JSON config, deterministic persistence, and the
// end-to-end convergence studies.  Key schema is documented in the README.
// ==========================================================================

struct ExperimentConfig {
    nlohmann::json doc;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& text);

    // Dotted key-path accessors; missing or mistyped keys throw ConfigError
    // naming the offending path.
    bool has(const std::string& key_path) const;
    double num(const std::string& key_path) const;
    double num_or(const std::string& key_path, double dflt) const;
    std::int64_t integer(const std::string& key_path) const;
    std::int64_t integer_or(const std::string& key_path, std::int64_t dflt) const;
    std::string str(const std::string& key_path) const;
    std::string str_or(const std::string& key_path, const std::string& dflt) const;
    bool flag_or(const std::string& key_path, bool dflt) const;
    std::vector<double> num_list(const std::string& key_path) const;
    std::vector<double> num_list_or(const std::string& key_path,
                                    std::vector<double> dflt) const;
};

// FNV-1a over the canonical (sorted-key) dump, excluding the execution-only
// keys "out" and "threads" so worker count cannot change any output byte.
std::string config_hash(const ExperimentConfig& cfg);

CoefficientField field_from_config(const ExperimentConfig& cfg);
Kernel kernel_from_config(const ExperimentConfig& cfg);

// Hamiltonian table persistence: hbar.csv (p,value,error_bar) plus an
// hbar.json sidecar carrying provenance; the CSV is the cross-tool contract.
void save_table(const HamiltonianTable& table, const std::string& dir,
                const std::string& hash);
HamiltonianTable load_table(const std::string& csv_path);

// Build the table a front/metric command consumes: prefer an explicit
// "<section>.table_csv" file, otherwise tabulate from the medium config.
HamiltonianTable table_from_config(const ExperimentConfig& cfg,
                                   const std::string& section, int threads);

struct CommandResult {
    int exit_code = 0;
    nlohmann::json report;
};

CommandResult cmd_hbar(const ExperimentConfig& cfg, const std::string& out_dir,
                       int threads);
CommandResult cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir,
                           int threads);
CommandResult cmd_vi(const ExperimentConfig& cfg, const std::string& out_dir,
                     int threads);
CommandResult cmd_metric(const ExperimentConfig& cfg, const std::string& out_dir,
                         int threads);
CommandResult cmd_converge(const ExperimentConfig& cfg, const std::string& out_dir,
                           int threads);
CommandResult cmd_validate(const ExperimentConfig& cfg, const std::string& out_dir,
                           int threads);

} // namespace nlkpp
