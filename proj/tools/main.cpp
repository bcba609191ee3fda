#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "nlkpp/experiments.hpp"

namespace {

struct SubArgs {
    std::string config_path;
    std::int64_t seed_override = -1;
    std::string out_dir;
    int threads = 0;
};

void add_common_flags(CLI::App* sub, SubArgs& args) {
    sub->add_option("--config", args.config_path, "path to the JSON experiment config")
        ->required();
    sub->add_option("--seed-override", args.seed_override,
                    "replace medium.seed before hashing and running");
    sub->add_option("--out", args.out_dir, "output directory (default: config \"out\")");
    sub->add_option("--threads", args.threads,
                    "worker count; never affects results, only wall time");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for front propagation in random nonlocal media"};
    app.require_subcommand(1);

    using Command = nlkpp::CommandResult (*)(const nlkpp::ExperimentConfig&,
                                             const std::string&, int);
    const std::map<std::string, std::pair<std::string, Command>> commands = {
        {"hbar", {"tabulate the effective Hamiltonian", &nlkpp::cmd_hbar}},
        {"simulate", {"integrate the scaled reaction-dispersal equation", &nlkpp::cmd_simulate}},
        {"vi", {"march the obstacle-problem front", &nlkpp::cmd_vi}},
        {"metric", {"solve pinned first-passage problems and compare duals", &nlkpp::cmd_metric}},
        {"converge", {"compare scaled fronts against the obstacle limit", &nlkpp::cmd_converge}},
        {"validate", {"run the cross-module invariant suite", &nlkpp::cmd_validate}},
    };

    std::map<std::string, SubArgs> args;
    for (const auto& [name, desc] : commands)
        add_common_flags(app.add_subcommand(name, desc.first), args[name]);

    CLI11_PARSE(app, argc, argv);

    const std::string name = app.get_subcommands().front()->get_name();
    const SubArgs& a = args.at(name);
    try {
        nlkpp::ExperimentConfig cfg = nlkpp::ExperimentConfig::from_file(a.config_path);
        if (a.seed_override >= 0) cfg.doc["medium"]["seed"] = a.seed_override;
        const std::string out_dir =
            !a.out_dir.empty() ? a.out_dir : cfg.str_or("out", "out");
        const int threads =
            a.threads > 0 ? a.threads
                          : static_cast<int>(cfg.integer_or("threads", 1));
        const nlkpp::CommandResult res = commands.at(name).second(cfg, out_dir, threads);
        std::cout << name << ": wrote " << out_dir << "/report.json (exit "
                  << res.exit_code << ")\n";
        return res.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
