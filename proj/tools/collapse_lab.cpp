#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include "collapse/harness.hpp"
#include "collapse/ma_solver.hpp"
#include "collapse/parallel.hpp"

namespace h = collapse::harness;

namespace {

enum Exit { kPass = 0, kAcceptance = 1, kUsage = 2, kSolver = 3 };

int run(const std::string& config_path, const std::string& out) {
    const auto cfg = h::load_config(config_path);
    const std::filesystem::path dir = out.empty() ? std::filesystem::path(cfg.output_dir) : std::filesystem::path(out);
    try {
        const auto bundle = h::run_experiment(cfg);
        h::write_bundle(bundle, dir);
        for (const auto& e : bundle.acceptance)
            std::cout << (e.pass ? "PASS " : "FAIL ") << e.name << "  measured " << std::setprecision(6) << e.measured << ' '
                      << e.relation << ' ' << e.bound << '\n';
        std::cout << cfg.name << ": " << (bundle.passed() ? "all checks passed" : "acceptance failure") << " (" << dir.string() << ")\n";
        return bundle.passed() ? kPass : kAcceptance;
    } catch (const h::ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        // solver breakdown: leave a diagnostic file next to the reports
        std::filesystem::create_directories(dir);
        std::ofstream(dir / "error.txt") << cfg.name << ": " << e.what() << '\n';
        std::cerr << "solver error: " << e.what() << '\n';
        return kSolver;
    }
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* env = std::getenv("COLLAPSE_LAB_THREADS")) {
        const int n = std::atoi(env);
        if (n < 1) {
            std::cerr << "COLLAPSE_LAB_THREADS must be a positive integer\n";
            return kUsage;
        }
        collapse::set_max_threads(n);
    }

    CLI::App app{"Numerical lab for the normalized Kahler-Ricci flow on collapsing fibrations", "collapse-lab"};
    app.require_subcommand(1);

    std::string config, out;
    auto* run_cmd = app.add_subcommand("run", "run one experiment and write its reports");
    run_cmd->add_option("--config", config, "experiment config (JSON)")->required();
    run_cmd->add_option("--out", out, "output directory (overrides output_dir)");

    bool json = false;
    auto* list_cmd = app.add_subcommand("list", "list the registered experiments");
    list_cmd->add_flag("--json", json, "machine-readable output");

    std::string vconfig;
    auto* validate_cmd = app.add_subcommand("validate", "check a config and print it with defaults filled");
    validate_cmd->add_option("--config", vconfig, "experiment config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*run_cmd) return run(config, out);
        if (*list_cmd) {
            if (json) {
                h::Json arr = h::Json::array();
                for (const auto& e : h::experiments()) arr.push_back({{"name", e.name}, {"description", e.description}, {"claims", e.claims}});
                std::cout << arr.dump(2) << '\n';
            } else {
                for (const auto& e : h::experiments())
                    std::cout << std::left << std::setw(22) << e.name << e.description << "  [" << e.claims << "]\n";
            }
            return kPass;
        }
        if (*validate_cmd) {
            std::cout << h::load_config(vconfig).to_json().dump(2) << '\n';
            return kPass;
        }
    } catch (const h::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
