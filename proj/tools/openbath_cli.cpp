#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "openbath/experiment.hpp"

namespace fs = std::filesystem;
using namespace openbath;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw DomainError("cannot write " + p.string());
    return os;
}

Trajectory load_trajectory(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DomainError(path + ": cannot open trajectory");
    try {
        return read_trajectory_csv(is);
    } catch (const DomainError& e) {
        throw DomainError(path + ": " + e.what());
    }
}

int run_all(const std::vector<std::string>& configs, const fs::path& out, const RunOptions& opt) {
    for (const auto& path : configs) {
        const auto cfg = load_config(path);
        // several configs: one isolated subdirectory each
        const fs::path dir = configs.size() > 1 ? out / fs::path(path).stem() : out;
        const auto result = run(cfg, opt);
        const auto [tp, mp] = write_run(result, cfg, dir);
        std::cout << tp.string() << '\n' << mp.string() << '\n';
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"openbath: open quantum system dynamics with implicit (HEOM) and explicit (TDSE) baths"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version));

    bool verbose = false;
    int threads = 1;
    std::string out = ".";
    app.add_flag("-v,--verbose", verbose, "Progress to stderr");

    std::vector<std::string> run_configs;
    auto* run_cmd = app.add_subcommand("run", "Propagate a configured experiment; writes trajectory CSV and manifest");
    run_cmd->add_option("-c,--config", run_configs, "Experiment YAML (repeat for a batch)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("-o,--out", out, "Output directory");
    run_cmd->add_option("-t,--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    run_cmd->add_flag("-v,--verbose", verbose, "Progress to stderr");

    std::string traj_a, traj_b, cmp_out = "comparison.csv";
    std::vector<std::string> cmp_obs;
    auto* cmp_cmd = app.add_subcommand("compare", "Per-sample absolute differences of observables between two trajectories");
    cmp_cmd->add_option("a", traj_a, "First trajectory CSV")->required()->check(CLI::ExistingFile);
    cmp_cmd->add_option("b", traj_b, "Second trajectory CSV")->required()->check(CLI::ExistingFile);
    cmp_cmd->add_option("--observables", cmp_obs, "pop_i, coh_i_j, re_rho_i_j, im_rho_i_j, purity, trace");
    cmp_cmd->add_option("-o,--out", cmp_out, "Comparison CSV path");

    std::string config;
    auto add_table_cmd = [&](const char* name, const char* help) {
        auto* c = app.add_subcommand(name, help);
        c->add_option("-c,--config", config, "Experiment YAML")->required()->check(CLI::ExistingFile);
        c->add_option("-o,--out", out, "Output directory");
        c->add_flag("-v,--verbose", verbose, "Progress to stderr");
        return c;
    };
    auto* spec_cmd = add_table_cmd("spectrum", "Exact, reconstructed and discretized effective spectra on a grid");
    auto* feat_cmd = add_table_cmd("features", "Exponential BCF features of the configured HEOM bath");
    auto* disc_cmd = add_table_cmd("discretize", "Mode table of the configured explicit bath");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    }

    RunOptions opt{threads, verbose, &std::cerr};
    try {
        if (*run_cmd) return run_all(run_configs, out, opt);
        if (*cmp_cmd) {
            const auto a = load_trajectory(traj_a), b = load_trajectory(traj_b);
            const auto report = compare(a, b, cmp_obs);
            auto os = open_out(cmp_out);
            write_comparison_csv(os, report);
            for (std::size_t i = 0; i < report.observables.size(); ++i)
                std::cout << report.observables[i] << " max_abs_err " << format_number(report.max_error[i]) << " at_t_fs "
                          << format_number(report.time_of_max[i]) << '\n';
            return exit_ok;
        }
        const auto cfg = load_config(config);
        if (*spec_cmd) {
            const auto p = fs::path(out) / cfg.output.spectrum;
            auto os = open_out(p);
            emit_spectrum(os, cfg);
            std::cout << p.string() << '\n';
        } else if (*feat_cmd) {
            const auto p = fs::path(out) / cfg.output.features;
            auto os = open_out(p);
            write_feature_table(os, resolve_features(cfg));
            std::cout << p.string() << '\n';
        } else if (*disc_cmd) {
            const auto p = fs::path(out) / cfg.output.discretization;
            auto os = open_out(p);
            write_discrete_bath(os, resolve_discrete_bath(cfg));
            std::cout << p.string() << '\n';
        }
        return exit_ok;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << " (estimate " << e.estimate() << ", bound " << e.error_bound()
                  << ")\n";
        return exit_numerical;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const CapacityError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numerical;
    }
}
