#include "experiment.hpp"

#include "featadmm/format.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace featadmm;
using namespace featadmm::cli;

namespace {

struct Overrides {
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> max_rounds;
    std::optional<double> rho;
    std::optional<int> bcd_sweeps;

    void attach(CLI::App* app) {
        app->add_option("--out", out, "Output directory");
        app->add_option("--seed", seed, "Base seed");
        app->add_option("--trials", trials, "Independent trials")->check(CLI::PositiveNumber);
        app->add_option("--max-rounds", max_rounds, "Outer rounds per trial")->check(CLI::PositiveNumber);
        app->add_option("--rho", rho, "ADMM penalty")->check(CLI::PositiveNumber);
        app->add_option("--bcd-sweeps", bcd_sweeps, "Inner BCD sweeps per round")->check(CLI::PositiveNumber);
    }

    void apply(ExperimentConfig& c) const {
        if (!out.empty()) c.out = out;
        if (seed) c.seed = *seed;
        if (trials) c.trials = *trials;
        if (max_rounds) c.max_rounds = *max_rounds;
        if (rho) c.rho = *rho;
        if (bcd_sweeps) c.bcd_sweeps = *bcd_sweeps;
    }
};

void print_report(const std::string& label, const RunReport& rep) {
    for (const auto& t : rep.trials) {
        const auto& h = t.history;
        std::cout << label << "trial " << t.trial << ": " << h.rounds.size() << " rounds";
        if (!h.rounds.empty()) std::cout << ", misalignment " << format_double(h.rounds.back().misalignment);
        if (t.oracle) std::cout << " (centralized " << format_double(t.oracle_misalignment) << ")";
        if (h.numerical_failure) std::cout << ", NUMERICAL FAILURE";
        std::cout << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-partitioned dual-consensus ADMM simulator"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "Write a synthetic feature-partitioned dataset");
    ExperimentConfig synth_cfg;
    long synth_pi = 2;
    std::vector<long> synth_sizes;
    std::string synth_out;
    synth->add_option("--n", synth_cfg.agents, "Agents")->check(CLI::PositiveNumber);
    synth->add_option("--m", synth_cfg.samples, "Samples")->check(CLI::PositiveNumber);
    synth->add_option("--pi", synth_pi, "Features per agent")->check(CLI::PositiveNumber);
    synth->add_option("--sizes", synth_sizes, "Per-agent feature counts (overrides --pi)")->delimiter(',');
    synth->add_option("--noise", synth_cfg.noise, "Noise variance")->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", synth_cfg.seed, "Seed");
    synth->add_option("--out", synth_out, "Output directory")->required();

    auto* run_cmd = app.add_subcommand("run", "Run trials from a config file");
    std::string run_config;
    Overrides run_over;
    run_cmd->add_option("--config", run_config, "Config file (key = value)")->required()->check(CLI::ExistingFile);
    run_over.attach(run_cmd);

    auto* oracle_cmd = app.add_subcommand("oracle", "Solve the centralized problem for a config");
    std::string oracle_config;
    Overrides oracle_over;
    oracle_cmd->add_option("--config", oracle_config, "Config file")->required()->check(CLI::ExistingFile);
    oracle_over.attach(oracle_cmd);

    auto* repro = app.add_subcommand("reproduce", "Run a named experiment family and emit one CSV per curve");
    std::string preset;
    Overrides repro_over;
    repro->add_option("preset", preset, "elastic-net-pi | elastic-net-m | elastic-net-n | elastic-net-topo | ridge | lasso")
        ->required();
    repro_over.attach(repro);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            synth_cfg.block_sizes = synth_sizes.empty() ? std::vector<long>{synth_pi} : synth_sizes;
            synth_cfg.out = synth_out;
            run_synth(synth_cfg);
            std::cout << "wrote " << synth_cfg.agents << " blocks to " << synth_out << '\n';
            return 0;
        }
        if (run_cmd->parsed()) {
            auto cfg = load_config(run_config);
            run_over.apply(cfg);
            const auto rep = run_experiment(cfg);
            print_report("", rep);
            std::cout << "orientation " << rep.orientation << "; outputs in " << cfg.out.string() << '\n';
            return rep.ok() ? 0 : 1;
        }
        if (oracle_cmd->parsed()) {
            auto cfg = load_config(oracle_config);
            oracle_over.apply(cfg);
            const auto sol = run_oracle(cfg);
            std::cout << "method " << to_string(sol.method) << ", objective " << format_double(sol.objective_value)
                      << ", iterations " << sol.iterations_used << (sol.converged ? "" : " (NOT CONVERGED)") << '\n';
            return sol.converged ? 0 : 1;
        }
        if (repro->parsed()) {
            auto curves = make_preset(preset);
            const std::filesystem::path root = repro_over.out.empty() ? std::filesystem::path("reproduce") / preset
                                                                      : std::filesystem::path(repro_over.out);
            bool ok = true;
            for (auto& [name, cfg] : curves) {
                if (!repro_over.trials) cfg.trials = 10;
                repro_over.apply(cfg);
                cfg.out = root / "runs" / name;
                const auto rep = run_experiment(cfg);
                print_report(name + " ", rep);
                std::filesystem::copy_file(cfg.out / "averaged.csv", root / (name + ".csv"),
                                           std::filesystem::copy_options::overwrite_existing);
                ok = ok && rep.ok();
            }
            std::cout << "curves written to " << root.string() << '\n';
            return ok ? 0 : 1;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
