#pragma once

#include "featadmm/functions.hpp"
#include "featadmm/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace featadmm::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything one `run` needs. Parsed from flat `key = value` text.
struct ExperimentConfig {
    // problem source: a partition directory, or synthetic parameters
    std::optional<std::filesystem::path> data_dir;
    int agents = 10;
    long samples = 500;
    std::vector<long> block_sizes{2};  // one entry is broadcast to every agent
    double noise = 0.1;

    std::string topology = "random";
    double degree = 3.0;
    std::optional<std::filesystem::path> topology_file;

    std::string loss = "squared_l2_loss";
    std::string reg = "elastic_net:eta1=1,eta2=1";

    int max_rounds = 2000;
    double rho = 2.0;
    int bcd_sweeps = 2;
    int theta_budget = 200;
    double theta_tolerance = 1e-8;
    std::string step_rule = "fixed_lipschitz";
    double subgradient_scale = 0.1;
    double stop_consensus_tol = 1e-10;
    double stop_estimate_tol = 1e-8;
    bool record_per_agent = false;
    std::optional<int> orientation;  // empty means calibrate
    bool oracle = true;

    std::uint64_t seed = 1;
    int trials = 1;
    std::filesystem::path out;

    std::vector<Eigen::Index> sizes() const;
    FunctionSpec loss_spec() const;
    FunctionSpec reg_spec() const;
    RunConfig run_config() const;
    void validate() const;
};

/// Applies one `key = value` assignment. Throws ConfigError on unknown keys
/// or malformed values.
void set_option(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// `#` starts a comment; blank lines are skipped. Errors carry the line number.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every effective parameter in the config syntax; loading it back yields an
/// identical config.
std::string render_manifest(const ExperimentConfig& cfg);

std::uint64_t data_seed(const ExperimentConfig& cfg, int trial);
std::uint64_t topology_seed(const ExperimentConfig& cfg, int trial);

struct TrialOutcome {
    int trial = 0;
    RunHistory history;
    std::optional<OracleSolution> oracle;
    double oracle_misalignment = 0.0;  // NaN without ground truth or oracle
    double objective = 0.0;
};

struct RunReport {
    std::vector<TrialOutcome> trials;
    int orientation = -1;
    /// All trials ended without numerical failure.
    bool ok() const;
};

/// Runs `cfg.trials` independent trials and writes manifest.txt, trial_NNN.csv,
/// averaged.csv and summary.csv under cfg.out. Trials run on up to
/// FEATADMM_THREADS workers.
RunReport run_experiment(const ExperimentConfig& cfg);

/// Solves the centralized problem for trial 0 and writes the oracle files.
OracleSolution run_oracle(const ExperimentConfig& cfg);

/// Writes the synthetic partition of `cfg` (trial 0) to cfg.out.
void run_synth(const ExperimentConfig& cfg);

/// Named curve families; each curve is one ExperimentConfig.
struct PresetCurve {
    std::string name;
    ExperimentConfig config;
};
std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown preset.
std::vector<PresetCurve> make_preset(const std::string& name);

/// Per-round means across trials; shorter trials are padded with their last
/// record.
std::vector<RoundRecord> average_histories(const std::vector<const RunHistory*>& hs);

/// Worker count from FEATADMM_THREADS, else the hardware concurrency.
int trial_workers();

} // namespace featadmm::cli
