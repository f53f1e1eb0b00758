#pragma once

#include "featadmm/agent.hpp"
#include "featadmm/data.hpp"
#include "featadmm/oracle.hpp"
#include "featadmm/topology.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace featadmm {

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    int max_rounds = 2000;
    double rho = 2.0;
    BcdConfig bcd;
    double stop_consensus_tol = 1e-10;
    double stop_estimate_tol = 1e-8;
    std::uint64_t seed = 1;
    bool record_per_agent = false;
    /// Sign applied to theta when recovering estimates; calibrated when empty.
    std::optional<int> orientation;
    /// Worker threads used inside each phase of a round.
    int threads = 1;
    /// When set, every mu message is appended here as a binary round record.
    std::ostream* message_log = nullptr;

    void validate() const;
};

struct RoundRecord {
    int round = 0;
    double misalignment = 0.0;        // NaN without ground truth
    double consensus_residual = 0.0;
    double mu_error = 0.0;            // NaN without an oracle mu
    double delta_k_mean = 0.0;
    double wall_seconds = 0.0;
};

struct RunHistory {
    std::vector<RoundRecord> rounds;
    /// Final x_i estimates, one per agent.
    std::vector<Vector> estimates;
    /// Per round, per agent estimates when record_per_agent is set.
    std::vector<std::vector<Vector>> per_agent;
    int orientation = -1;
    bool stopped_by_tolerance = false;
    bool numerical_failure = false;
    bool connected = true;

    Vector stacked_estimate() const;
};

/// Called after every completed round with all agent states.
using RoundObserver = std::function<void(int round, std::span<const AgentState> agents)>;

/// Synchronous rounds of the dual-consensus ADMM with the BCD primal step.
///
/// One regularizer per agent. Phases within a round are separated by
/// barriers; metric reductions run in agent-id order, so results do not
/// depend on `threads`. Disconnected graphs run with a warning on stderr.
RunHistory run(const FeaturePartition& fp, const Topology& topo, const FunctionSpec& f,
               const std::vector<FunctionSpec>& regs, const RunConfig& cfg,
               const std::optional<OracleSolution>& oracle = std::nullopt, const RoundObserver& observer = {});

/// sum over edges of ||mu_i - mu_j||^2; `mus` is indexed by agent id - 1.
double consensus_residual(std::span<const Vector> mus, const Topology& topo);

/// ||x - truth||^2 / ||truth||^2
double misalignment(const Vector& x, const Vector& truth);

/// Picks the sign s minimizing ||s theta - x_opt|| on a seeded two-agent
/// instance (M = 8, one feature each) run for 500 rounds.
int calibrate_orientation(const FunctionSpec& f, const FunctionSpec& r, std::uint64_t seed);

/// Header `round,misalignment,consensus_residual,mu_error,delta_k_mean`.
void write_history_csv(const std::vector<RoundRecord>& rounds, const std::filesystem::path& path);
/// Header `round,agent,estimate...`.
void write_per_agent_csv(const RunHistory& h, const std::filesystem::path& path);

} // namespace featadmm
