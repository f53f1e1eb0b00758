#pragma once

#include "featadmm/inner.hpp"
#include "featadmm/topology.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <vector>

namespace featadmm {

/// Raised when an agent is asked to act on neighbor values from the wrong
/// round.
class ProtocolError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// mu_sender at round k, as shared with neighbors.
struct MuMessage {
    AgentId sender = 0;
    std::int64_t round = 0;
    Vector payload;
};

/// Binary round record: round (int64), sender (int32), M doubles, all
/// little-endian.
void write_mu_record(std::ostream& out, const MuMessage& msg);
MuMessage read_mu_record(std::istream& in, Eigen::Index samples);

/// One agent's protocol variables for the outer ADMM loop.
///
/// Round k runs compute_c (needs every neighbor's mu from round k-1), then
/// primal_step (produces mu^(k)), then, after the neighbors' round-k values
/// arrive via receive(), dual_step.
class AgentState {
public:
    AgentState(AgentId id, const Topology& topo, Eigen::Index samples, Eigen::Index local_features, double rho);

    AgentId id() const noexcept { return id_; }
    int degree() const noexcept { return static_cast<int>(neighbor_ids_.size()); }
    double rho() const noexcept { return rho_; }
    double rho_bar() const noexcept { return rho_bar_; }
    std::int64_t round() const noexcept { return round_; }

    const Vector& mu() const noexcept { return mu_; }
    const Vector& v() const noexcept { return v_; }
    const Vector& c() const noexcept { return c_; }
    const BcdState& bcd() const noexcept { return bcd_; }
    const std::vector<double>& last_delta_trace() const noexcept { return last_trace_; }
    bool last_theta_converged() const noexcept { return last_theta_converged_; }
    const std::map<AgentId, Vector>& neighbor_mu() const noexcept { return neighbor_mu_; }

    /// c = v - rho |V_i| mu_i - rho sum_j mu_j, all from round k-1.
    const Vector& compute_c();

    /// Runs the warm-started BCD loop and sets mu^(k) = beta^(k,T) / (2 rho_bar).
    const Vector& primal_step(const FunctionSpec& f, const FunctionSpec& r, const LocalBlock& block, const Vector& b,
                              int num_agents, const BcdConfig& cfg);

    /// v += rho sum_j (mu_i - mu_j), all from round k.
    const Vector& dual_step();

    MuMessage outgoing() const { return {id_, round_, mu_}; }
    void receive(const MuMessage& msg);

    /// Overwrites mu, v and the BCD state in place, as when restoring a
    /// checkpoint. Dimensions must match.
    void restore(const Vector& mu, const Vector& v, const BcdState& bcd);

    /// orientation * theta^(k,T); orientation is +1 or -1.
    Vector recover_estimate(int orientation) const;

    bool operator==(const AgentState&) const;

private:
    void require_neighbors_at(std::int64_t round, const char* step) const;

    AgentId id_;
    double rho_;
    double rho_bar_;
    std::vector<AgentId> neighbor_ids_;
    std::int64_t round_ = 0;
    Vector mu_;
    Vector v_;
    Vector c_;
    BcdState bcd_;
    std::map<AgentId, Vector> neighbor_mu_;
    std::map<AgentId, std::int64_t> neighbor_round_;
    std::vector<double> last_trace_;
    bool last_theta_converged_ = true;
    bool primal_done_ = false;
};

/// mu = beta / (2 rho_bar)
inline Vector mu_from_beta(const Vector& beta, double rho_bar) { return beta / (2.0 * rho_bar); }

} // namespace featadmm
