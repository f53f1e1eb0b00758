#include "featadmm/agent.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace featadmm {

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(buf, sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T))) throw std::runtime_error("mu record: truncated input");
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

} // namespace

void write_mu_record(std::ostream& out, const MuMessage& msg) {
    put_le<std::int64_t>(out, msg.round);
    put_le<std::int32_t>(out, static_cast<std::int32_t>(msg.sender));
    for (double x : msg.payload) put_le<double>(out, x);
}

MuMessage read_mu_record(std::istream& in, Eigen::Index samples) {
    MuMessage msg;
    msg.round = get_le<std::int64_t>(in);
    msg.sender = get_le<std::int32_t>(in);
    msg.payload.resize(samples);
    for (auto& x : msg.payload) x = get_le<double>(in);
    return msg;
}

AgentState::AgentState(AgentId id, const Topology& topo, Eigen::Index samples, Eigen::Index local_features,
                       double rho)
    : id_(id), rho_(rho), neighbor_ids_(topo.neighbors(id)) {
    if (!(rho > 0.0)) throw std::invalid_argument("agent: rho must be positive");
    if (neighbor_ids_.empty()) {
        throw TopologyError("agent " + std::to_string(id) + " has no neighbors; rho_bar is undefined");
    }
    rho_bar_ = rho_ * static_cast<double>(neighbor_ids_.size());
    mu_ = Vector::Zero(samples);
    v_ = Vector::Zero(samples);
    c_ = Vector::Zero(samples);
    bcd_ = BcdState::zeros(local_features, samples);
    for (AgentId j : neighbor_ids_) {
        neighbor_mu_[j] = Vector::Zero(samples);
        neighbor_round_[j] = 0;
    }
}

void AgentState::require_neighbors_at(std::int64_t round, const char* step) const {
    for (AgentId j : neighbor_ids_) {
        if (neighbor_round_.at(j) != round) {
            throw ProtocolError(std::string(step) + ": agent " + std::to_string(id_) + " holds round " +
                                std::to_string(neighbor_round_.at(j)) + " value from neighbor " + std::to_string(j) +
                                ", needs round " + std::to_string(round));
        }
    }
}

const Vector& AgentState::compute_c() {
    require_neighbors_at(round_, "compute_c");
    Vector sum = Vector::Zero(mu_.size());
    for (AgentId j : neighbor_ids_) sum += neighbor_mu_.at(j);
    c_ = v_ - rho_bar_ * mu_ - rho_ * sum;
    primal_done_ = false;
    return c_;
}

const Vector& AgentState::primal_step(const FunctionSpec& f, const FunctionSpec& r, const LocalBlock& block,
                                      const Vector& b, int num_agents, const BcdConfig& cfg) {
    if (block.samples() != mu_.size() || block.features() != bcd_.theta.size()) {
        throw std::invalid_argument("primal_step: block dimensions do not match agent " + std::to_string(id_));
    }
    // Warm start: beta at 2 rho_bar mu^(k-1), theta at its previous value.
    BcdState warm{bcd_.theta, 2.0 * rho_bar_ * mu_};
    auto res = bcd_solve(f, r, block, c_, b, num_agents, rho_bar_, warm, cfg);
    bcd_ = std::move(res.state);
    last_trace_ = std::move(res.delta_trace);
    last_theta_converged_ = res.theta_converged;
    mu_ = mu_from_beta(bcd_.beta, rho_bar_);
    ++round_;
    primal_done_ = true;
    return mu_;
}

const Vector& AgentState::dual_step() {
    if (!primal_done_) throw ProtocolError("dual_step: agent " + std::to_string(id_) + " has not run primal_step");
    require_neighbors_at(round_, "dual_step");
    Vector acc = Vector::Zero(mu_.size());
    for (AgentId j : neighbor_ids_) acc += mu_ - neighbor_mu_.at(j);
    v_ += rho_ * acc;
    primal_done_ = false;
    return v_;
}

void AgentState::receive(const MuMessage& msg) {
    auto it = neighbor_mu_.find(msg.sender);
    if (it == neighbor_mu_.end()) {
        throw ProtocolError("agent " + std::to_string(id_) + " received a message from non-neighbor " +
                            std::to_string(msg.sender));
    }
    if (msg.payload.size() != mu_.size()) throw ProtocolError("message payload has wrong length");
    it->second = msg.payload;
    neighbor_round_[msg.sender] = msg.round;
}

void AgentState::restore(const Vector& mu, const Vector& v, const BcdState& bcd) {
    if (mu.size() != mu_.size() || v.size() != v_.size() || bcd.theta.size() != bcd_.theta.size() ||
        bcd.beta.size() != bcd_.beta.size()) {
        throw std::invalid_argument("restore: dimensions do not match agent " + std::to_string(id_));
    }
    mu_ = mu;
    v_ = v;
    bcd_ = bcd;
}

Vector AgentState::recover_estimate(int orientation) const {
    if (orientation != 1 && orientation != -1) throw std::invalid_argument("orientation must be +1 or -1");
    return static_cast<double>(orientation) * bcd_.theta;
}

bool AgentState::operator==(const AgentState& o) const {
    return id_ == o.id_ && rho_ == o.rho_ && rho_bar_ == o.rho_bar_ && round_ == o.round_ && mu_ == o.mu_ &&
           v_ == o.v_ && c_ == o.c_ && bcd_.theta == o.bcd_.theta && bcd_.beta == o.bcd_.beta &&
           neighbor_mu_ == o.neighbor_mu_ && neighbor_round_ == o.neighbor_round_;
}

} // namespace featadmm
