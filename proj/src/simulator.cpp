#include "featadmm/simulator.hpp"

#include "featadmm/format.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iostream>
#include <limits>
#include <thread>

namespace featadmm {

void RunConfig::validate() const {
    if (max_rounds < 1) throw std::invalid_argument("run: max_rounds must be at least 1");
    if (!(rho > 0.0)) throw std::invalid_argument("run: rho must be positive");
    if (!(stop_consensus_tol > 0.0) || !(stop_estimate_tol > 0.0)) {
        throw std::invalid_argument("run: stopping tolerances must be positive");
    }
    if (orientation && *orientation != 1 && *orientation != -1) {
        throw std::invalid_argument("run: orientation must be +1 or -1");
    }
    if (threads < 1) throw std::invalid_argument("run: threads must be at least 1");
    bcd.validate();
}

Vector RunHistory::stacked_estimate() const {
    Eigen::Index p = 0;
    for (const auto& x : estimates) p += x.size();
    Vector out(p);
    Eigen::Index off = 0;
    for (const auto& x : estimates) {
        out.segment(off, x.size()) = x;
        off += x.size();
    }
    return out;
}

double consensus_residual(std::span<const Vector> mus, const Topology& topo) {
    if (static_cast<int>(mus.size()) != topo.num_agents()) {
        throw std::invalid_argument("consensus_residual: one mu per agent required");
    }
    double acc = 0.0;
    for (auto [i, j] : topo.edges()) acc += (mus[i - 1] - mus[j - 1]).squaredNorm();
    return acc;
}

double misalignment(const Vector& x, const Vector& truth) {
    if (x.size() != truth.size()) throw std::invalid_argument("misalignment: length mismatch");
    const double denom = truth.squaredNorm();
    if (denom == 0.0) throw std::domain_error("misalignment: ground truth is zero");
    return (x - truth).squaredNorm() / denom;
}

namespace {

template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = std::min(threads, count);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int i = w; i < count; i += workers) fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

bool all_finite(const Vector& v) { return v.allFinite(); }

} // namespace

RunHistory run(const FeaturePartition& fp, const Topology& topo, const FunctionSpec& f,
               const std::vector<FunctionSpec>& regs, const RunConfig& cfg,
               const std::optional<OracleSolution>& oracle, const RoundObserver& observer) {
    cfg.validate();
    fp.validate();
    const int n = fp.num_agents();
    if (topo.num_agents() != n) {
        throw std::invalid_argument("run: topology has " + std::to_string(topo.num_agents()) + " agents, data has " +
                                    std::to_string(n) + " blocks");
    }
    if (static_cast<int>(regs.size()) != n) throw std::invalid_argument("run: one regularizer per agent required");
    if (oracle && oracle->x_star.size() != fp.num_features()) {
        throw std::invalid_argument("run: oracle solution has the wrong length");
    }

    RunHistory hist;
    hist.connected = n == 1 || is_connected(topo);
    if (!hist.connected) {
        std::cerr << "warning: communication graph is disconnected; agents will not reach a common optimum\n";
    }

    std::vector<LocalBlock> blocks;
    std::vector<AgentState> agents;
    blocks.reserve(static_cast<std::size_t>(n));
    agents.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& a = fp.blocks[static_cast<std::size_t>(i)];
        agents.emplace_back(i + 1, topo, fp.num_samples(), a.cols(), cfg.rho);
        blocks.emplace_back(a);
    }

    hist.orientation = cfg.orientation ? *cfg.orientation : calibrate_orientation(f, regs.front(), cfg.seed);
    const double sign = hist.orientation;

    const Vector& b = fp.response;
    const Vector* mu_star = oracle && oracle->mu_star ? &*oracle->mu_star : nullptr;
    const double mu_star_norm = mu_star ? mu_star->norm() : 0.0;
    std::deque<Vector> recent;  // stacked estimates of the last 11 rounds
    std::vector<Vector> mus(static_cast<std::size_t>(n));

    for (int k = 1; k <= cfg.max_rounds; ++k) {
        const auto start = std::chrono::steady_clock::now();

        parallel_for(n, cfg.threads, [&](int i) {
            auto& ag = agents[static_cast<std::size_t>(i)];
            ag.compute_c();
            ag.primal_step(f, regs[static_cast<std::size_t>(i)], blocks[static_cast<std::size_t>(i)], b, n, cfg.bcd);
        });

        for (const auto& ag : agents) {
            const MuMessage msg = ag.outgoing();
            if (cfg.message_log) write_mu_record(*cfg.message_log, msg);
            for (AgentId j : topo.neighbors(ag.id())) agents[static_cast<std::size_t>(j - 1)].receive(msg);
        }

        parallel_for(n, cfg.threads, [&](int i) { agents[static_cast<std::size_t>(i)].dual_step(); });

        RoundRecord rec;
        rec.round = k;
        hist.estimates.clear();
        bool finite = true;
        double delta_sum = 0.0;
        double mu_err_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto& ag = agents[static_cast<std::size_t>(i)];
            hist.estimates.push_back(sign * ag.bcd().theta);
            mus[static_cast<std::size_t>(i)] = ag.mu();
            finite = finite && all_finite(ag.mu()) && all_finite(ag.v()) && all_finite(ag.bcd().theta);
            delta_sum += ag.last_delta_trace().back();
            if (mu_star) {
                mu_err_sum += mu_star_norm > 0.0 ? (ag.mu() - *mu_star).norm() / mu_star_norm
                                                 : (ag.mu() - *mu_star).norm();
            }
        }
        const Vector stacked = hist.stacked_estimate();
        rec.misalignment = fp.truth ? misalignment(stacked, *fp.truth) : std::numeric_limits<double>::quiet_NaN();
        rec.consensus_residual = consensus_residual(mus, topo);
        rec.mu_error = mu_star ? mu_err_sum / n : std::numeric_limits<double>::quiet_NaN();
        rec.delta_k_mean = delta_sum / n;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        hist.rounds.push_back(rec);
        if (cfg.record_per_agent) hist.per_agent.push_back(hist.estimates);

        if (observer) observer(k, std::span<const AgentState>(agents));

        if (!finite || !std::isfinite(rec.consensus_residual)) {
            hist.numerical_failure = true;
            break;
        }

        recent.push_back(stacked);
        if (recent.size() > 11) recent.pop_front();
        if (recent.size() == 11 &&
            rec.consensus_residual <= cfg.stop_consensus_tol * n * static_cast<double>(fp.num_samples())) {
            const double change = (stacked - recent.front()).norm() / std::max(stacked.norm(), 1e-300);
            if (change <= cfg.stop_estimate_tol) {
                hist.stopped_by_tolerance = true;
                break;
            }
        }
    }
    return hist;
}

int calibrate_orientation(const FunctionSpec& f, const FunctionSpec& r, std::uint64_t seed) {
    const auto fp = synthesize(2, 8, {1, 1}, 0.1, seed);
    const std::vector<FunctionSpec> regs{r, r};
    const auto oracle = solve_centralized(fp, f, regs);

    RunConfig cfg;
    cfg.max_rounds = 500;
    cfg.orientation = 1;
    cfg.seed = seed;
    const auto hist = run(fp, make_line(2), f, regs, cfg);
    const Vector theta = hist.stacked_estimate();

    const double err_plus = (theta - oracle.x_star).norm();
    const double err_minus = (-theta - oracle.x_star).norm();
    const double best = std::min(err_plus, err_minus);
    if (hist.numerical_failure || !(best < 0.5 * oracle.x_star.norm()) || err_plus == err_minus) {
        throw CalibrationError("orientation calibration inconclusive: errors " + format_double(err_plus) + " (+1) and " +
                               format_double(err_minus) + " (-1) against |x*| = " +
                               format_double(oracle.x_star.norm()));
    }
    return err_plus < err_minus ? 1 : -1;
}

void write_history_csv(const std::vector<RoundRecord>& rounds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "round,misalignment,consensus_residual,mu_error,delta_k_mean\n";
    for (const auto& r : rounds) {
        out << r.round << ',' << format_double(r.misalignment) << ',' << format_double(r.consensus_residual) << ','
            << format_double(r.mu_error) << ',' << format_double(r.delta_k_mean) << '\n';
    }
}

void write_per_agent_csv(const RunHistory& h, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "round,agent,estimate...\n";
    for (std::size_t k = 0; k < h.per_agent.size(); ++k) {
        for (std::size_t i = 0; i < h.per_agent[k].size(); ++i) {
            out << h.rounds[k].round << ',' << (i + 1);
            for (double x : h.per_agent[k][i]) out << ',' << format_double(x);
            out << '\n';
        }
    }
}

} // namespace featadmm
