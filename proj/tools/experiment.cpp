#include "experiment.hpp"

#include "featadmm/format.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace featadmm::cli {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last + 1 - first);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError(key + ": cannot parse `" + value + "` as a number");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    throw ConfigError(key + ": expected true or false, got `" + value + "`");
}

std::vector<long> parse_sizes(const std::string& key, const std::string& value) {
    std::vector<long> out;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_number<long>(key, trim(tok)));
    if (out.empty()) throw ConfigError(key + ": empty size list");
    return out;
}

std::string join_sizes(const std::vector<long>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string trial_name(int trial, const char* suffix) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "trial_%03d%s", trial, suffix);
    return buf;
}

FeaturePartition trial_data(const ExperimentConfig& cfg, int trial) {
    if (cfg.data_dir) return load_partition(*cfg.data_dir);
    return synthesize(cfg.agents, cfg.samples, cfg.sizes(), cfg.noise, data_seed(cfg, trial));
}

Topology trial_topology(const ExperimentConfig& cfg, int agents, int trial) {
    if (cfg.topology_file) return load_topology(*cfg.topology_file);
    return make_topology(cfg.topology, agents, cfg.degree, topology_seed(cfg, trial));
}

std::vector<FunctionSpec> trial_regs(const ExperimentConfig& cfg, int agents) {
    return std::vector<FunctionSpec>(static_cast<std::size_t>(agents), cfg.reg_spec());
}

} // namespace

std::vector<Eigen::Index> ExperimentConfig::sizes() const {
    if (block_sizes.size() == 1) {
        return std::vector<Eigen::Index>(static_cast<std::size_t>(agents), block_sizes.front());
    }
    if (static_cast<int>(block_sizes.size()) != agents) {
        throw ConfigError("block_sizes lists " + std::to_string(block_sizes.size()) + " sizes for " +
                          std::to_string(agents) + " agents");
    }
    return {block_sizes.begin(), block_sizes.end()};
}

FunctionSpec ExperimentConfig::loss_spec() const { return parse_function_spec(loss); }
FunctionSpec ExperimentConfig::reg_spec() const { return parse_function_spec(reg); }

RunConfig ExperimentConfig::run_config() const {
    RunConfig rc;
    rc.max_rounds = max_rounds;
    rc.rho = rho;
    rc.bcd.sweeps = bcd_sweeps;
    rc.bcd.theta_budget = theta_budget;
    rc.bcd.theta_tolerance = theta_tolerance;
    rc.bcd.step_rule =
        step_rule == "diminishing_subgradient" ? StepRule::diminishing_subgradient : StepRule::fixed_lipschitz;
    rc.bcd.subgradient_scale = subgradient_scale;
    rc.stop_consensus_tol = stop_consensus_tol;
    rc.stop_estimate_tol = stop_estimate_tol;
    rc.seed = seed;
    rc.record_per_agent = record_per_agent;
    rc.orientation = orientation;
    return rc;
}

void ExperimentConfig::validate() const {
    if (out.empty()) throw ConfigError("out: an output directory is required");
    if (trials < 1) throw ConfigError("trials must be at least 1");
    if (!data_dir) {
        if (agents < 1) throw ConfigError("agents must be at least 1");
        if (samples < 1) throw ConfigError("samples must be at least 1");
        for (long p : block_sizes)
            if (p < 1) throw ConfigError("block_sizes must be positive");
        (void)sizes();
        if (!(noise >= 0.0)) throw ConfigError("noise must be nonnegative");
    }
    if (step_rule != "fixed_lipschitz" && step_rule != "diminishing_subgradient") {
        throw ConfigError("step_rule must be fixed_lipschitz or diminishing_subgradient");
    }
    try {
        (void)loss_spec();
        (void)reg_spec();
        run_config().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void set_option(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "data_dir") {
        cfg.data_dir = value;
    } else if (key == "agents") {
        cfg.agents = parse_number<int>(key, value);
    } else if (key == "samples") {
        cfg.samples = parse_number<long>(key, value);
    } else if (key == "block_sizes") {
        cfg.block_sizes = parse_sizes(key, value);
    } else if (key == "noise") {
        cfg.noise = parse_number<double>(key, value);
    } else if (key == "topology") {
        cfg.topology = value;
    } else if (key == "degree") {
        cfg.degree = parse_number<double>(key, value);
    } else if (key == "topology_file") {
        cfg.topology_file = value;
    } else if (key == "loss") {
        cfg.loss = value;
    } else if (key == "reg") {
        cfg.reg = value;
    } else if (key == "max_rounds") {
        cfg.max_rounds = parse_number<int>(key, value);
    } else if (key == "rho") {
        cfg.rho = parse_number<double>(key, value);
    } else if (key == "bcd_sweeps") {
        cfg.bcd_sweeps = parse_number<int>(key, value);
    } else if (key == "theta_budget") {
        cfg.theta_budget = parse_number<int>(key, value);
    } else if (key == "theta_tolerance") {
        cfg.theta_tolerance = parse_number<double>(key, value);
    } else if (key == "step_rule") {
        cfg.step_rule = value;
    } else if (key == "subgradient_scale") {
        cfg.subgradient_scale = parse_number<double>(key, value);
    } else if (key == "stop_consensus_tol") {
        cfg.stop_consensus_tol = parse_number<double>(key, value);
    } else if (key == "stop_estimate_tol") {
        cfg.stop_estimate_tol = parse_number<double>(key, value);
    } else if (key == "record_per_agent") {
        cfg.record_per_agent = parse_bool(key, value);
    } else if (key == "orientation") {
        if (value == "auto") {
            cfg.orientation.reset();
        } else if (value == "1" || value == "+1") {
            cfg.orientation = 1;
        } else if (value == "-1") {
            cfg.orientation = -1;
        } else {
            throw ConfigError("orientation: expected auto, 1 or -1, got `" + value + "`");
        }
    } else if (key == "oracle") {
        cfg.oracle = parse_bool(key, value);
    } else if (key == "seed") {
        cfg.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "trials") {
        cfg.trials = parse_number<int>(key, value);
    } else if (key == "out") {
        cfg.out = value;
    } else {
        throw ConfigError("unknown key `" + key + "`");
    }
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(lineno) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + "missing key");
        try {
            set_option(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string render_manifest(const ExperimentConfig& cfg) {
    std::ostringstream o;
    auto kv = [&](const char* k, const std::string& v) { o << k << " = " << v << '\n'; };
    if (cfg.data_dir) kv("data_dir", cfg.data_dir->string());
    kv("agents", std::to_string(cfg.agents));
    kv("samples", std::to_string(cfg.samples));
    kv("block_sizes", join_sizes(cfg.block_sizes));
    kv("noise", format_double(cfg.noise));
    kv("topology", cfg.topology);
    kv("degree", format_double(cfg.degree));
    if (cfg.topology_file) kv("topology_file", cfg.topology_file->string());
    kv("loss", cfg.loss);
    kv("reg", cfg.reg);
    kv("max_rounds", std::to_string(cfg.max_rounds));
    kv("rho", format_double(cfg.rho));
    kv("bcd_sweeps", std::to_string(cfg.bcd_sweeps));
    kv("theta_budget", std::to_string(cfg.theta_budget));
    kv("theta_tolerance", format_double(cfg.theta_tolerance));
    kv("step_rule", cfg.step_rule);
    kv("subgradient_scale", format_double(cfg.subgradient_scale));
    kv("stop_consensus_tol", format_double(cfg.stop_consensus_tol));
    kv("stop_estimate_tol", format_double(cfg.stop_estimate_tol));
    kv("record_per_agent", cfg.record_per_agent ? "true" : "false");
    kv("orientation", cfg.orientation ? std::to_string(*cfg.orientation) : "auto");
    kv("oracle", cfg.oracle ? "true" : "false");
    kv("seed", std::to_string(cfg.seed));
    kv("trials", std::to_string(cfg.trials));
    kv("out", cfg.out.string());
    return o.str();
}

std::uint64_t data_seed(const ExperimentConfig& cfg, int trial) {
    return cfg.seed + static_cast<std::uint64_t>(trial);
}

std::uint64_t topology_seed(const ExperimentConfig& cfg, int trial) {
    return cfg.seed + 1000000u + static_cast<std::uint64_t>(trial);
}

bool RunReport::ok() const {
    return std::none_of(trials.begin(), trials.end(),
                        [](const TrialOutcome& t) { return t.history.numerical_failure; });
}

int trial_workers() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("FEATADMM_THREADS")) {
        int cap = 0;
        auto [ptr, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), cap);
        if (ec == std::errc() && cap >= 1) return cap;
    }
    return hw;
}

std::vector<RoundRecord> average_histories(const std::vector<const RunHistory*>& hs) {
    std::size_t len = 0;
    for (const auto* h : hs) len = std::max(len, h->rounds.size());
    std::vector<RoundRecord> out(len);
    for (std::size_t k = 0; k < len; ++k) {
        RoundRecord& avg = out[k];
        avg.round = static_cast<int>(k + 1);
        int count = 0;
        for (const auto* h : hs) {
            if (h->rounds.empty()) continue;
            const RoundRecord& r = h->rounds[std::min(k, h->rounds.size() - 1)];
            avg.misalignment += r.misalignment;
            avg.consensus_residual += r.consensus_residual;
            avg.mu_error += r.mu_error;
            avg.delta_k_mean += r.delta_k_mean;
            ++count;
        }
        if (count > 0) {
            avg.misalignment /= count;
            avg.consensus_residual /= count;
            avg.mu_error /= count;
            avg.delta_k_mean /= count;
        }
    }
    return out;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out);
    {
        std::ofstream m(cfg.out / "manifest.txt");
        if (!m) throw std::runtime_error("cannot write " + (cfg.out / "manifest.txt").string());
        m << render_manifest(cfg);
    }

    const FunctionSpec f = cfg.loss_spec();
    const FunctionSpec r = cfg.reg_spec();
    RunReport report;
    report.orientation = cfg.orientation ? *cfg.orientation : calibrate_orientation(f, r, cfg.seed);
    RunConfig rc = cfg.run_config();
    rc.orientation = report.orientation;

    report.trials.resize(static_cast<std::size_t>(cfg.trials));
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (int j = next++; j < cfg.trials; j = next++) {
            try {
                TrialOutcome& t = report.trials[static_cast<std::size_t>(j)];
                t.trial = j;
                const auto fp = trial_data(cfg, j);
                const auto topo = trial_topology(cfg, fp.num_agents(), j);
                const auto regs = trial_regs(cfg, fp.num_agents());
                if (cfg.oracle) t.oracle = solve_centralized(fp, f, regs);
                t.history = run(fp, topo, f, regs, rc, t.oracle);
                const Vector x = t.history.stacked_estimate();
                t.objective = centralized_objective(fp.concatenate(), fp.response, f, regs, fp.sizes(), x);
                t.oracle_misalignment = t.oracle && fp.truth ? misalignment(t.oracle->x_star, *fp.truth)
                                                             : std::numeric_limits<double>::quiet_NaN();
                write_history_csv(t.history.rounds, cfg.out / trial_name(j, ".csv"));
                if (cfg.record_per_agent) write_per_agent_csv(t.history, cfg.out / trial_name(j, "_agents.csv"));
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const int workers = std::min(trial_workers(), cfg.trials);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<const RunHistory*> hs;
    for (const auto& t : report.trials) hs.push_back(&t.history);
    write_history_csv(average_histories(hs), cfg.out / "averaged.csv");

    std::ofstream s(cfg.out / "summary.csv");
    if (!s) throw std::runtime_error("cannot write " + (cfg.out / "summary.csv").string());
    s << "trial,data_seed,topology_seed,rounds,stopped_by_tolerance,numerical_failure,orientation,"
         "final_misalignment,oracle_misalignment,objective,oracle_objective,oracle_method\n";
    for (const auto& t : report.trials) {
        const auto& h = t.history;
        const double final_mis = h.rounds.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                  : h.rounds.back().misalignment;
        s << t.trial << ',' << data_seed(cfg, t.trial) << ',' << topology_seed(cfg, t.trial) << ','
          << h.rounds.size() << ',' << h.stopped_by_tolerance << ',' << h.numerical_failure << ','
          << h.orientation << ',' << format_double(final_mis) << ',' << format_double(t.oracle_misalignment) << ','
          << format_double(t.objective) << ','
          << (t.oracle ? format_double(t.oracle->objective_value) : std::string("nan")) << ','
          << (t.oracle ? to_string(t.oracle->method) : std::string("none")) << '\n';
    }
    return report;
}

OracleSolution run_oracle(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto fp = trial_data(cfg, 0);
    const auto sol = solve_centralized(fp, cfg.loss_spec(), trial_regs(cfg, fp.num_agents()));
    save_oracle(sol, cfg.out);
    std::ofstream m(cfg.out / "manifest.txt");
    m << render_manifest(cfg);
    return sol;
}

void run_synth(const ExperimentConfig& cfg) {
    if (cfg.out.empty()) throw ConfigError("out: an output directory is required");
    save_partition(synthesize(cfg.agents, cfg.samples, cfg.sizes(), cfg.noise, data_seed(cfg, 0)), cfg.out);
}

std::vector<std::string> preset_names() {
    return {"elastic-net-pi", "elastic-net-m", "elastic-net-n", "elastic-net-topo", "ridge", "lasso"};
}

std::vector<PresetCurve> make_preset(const std::string& name) {
    ExperimentConfig base;
    base.rho = 2.0;
    base.bcd_sweeps = 2;
    base.topology = "random";
    base.degree = 3.0;
    base.agents = 10;
    base.block_sizes = {2};
    base.reg = "elastic_net:eta1=1,eta2=1";
    base.max_rounds = 2000;

    std::vector<PresetCurve> out;
    auto add = [&](std::string curve, auto&& edit) {
        ExperimentConfig c = base;
        edit(c);
        out.push_back({std::move(curve), std::move(c)});
    };
    if (name == "elastic-net-pi") {
        const std::pair<long, long> pm[] = {{2, 800}, {10, 1000}, {20, 1100}, {50, 1500}};
        for (auto [p, m] : pm) {
            add("pi" + std::to_string(p) + "_m" + std::to_string(m), [&](ExperimentConfig& c) {
                c.block_sizes = {p};
                c.samples = m;
            });
        }
    } else if (name == "elastic-net-m") {
        for (long m : {100L, 200L, 500L, 1000L}) {
            add("m" + std::to_string(m), [&](ExperimentConfig& c) { c.samples = m; });
        }
    } else if (name == "elastic-net-n") {
        for (int n : {5, 10, 20, 50}) {
            add("n" + std::to_string(n), [&](ExperimentConfig& c) {
                c.agents = n;
                c.samples = 500;
            });
        }
    } else if (name == "elastic-net-topo") {
        for (const char* t : {"line", "ring", "star", "complete"}) {
            add(t, [&](ExperimentConfig& c) {
                c.topology = t;
                c.samples = 500;
            });
        }
    } else if (name == "ridge" || name == "lasso") {
        const bool lasso = name == "lasso";
        struct Scenario {
            int n;
            long m;
            long p;
        };
        const Scenario sc[] = {{10, 50, 2}, {10, 200, 2}, {20, 200, 2}, {10, 200, 10}};
        for (auto s : sc) {
            add("n" + std::to_string(s.n) + "_m" + std::to_string(s.m) + "_pi" + std::to_string(s.p),
                [&](ExperimentConfig& c) {
                    c.agents = s.n;
                    c.samples = s.m;
                    c.block_sizes = {s.p};
                    c.reg = lasso ? "l1_reg:eta=0.001" : "l2_reg:eta=0.001";
                    c.max_rounds = lasso ? 5000 : 2000;
                });
        }
    } else {
        std::string known;
        for (const auto& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
        throw ConfigError("unknown preset `" + name + "` (known: " + known + ")");
    }
    return out;
}

} // namespace featadmm::cli
