#include "featadmm/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace featadmm {

namespace {

void require_size(int n, int min_n, const char* what) {
    if (n < min_n) {
        throw TopologyError(std::string(what) + ": need at least " + std::to_string(min_n) +
                            " agents, got " + std::to_string(n));
    }
}

// Component label per agent (index 0..N-1), labels assigned in id order.
std::vector<int> component_labels(int n, const std::vector<Topology::Edge>& edges) {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (auto [i, j] : edges) {
        adj[i - 1].push_back(j - 1);
        adj[j - 1].push_back(i - 1);
    }
    std::vector<int> label(static_cast<std::size_t>(n), -1);
    int next = 0;
    std::vector<int> stack;
    for (int s = 0; s < n; ++s) {
        if (label[s] >= 0) continue;
        label[s] = next;
        stack.push_back(s);
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int w : adj[u]) {
                if (label[w] < 0) {
                    label[w] = next;
                    stack.push_back(w);
                }
            }
        }
        ++next;
    }
    return label;
}

int count_components(int n, const std::vector<Topology::Edge>& edges) {
    auto label = component_labels(n, edges);
    return label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
}

} // namespace

Topology::Topology(int num_agents, std::vector<Edge> edges)
    : num_agents_(num_agents), adjacency_(static_cast<std::size_t>(std::max(num_agents, 0))) {
    if (num_agents < 1) throw TopologyError("topology: number of agents must be positive");
    for (auto& e : edges) {
        if (e.first == e.second) throw TopologyError("topology: self-loop at agent " + std::to_string(e.first));
        if (e.first > e.second) std::swap(e.first, e.second);
        if (e.first < 1 || e.second > num_agents) {
            throw TopologyError("topology: edge (" + std::to_string(e.first) + "," +
                                std::to_string(e.second) + ") out of range");
        }
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
        throw TopologyError("topology: duplicate edge");
    }
    edges_ = std::move(edges);
    for (auto [i, j] : edges_) {
        adjacency_[i - 1].push_back(j);
        adjacency_[j - 1].push_back(i);
    }
    for (int i = 0; i < num_agents_; ++i) {
        auto& a = adjacency_[i];
        std::sort(a.begin(), a.end());
        if (a.empty() && num_agents_ > 1) {
            throw TopologyError("topology: agent " + std::to_string(i + 1) + " has no neighbors");
        }
    }
}

const std::vector<AgentId>& Topology::neighbors(AgentId i) const {
    if (i < 1 || i > num_agents_) throw TopologyError("topology: unknown agent id " + std::to_string(i));
    return adjacency_[i - 1];
}

double Topology::mean_degree() const noexcept {
    return 2.0 * static_cast<double>(edges_.size()) / static_cast<double>(num_agents_);
}

bool is_connected(const Topology& t) { return component_count(t) == 1; }

int component_count(const Topology& t) { return count_components(t.num_agents(), t.edges()); }

Topology make_line(int n) {
    require_size(n, 2, "line");
    std::vector<Topology::Edge> edges;
    for (int i = 1; i < n; ++i) edges.emplace_back(i, i + 1);
    return Topology(n, std::move(edges));
}

Topology make_ring(int n) {
    require_size(n, 3, "ring");
    std::vector<Topology::Edge> edges;
    for (int i = 1; i < n; ++i) edges.emplace_back(i, i + 1);
    edges.emplace_back(1, n);
    return Topology(n, std::move(edges));
}

Topology make_star(int n) {
    require_size(n, 2, "star");
    std::vector<Topology::Edge> edges;
    for (int i = 2; i <= n; ++i) edges.emplace_back(1, i);
    return Topology(n, std::move(edges));
}

Topology make_complete(int n) {
    require_size(n, 2, "complete");
    std::vector<Topology::Edge> edges;
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j) edges.emplace_back(i, j);
    return Topology(n, std::move(edges));
}

Topology make_random_connected(int n, double avg_degree, std::uint64_t seed) {
    require_size(n, 2, "random");
    if (!(avg_degree >= 1.0) || avg_degree > n - 1) {
        throw TopologyError("random: average degree must lie in [1, N-1]");
    }
    const auto max_edges = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
    auto target = static_cast<std::size_t>(std::llround(n * avg_degree / 2.0));
    target = std::clamp<std::size_t>(target, static_cast<std::size_t>(n - 1), max_edges);
    if (std::abs(2.0 * static_cast<double>(target) / n - avg_degree) > 0.5) {
        throw TopologyError("random: no connected graph on " + std::to_string(n) +
                            " agents has mean degree near " + std::to_string(avg_degree));
    }

    std::mt19937_64 rng(seed);
    std::vector<Topology::Edge> all;
    all.reserve(max_edges);
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j) all.emplace_back(i, j);

    constexpr int kMaxAttempts = 100;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<Topology::Edge> edges(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(target));
        std::set<Topology::Edge> present(edges.begin(), edges.end());

        // Join components: pick a random agent in component 0 and one outside it.
        for (;;) {
            auto label = component_labels(n, edges);
            std::vector<int> inside, outside;
            for (int v = 0; v < n; ++v) (label[v] == 0 ? inside : outside).push_back(v + 1);
            if (outside.empty()) break;
            std::uniform_int_distribution<std::size_t> pick_in(0, inside.size() - 1);
            std::uniform_int_distribution<std::size_t> pick_out(0, outside.size() - 1);
            Topology::Edge e{inside[pick_in(rng)], outside[pick_out(rng)]};
            if (e.first > e.second) std::swap(e.first, e.second);
            edges.push_back(e);
            present.insert(e);
        }

        // Drop non-bridge edges until the count is back to target.
        bool stuck = false;
        while (edges.size() > target) {
            std::vector<std::size_t> order(edges.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            bool removed = false;
            for (std::size_t idx : order) {
                auto trial = edges;
                trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(idx));
                if (count_components(n, trial) == 1) {
                    edges = std::move(trial);
                    removed = true;
                    break;
                }
            }
            if (!removed) {
                stuck = true;
                break;
            }
        }
        if (!stuck) return Topology(n, std::move(edges));
    }
    throw TopologyError("random: failed to build a connected graph after 100 attempts");
}

void save_topology(const Topology& t, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << t.num_agents() << '\n';
    for (auto [i, j] : t.edges()) out << i << ' ' << j << '\n';
}

Topology load_topology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    int n = 0;
    if (!std::getline(in, line) || !(std::istringstream(line) >> n)) {
        throw TopologyError(path.string() + ": missing agent count on line 1");
    }
    std::vector<Topology::Edge> edges;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        int i = 0, j = 0;
        std::string rest;
        if (!(ls >> i >> j) || (ls >> rest)) {
            throw TopologyError(path.string() + ":" + std::to_string(lineno) + ": expected `i j`");
        }
        edges.emplace_back(i, j);
    }
    return Topology(n, std::move(edges));
}

Topology make_topology(const std::string& kind, int n, double avg_degree, std::uint64_t seed) {
    if (kind == "line") return make_line(n);
    if (kind == "ring") return make_ring(n);
    if (kind == "star") return make_star(n);
    if (kind == "complete" || kind == "fully-connected") return make_complete(n);
    if (kind == "random") return make_random_connected(n, avg_degree, seed);
    throw TopologyError("unknown topology `" + kind + "`");
}

} // namespace featadmm
