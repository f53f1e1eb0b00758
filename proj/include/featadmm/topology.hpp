#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace featadmm {

/// Agent identifiers run from 1 to N.
using AgentId = int;

class TopologyError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Undirected communication graph over agents 1..N.
///
/// Immutable once built. Edges are stored as (i, j) with i < j, sorted; the
/// adjacency lists are sorted ascending so every traversal is deterministic.
class Topology {
public:
    using Edge = std::pair<AgentId, AgentId>;

    /// Builds a graph from an edge list. Rejects self-loops, duplicate edges,
    /// out-of-range ids and isolated agents.
    Topology(int num_agents, std::vector<Edge> edges);

    int num_agents() const noexcept { return num_agents_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    const std::vector<AgentId>& neighbors(AgentId i) const;
    int degree(AgentId i) const { return static_cast<int>(neighbors(i).size()); }
    double mean_degree() const noexcept;

    bool operator==(const Topology&) const = default;

private:
    int num_agents_;
    std::vector<Edge> edges_;
    std::vector<std::vector<AgentId>> adjacency_;
};

/// Graph search connectivity check.
bool is_connected(const Topology& t);

/// Number of connected components.
int component_count(const Topology& t);

Topology make_line(int n);
Topology make_ring(int n);
/// Agent 1 is the hub.
Topology make_star(int n);
Topology make_complete(int n);

/// Connected graph whose mean degree lies within 0.5 of `avg_degree`.
///
/// Samples round(N*avg_degree/2) distinct edges uniformly, joins any separate
/// components with extra edges, then drops random non-bridge edges until the
/// edge count is back on target. Same seed, same graph.
Topology make_random_connected(int n, double avg_degree, std::uint64_t seed);

/// Edge-list text format: first line `N`, then one `i j` pair per line.
void save_topology(const Topology& t, const std::filesystem::path& path);
Topology load_topology(const std::filesystem::path& path);

/// Builds a topology from a selector name: line, ring, star, complete, random.
Topology make_topology(const std::string& kind, int n, double avg_degree, std::uint64_t seed);

} // namespace featadmm
