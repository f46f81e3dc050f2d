#ifndef CORAL_GRAPH_HPP
#define CORAL_GRAPH_HPP

#include <cstdint>
#include <utility>
#include <vector>

namespace coral {

// Undirected connected communication topology.
//
// Every undirected edge {i, j} contributes two directed pairs (i, j) and
// (j, i).  Directed pairs are kept in a fixed canonical order: agent-major,
// then neighbor-ascending, i.e. blocks (i, j) for i = 0..N-1 and j running
// over the sorted neighbors of i.  All stacked edge vectors downstream
// (z, m, m-hat) inherit this order, which makes the block permutation that
// swaps (i, j) with (j, i) reproducible.
class Graph {
public:
    // Cycle over N >= 3 agents, neighbors i +/- 1 (mod N).
    static Graph ring(int n_agents);

    // All-to-all topology over N >= 2 agents.
    static Graph complete(int n_agents);

    // Erdos-Renyi draw with edge probability p, resampled until connected
    // (deterministic given the seed).  Throws std::runtime_error if no
    // connected draw appears within the retry cap.
    static Graph random_connected(int n_agents, double edge_prob,
                                  std::uint64_t seed);

    // Builds from an explicit undirected edge list; validates symmetry,
    // no self-loops and connectivity.
    static Graph from_edges(int n_agents,
                            const std::vector<std::pair<int, int>>& edges);

    int num_agents() const { return n_agents_; }
    const std::vector<int>& neighbors(int i) const;
    int degree(int i) const;

    // Total degree sum over agents; equals the number of directed pairs and
    // twice the number of undirected edges.
    int total_degree() const { return static_cast<int>(pairs_.size()); }
    int num_undirected_edges() const { return total_degree() / 2; }

    // Canonical directed pair list and its lookup tables.
    const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
    int pair_index(int i, int j) const;  // throws if (i, j) is not a pair
    int reverse_index(int pair_idx) const { return reverse_[pair_idx]; }
    bool has_edge(int i, int j) const;

    // True iff the graph has at least one independent cycle
    // (undirected edge count >= N on a connected graph).
    bool has_cycle() const { return num_undirected_edges() >= n_agents_; }

private:
    Graph(int n_agents, std::vector<std::vector<int>> adjacency);

    int n_agents_;
    std::vector<std::vector<int>> adj_;            // sorted neighbor lists
    std::vector<std::pair<int, int>> pairs_;       // canonical directed pairs
    std::vector<std::vector<int>> pair_lookup_;    // [i] -> pair idx per neighbor slot
    std::vector<int> reverse_;                     // pair idx of (j, i)
};

// Connectivity test on a raw undirected edge list (BFS).  A single isolated
// node counts as connected; any unreached node does not.
bool is_connected(int n_agents, const std::vector<std::pair<int, int>>& edges);

}  // namespace coral

#endif  // CORAL_GRAPH_HPP
