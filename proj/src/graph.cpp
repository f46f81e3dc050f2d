#include "coral/graph.hpp"

#include <algorithm>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "coral/rng.hpp"

namespace coral {

bool is_connected(int n_agents, const std::vector<std::pair<int, int>>& edges) {
    if (n_agents <= 0) return false;
    if (n_agents == 1) return true;
    std::vector<std::vector<int>> adj(n_agents);
    for (const auto& e : edges) {
        adj[e.first].push_back(e.second);
        adj[e.second].push_back(e.first);
    }
    std::vector<char> seen(n_agents, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int v : adj[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                q.push(v);
            }
        }
    }
    return reached == n_agents;
}

Graph::Graph(int n_agents, std::vector<std::vector<int>> adjacency)
    : n_agents_(n_agents), adj_(std::move(adjacency)) {
    if (n_agents_ <= 0) throw std::invalid_argument("graph: agent count must be positive");

    std::vector<std::pair<int, int>> undirected;
    for (int i = 0; i < n_agents_; ++i) {
        std::sort(adj_[i].begin(), adj_[i].end());
        if (std::adjacent_find(adj_[i].begin(), adj_[i].end()) != adj_[i].end())
            throw std::invalid_argument("graph: duplicate edge");
        for (int j : adj_[i]) {
            if (j < 0 || j >= n_agents_) throw std::invalid_argument("graph: neighbor out of range");
            if (j == i) throw std::invalid_argument("graph: self-loop");
            const auto& back = adj_[j];
            if (!std::binary_search(back.begin(), back.end(), i))
                throw std::invalid_argument("graph: adjacency is not symmetric");
            if (i < j) undirected.emplace_back(i, j);
        }
    }
    if (!is_connected(n_agents_, undirected))
        throw std::invalid_argument("graph: not connected");

    pair_lookup_.resize(n_agents_);
    for (int i = 0; i < n_agents_; ++i) {
        pair_lookup_[i].resize(adj_[i].size());
        for (std::size_t s = 0; s < adj_[i].size(); ++s) {
            pair_lookup_[i][s] = static_cast<int>(pairs_.size());
            pairs_.emplace_back(i, adj_[i][s]);
        }
    }
    reverse_.resize(pairs_.size());
    for (std::size_t k = 0; k < pairs_.size(); ++k)
        reverse_[k] = pair_index(pairs_[k].second, pairs_[k].first);
}

const std::vector<int>& Graph::neighbors(int i) const {
    if (i < 0 || i >= n_agents_) throw std::out_of_range("graph: agent index");
    return adj_[i];
}

int Graph::degree(int i) const { return static_cast<int>(neighbors(i).size()); }

int Graph::pair_index(int i, int j) const {
    const auto& nb = neighbors(i);
    auto it = std::lower_bound(nb.begin(), nb.end(), j);
    if (it == nb.end() || *it != j)
        throw std::invalid_argument("graph: (" + std::to_string(i) + "," + std::to_string(j) +
                                    ") is not an edge");
    return pair_lookup_[i][static_cast<std::size_t>(it - nb.begin())];
}

bool Graph::has_edge(int i, int j) const {
    if (i < 0 || i >= n_agents_ || j < 0 || j >= n_agents_ || i == j) return false;
    const auto& nb = adj_[i];
    return std::binary_search(nb.begin(), nb.end(), j);
}

Graph Graph::ring(int n_agents) {
    if (n_agents < 3) throw std::invalid_argument("ring: need at least 3 agents");
    std::vector<std::vector<int>> adj(n_agents);
    for (int i = 0; i < n_agents; ++i) {
        adj[i].push_back((i + 1) % n_agents);
        adj[i].push_back((i + n_agents - 1) % n_agents);
        std::sort(adj[i].begin(), adj[i].end());
    }
    return Graph(n_agents, std::move(adj));
}

Graph Graph::complete(int n_agents) {
    if (n_agents < 2) throw std::invalid_argument("complete: need at least 2 agents");
    std::vector<std::vector<int>> adj(n_agents);
    for (int i = 0; i < n_agents; ++i)
        for (int j = 0; j < n_agents; ++j)
            if (j != i) adj[i].push_back(j);
    return Graph(n_agents, std::move(adj));
}

Graph Graph::from_edges(int n_agents, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::set<int>> nb(n_agents);
    for (const auto& e : edges) {
        if (e.first < 0 || e.first >= n_agents || e.second < 0 || e.second >= n_agents)
            throw std::invalid_argument("graph: edge endpoint out of range");
        nb[e.first].insert(e.second);
        nb[e.second].insert(e.first);
    }
    std::vector<std::vector<int>> adj(n_agents);
    for (int i = 0; i < n_agents; ++i) adj[i].assign(nb[i].begin(), nb[i].end());
    return Graph(n_agents, std::move(adj));
}

Graph Graph::random_connected(int n_agents, double edge_prob, std::uint64_t seed) {
    if (n_agents < 2) throw std::invalid_argument("random_connected: need at least 2 agents");
    if (!(edge_prob > 0.0) || edge_prob > 1.0)
        throw std::invalid_argument("random_connected: edge probability must be in (0, 1]");

    std::mt19937_64 gen(splitmix64(seed));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const int kMaxRetries = 10000;
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        std::vector<std::pair<int, int>> edges;
        for (int i = 0; i < n_agents; ++i)
            for (int j = i + 1; j < n_agents; ++j)
                if (coin(gen) < edge_prob) edges.emplace_back(i, j);
        if (is_connected(n_agents, edges)) return from_edges(n_agents, edges);
    }
    throw std::runtime_error("random_connected: retry cap exceeded without a connected draw");
}

}  // namespace coral
