#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace dcs {

/// Undirected connected graph with implicit self-loops: k is always a member
/// of its own neighborhood N_k.
struct NetworkTopology {
    int node_count = 0;
    std::vector<std::vector<int>> neighborhoods; // sorted, each includes self

    [[nodiscard]] bool adjacent(int l, int k) const;
    /// |N_k|, self included.
    [[nodiscard]] int degree(int k) const {
        return static_cast<int>(neighborhoods[static_cast<std::size_t>(k)].size());
    }
    [[nodiscard]] long edge_count() const; // undirected edges, self-loops excluded
};

/// Adaptation matrix S (alpha_{l,k}) and the two combination matrices
/// A1 (beta_{l,k}) and A2 (gamma_{l,k}) of the general diffusion form.
/// ATC runs use A1 = I; CTA runs use A2 = I.
struct WeightMatrices {
    Eigen::MatrixXd s;
    Eigen::MatrixXd a1;
    Eigen::MatrixXd a2;
};

struct WeightValidation {
    struct Check {
        std::string name;
        bool pass = true;
        double violation = 0.0;
    };
    std::vector<Check> checks;

    [[nodiscard]] bool all_pass() const;
    [[nodiscard]] double max_violation() const;
};

/// Recursively grown topology: complete seed graph on p_links+1 nodes, each
/// new node attaches to p_links distinct uniformly chosen existing nodes.
NetworkTopology grow_network(int p_count, int p_links, std::uint64_t seed);

NetworkTopology complete_graph(int p);

/// Build a topology from an undirected edge list (self-loops implicit).
NetworkTopology topology_from_edges(int p, const std::vector<std::pair<int, int>>& edges);

bool is_connected(const NetworkTopology& topology);

/// Metropolis weights: 1/max(|N_k|, |N_l|) off-diagonal within the
/// neighborhood, diagonal absorbs the remainder. Symmetric doubly stochastic.
Eigen::MatrixXd metropolis_weights(const NetworkTopology& topology);

/// Column-stochastic averaging weights: entry (l,k) = 1/|N_k| for l in N_k.
Eigen::MatrixXd averaging_weights(const NetworkTopology& topology);

WeightValidation validate_weights(const WeightMatrices& w, const NetworkTopology& topology);

enum class Variant; // diffusion.hpp

/// Standard matrices for a variant: Metropolis S (identity if the adaptation
/// exchange is disabled), averaging combination on the ATC or CTA side.
WeightMatrices make_weights(const NetworkTopology& topology, Variant variant,
                            bool use_adaptation_exchange);

/// One line per node: "k: n1 n2 ...", self omitted.
std::string adjacency_text(const NetworkTopology& topology);
NetworkTopology parse_adjacency_text(const std::string& text);

std::string matrix_csv(const Eigen::MatrixXd& m);

} // namespace dcs
