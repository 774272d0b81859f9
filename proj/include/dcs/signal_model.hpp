#pragma once

#include "dcs/rng.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dcs {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// K-sparse ground-truth vector, unit Euclidean norm. Nonzero values are
/// stored normalized; the pre-normalization magnitudes (all in [0.2, 1]) can
/// be recovered as values * raw_norm.
struct SparseSignal {
    int dim = 0;
    std::vector<int> support;   // sorted, distinct, in [0, dim)
    Eigen::VectorXd values;     // aligned with support, post-normalization
    double raw_norm = 1.0;      // Euclidean norm of the raw draw

    [[nodiscard]] Eigen::VectorXd dense() const;
    [[nodiscard]] int sparsity_k() const { return static_cast<int>(support.size()); }
};

/// One compressive-sensing problem: y = theta * x + v with the realized
/// noise vector kept alongside. Immutable after construction.
struct ProblemInstance {
    SparseSignal signal;
    RowMajorMatrix theta;        // M x N, rows contiguous
    Eigen::VectorXd observations; // y, length M
    Eigen::VectorXd noise;        // v as realized, length M
    double noise_sigma = 0.0;
    std::uint64_t rng_seed = 0;

    [[nodiscard]] int n() const { return static_cast<int>(theta.cols()); }
    [[nodiscard]] int m() const { return static_cast<int>(theta.rows()); }
};

/// Row-to-node assignment. Lists are disjoint and cover [0, M).
struct Partition {
    std::vector<std::vector<int>> node_rows;
    std::vector<int> counts; // L_k

    [[nodiscard]] int node_count() const { return static_cast<int>(counts.size()); }
};

/// The (regressor, observation) pair a node uses at a given iteration.
struct NodeSample {
    std::span<const double> u;
    double d = 0.0;
    int global_row = 0;
};

SparseSignal generate_sparse_signal(int n, int k, std::uint64_t seed);

ProblemInstance generate_measurements(const SparseSignal& x, int m, double sigma,
                                      std::uint64_t seed);

/// Balanced contiguous split of m rows over p nodes; the first (m mod p)
/// nodes receive one extra row.
std::vector<int> partition_counts(int m, int p);
Partition partition_uniform(const ProblemInstance& instance, int p);

/// Cyclic data recycling: local 1-based row index mod(i, L_k) + 1.
NodeSample data_at(const ProblemInstance& instance, const Partition& partition, int node,
                   long iteration);

/// Binary dump/load: "DCS1" magic, u64 N/M/K, f64 sigma, u64 seed, then
/// theta row-major, x dense, y — all little-endian 64-bit.
void dump_instance(const ProblemInstance& instance, const std::string& path);
ProblemInstance load_instance(const std::string& path);

} // namespace dcs
