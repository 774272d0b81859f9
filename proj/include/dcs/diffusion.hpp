#pragma once

#include "dcs/regularizer.hpp"
#include "dcs/rng.hpp"
#include "dcs/signal_model.hpp"

#include <Eigen/Core>
#include <span>
#include <vector>

namespace dcs {

struct WeightMatrices; // network.hpp

enum class Variant { Atc, Cta, MbAtc, MbCta, General };

enum class StopReason { Criterion, MaxIterations, Divergence };

const char* to_string(Variant v);
const char* to_string(StopReason r);

struct AlgorithmConfig {
    Variant variant = Variant::Atc;
    std::vector<double> step_sizes = {0.5}; // one entry broadcasts to all nodes
    RegularizerParams reg;
    int batch_size = 5;            // Q, mini-batch variants only
    long max_iterations = 100000;  // number of steps to execute
    bool use_adaptation_exchange = true; // false: weights built with S = I
    bool use_stop_criterion = true;
    std::uint64_t seed = 0; // mini-batch substreams

    [[nodiscard]] double mu_at(int k) const {
        return step_sizes.size() == 1 ? step_sizes[0] : step_sizes[static_cast<std::size_t>(k)];
    }
};

/// Effective stop-criterion window: explicit value, or ceil(0.2 N).
int resolved_window(const RegularizerParams& reg, int n);

struct DiffusionState {
    long iteration = 1;       // data index i of the next step
    Eigen::MatrixXd weights;  // N x P, column k = w_k(i)
    Eigen::MatrixXd phase_a;  // psi / phi buffer
    Eigen::MatrixXd phase_b;  // general variant second intermediate, MB previous weights
    bool diverged = false;
    std::vector<int> avg_sparsity_history;        // s(mean estimate) per iteration
    std::vector<std::vector<int>> batch_rows;     // per node, global rows of current batch
    std::vector<SplitRng> batch_rngs;             // per node draw streams
    std::vector<double> scratch_acc, scratch_z;   // length N

    [[nodiscard]] Eigen::VectorXd average_estimate() const;
};

DiffusionState make_state(const AlgorithmConfig& config, const ProblemInstance& problem,
                          int node_count);

/// (d - w^T u) u
Eigen::VectorXd instantaneous_gradient(std::span<const double> u, double d,
                                       const Eigen::VectorXd& w);

/// (1/Q) U^T (D - U w): mean of the per-row instantaneous gradients.
Eigen::VectorXd minibatch_gradient(const Eigen::MatrixXd& rows, const Eigen::VectorXd& obs,
                                   const Eigen::VectorXd& w);

struct MinibatchDraw {
    std::vector<int> local_indices; // positions within the node's row list
    Eigen::MatrixXd rows;           // Q x N
    Eigen::VectorXd obs;            // Q
};

/// Q local rows drawn uniformly with replacement from the node's block.
MinibatchDraw sample_minibatch(const ProblemInstance& problem, const Partition& partition,
                               int node, int q, SplitRng& rng);

/// One synchronous round. All reads use iteration-i values; all writes become
/// iteration-(i+1) values (two-phase barrier semantics). Nodes are processed
/// in index order; results are independent of that order.
void step_atc(DiffusionState& state, const AlgorithmConfig& config, const ProblemInstance& problem,
              const Partition& partition, const WeightMatrices& weights);
void step_cta(DiffusionState& state, const AlgorithmConfig& config, const ProblemInstance& problem,
              const Partition& partition, const WeightMatrices& weights);
void step_general(DiffusionState& state, const AlgorithmConfig& config,
                  const ProblemInstance& problem, const Partition& partition,
                  const WeightMatrices& weights);
void step_mb_atc(DiffusionState& state, const AlgorithmConfig& config,
                 const ProblemInstance& problem, const Partition& partition,
                 const WeightMatrices& weights);
void step_mb_cta(DiffusionState& state, const AlgorithmConfig& config,
                 const ProblemInstance& problem, const Partition& partition,
                 const WeightMatrices& weights);

void step(DiffusionState& state, const AlgorithmConfig& config, const ProblemInstance& problem,
          const Partition& partition, const WeightMatrices& weights);

struct RunResult {
    Eigen::VectorXd final_estimate; // (1/P) sum_k w_k
    long iterations_used = 0;       // steps executed
    StopReason stop_reason = StopReason::MaxIterations;
    std::vector<long> trace_iterations;
    std::vector<double> msd_trace; // squared deviation ||w_bar - x||^2, linear
    std::vector<int> sparsity_trace;
    double final_sq_deviation = 0.0;
    int final_sparsity = 0;
};

RunResult run(const AlgorithmConfig& config, const ProblemInstance& problem,
              const Partition& partition, const WeightMatrices& weights, long record_every = 100);

namespace detail {

double dot(const double* a, const double* b, int n);

/// Order-explicit variants backing the public steps; exposed so tests can
/// verify that permuting the node schedule leaves the state bit-identical.
void step_atc_ordered(DiffusionState& state, const AlgorithmConfig& config,
                      const ProblemInstance& problem, const Partition& partition,
                      const WeightMatrices& weights, std::span<const int> order);
void step_cta_ordered(DiffusionState& state, const AlgorithmConfig& config,
                      const ProblemInstance& problem, const Partition& partition,
                      const WeightMatrices& weights, std::span<const int> order);
void step_general_ordered(DiffusionState& state, const AlgorithmConfig& config,
                          const ProblemInstance& problem, const Partition& partition,
                          const WeightMatrices& weights, std::span<const int> order);
void step_mb_ordered(DiffusionState& state, const AlgorithmConfig& config,
                     const ProblemInstance& problem, const Partition& partition,
                     const WeightMatrices& weights, bool adapt_then_combine,
                     std::span<const int> order);

} // namespace detail

} // namespace dcs
