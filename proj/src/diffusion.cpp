#include "dcs/diffusion.hpp"

#include "dcs/network.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dcs {

namespace {

constexpr double kDivergenceNormSq = 1e24; // ||w_k|| > 1e12

std::vector<int> identity_order(int p) {
    std::vector<int> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    return order;
}

void axpy(double alpha, const double* x, double* y, int n) {
    for (int j = 0; j < n; ++j) y[j] += alpha * x[j];
}

/// out = point + mu * (sum_l alpha_{l,k} g_l(point) + xi * z_delta(point)),
/// with g_l evaluated on node-l data of the current iteration.
void adapt_node(double* out, const double* point, int k, DiffusionState& state,
                const AlgorithmConfig& config, const ProblemInstance& problem,
                const Partition& partition, const Eigen::MatrixXd& s_matrix) {
    const int n = problem.n();
    const int p = partition.node_count();
    double* acc = state.scratch_acc.data();
    std::fill(acc, acc + n, 0.0);
    for (int l = 0; l < p; ++l) {
        const double a = s_matrix(l, k);
        if (a == 0.0) continue;
        const NodeSample sample = data_at(problem, partition, l, state.iteration);
        const double r = sample.d - detail::dot(point, sample.u.data(), n);
        axpy(a * r, sample.u.data(), acc, n);
    }
    const double mu = config.mu_at(k);
    const double xi = config.reg.xi;
    if (xi != 0.0) {
        double* z = state.scratch_z.data();
        zero_attraction(std::span<const double>(point, static_cast<std::size_t>(n)),
                        config.reg.delta, std::span<double>(z, static_cast<std::size_t>(n)));
        for (int j = 0; j < n; ++j) out[j] = point[j] + mu * (acc[j] + xi * z[j]);
    } else {
        for (int j = 0; j < n; ++j) out[j] = point[j] + mu * acc[j];
    }
}

/// Mini-batch flavour of adapt_node: sum_l alpha_{l,k} G_l(point), where
/// G_l averages node-l's current batch evaluated at `point`.
void adapt_node_minibatch(double* out, const double* point, int k, DiffusionState& state,
                          const AlgorithmConfig& config, const ProblemInstance& problem,
                          const Partition& partition, const Eigen::MatrixXd& s_matrix) {
    const int n = problem.n();
    const int p = partition.node_count();
    const double q_inv = 1.0 / static_cast<double>(config.batch_size);
    double* acc = state.scratch_acc.data();
    std::fill(acc, acc + n, 0.0);
    for (int l = 0; l < p; ++l) {
        const double a = s_matrix(l, k);
        if (a == 0.0) continue;
        const double aq = a * q_inv;
        for (int row : state.batch_rows[static_cast<std::size_t>(l)]) {
            const double* u = problem.theta.data() + static_cast<std::ptrdiff_t>(row) * n;
            const double r = problem.observations[row] - detail::dot(point, u, n);
            axpy(aq * r, u, acc, n);
        }
    }
    const double mu = config.mu_at(k);
    const double xi = config.reg.xi;
    if (xi != 0.0) {
        double* z = state.scratch_z.data();
        zero_attraction(std::span<const double>(point, static_cast<std::size_t>(n)),
                        config.reg.delta, std::span<double>(z, static_cast<std::size_t>(n)));
        for (int j = 0; j < n; ++j) out[j] = point[j] + mu * (acc[j] + xi * z[j]);
    } else {
        for (int j = 0; j < n; ++j) out[j] = point[j] + mu * acc[j];
    }
}

/// dst column k = sum_l combo(l,k) * src column l, accumulated in ascending l.
void combine_node(Eigen::MatrixXd& dst, int k, const Eigen::MatrixXd& src,
                  const Eigen::MatrixXd& combo, int n) {
    double* out = dst.data() + static_cast<std::ptrdiff_t>(k) * n;
    std::fill(out, out + n, 0.0);
    const int p = static_cast<int>(combo.rows());
    for (int l = 0; l < p; ++l) {
        const double c = combo(l, k);
        if (c == 0.0) continue;
        axpy(c, src.data() + static_cast<std::ptrdiff_t>(l) * n, out, n);
    }
}

void finish_step(DiffusionState& state, const ProblemInstance& problem) {
    state.iteration += 1;
    const int n = problem.n();
    const int p = static_cast<int>(state.weights.cols());
    for (int k = 0; k < p && !state.diverged; ++k) {
        const double* w = state.weights.data() + static_cast<std::ptrdiff_t>(k) * n;
        double sq = 0.0;
        for (int j = 0; j < n; ++j) sq += w[j] * w[j];
        if (!std::isfinite(sq) || sq > kDivergenceNormSq) state.diverged = true;
    }
}

void draw_batches(DiffusionState& state, const AlgorithmConfig& config,
                  const Partition& partition) {
    const int p = partition.node_count();
    for (int k = 0; k < p; ++k) {
        const auto& rows = partition.node_rows[static_cast<std::size_t>(k)];
        if (config.batch_size > static_cast<int>(rows.size())) {
            throw std::invalid_argument("mini-batch size exceeds a node's row count");
        }
        auto& batch = state.batch_rows[static_cast<std::size_t>(k)];
        batch.resize(static_cast<std::size_t>(config.batch_size));
        auto& rng = state.batch_rngs[static_cast<std::size_t>(k)];
        for (int q = 0; q < config.batch_size; ++q) {
            const auto local = rng.uniform_int(rows.size());
            batch[static_cast<std::size_t>(q)] = rows[local];
        }
    }
}

} // namespace

const char* to_string(Variant v) {
    switch (v) {
        case Variant::Atc: return "atc";
        case Variant::Cta: return "cta";
        case Variant::MbAtc: return "mb-atc";
        case Variant::MbCta: return "mb-cta";
        case Variant::General: return "general";
    }
    return "?";
}

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::Criterion: return "criterion";
        case StopReason::MaxIterations: return "max-iterations";
        case StopReason::Divergence: return "divergence";
    }
    return "?";
}

int resolved_window(const RegularizerParams& reg, int n) {
    if (reg.window > 0) return reg.window;
    return static_cast<int>(std::ceil(0.2 * static_cast<double>(n)));
}

Eigen::VectorXd DiffusionState::average_estimate() const {
    return weights.rowwise().mean();
}

DiffusionState make_state(const AlgorithmConfig& config, const ProblemInstance& problem,
                          int node_count) {
    if (node_count < 1) throw std::invalid_argument("make_state: need at least one node");
    if (config.step_sizes.size() != 1 &&
        config.step_sizes.size() != static_cast<std::size_t>(node_count)) {
        throw std::invalid_argument("make_state: step_sizes must have 1 or P entries");
    }
    for (double mu : config.step_sizes) {
        if (mu < 0.0) throw std::invalid_argument("make_state: step sizes must be >= 0");
    }
    if (config.batch_size < 1) throw std::invalid_argument("make_state: batch size must be >= 1");

    const int n = problem.n();
    DiffusionState state;
    state.weights = Eigen::MatrixXd::Zero(n, node_count);
    state.phase_a = Eigen::MatrixXd::Zero(n, node_count);
    state.phase_b = Eigen::MatrixXd::Zero(n, node_count);
    state.scratch_acc.resize(static_cast<std::size_t>(n));
    state.scratch_z.resize(static_cast<std::size_t>(n));
    state.batch_rows.resize(static_cast<std::size_t>(node_count));
    SplitRng master(config.seed);
    state.batch_rngs.reserve(static_cast<std::size_t>(node_count));
    for (int k = 0; k < node_count; ++k) {
        state.batch_rngs.push_back(
            master.substream(StreamTag::Minibatch, static_cast<std::uint64_t>(k)));
    }
    return state;
}

Eigen::VectorXd instantaneous_gradient(std::span<const double> u, double d,
                                       const Eigen::VectorXd& w) {
    if (u.size() != static_cast<std::size_t>(w.size())) {
        throw std::invalid_argument("instantaneous_gradient: dimension mismatch");
    }
    const int n = static_cast<int>(w.size());
    const double r = d - detail::dot(w.data(), u.data(), n);
    Eigen::VectorXd g(n);
    for (int j = 0; j < n; ++j) g[j] = r * u[static_cast<std::size_t>(j)];
    return g;
}

Eigen::VectorXd minibatch_gradient(const Eigen::MatrixXd& rows, const Eigen::VectorXd& obs,
                                   const Eigen::VectorXd& w) {
    if (rows.rows() != obs.size() || rows.cols() != w.size() || rows.rows() < 1) {
        throw std::invalid_argument("minibatch_gradient: dimension mismatch");
    }
    const Eigen::VectorXd residual = obs - rows * w;
    return rows.transpose() * residual / static_cast<double>(rows.rows());
}

MinibatchDraw sample_minibatch(const ProblemInstance& problem, const Partition& partition,
                               int node, int q, SplitRng& rng) {
    if (node < 0 || node >= partition.node_count()) {
        throw std::invalid_argument("sample_minibatch: node out of range");
    }
    const auto& local_rows = partition.node_rows[static_cast<std::size_t>(node)];
    if (q < 1 || q > static_cast<int>(local_rows.size())) {
        throw std::invalid_argument("sample_minibatch: need 1 <= q <= L_k");
    }
    MinibatchDraw draw;
    draw.local_indices.resize(static_cast<std::size_t>(q));
    draw.rows.resize(q, problem.n());
    draw.obs.resize(q);
    for (int i = 0; i < q; ++i) {
        const int local = static_cast<int>(rng.uniform_int(local_rows.size()));
        draw.local_indices[static_cast<std::size_t>(i)] = local;
        const int global = local_rows[static_cast<std::size_t>(local)];
        draw.rows.row(i) = Eigen::Map<const Eigen::RowVectorXd>(
            problem.theta.data() + static_cast<std::ptrdiff_t>(global) * problem.n(), problem.n());
        draw.obs[i] = problem.observations[global];
    }
    return draw;
}

namespace detail {

double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += a[j] * b[j];
    return s;
}

void step_atc_ordered(DiffusionState& state, const AlgorithmConfig& config,
                      const ProblemInstance& problem, const Partition& partition,
                      const WeightMatrices& weights, std::span<const int> order) {
    const int n = problem.n();
    for (int k : order) {
        adapt_node(state.phase_a.data() + static_cast<std::ptrdiff_t>(k) * n,
                   state.weights.data() + static_cast<std::ptrdiff_t>(k) * n, k, state, config,
                   problem, partition, weights.s);
    }
    for (int k : order) combine_node(state.weights, k, state.phase_a, weights.a2, n);
    finish_step(state, problem);
}

void step_cta_ordered(DiffusionState& state, const AlgorithmConfig& config,
                      const ProblemInstance& problem, const Partition& partition,
                      const WeightMatrices& weights, std::span<const int> order) {
    const int n = problem.n();
    for (int k : order) combine_node(state.phase_a, k, state.weights, weights.a1, n);
    for (int k : order) {
        adapt_node(state.weights.data() + static_cast<std::ptrdiff_t>(k) * n,
                   state.phase_a.data() + static_cast<std::ptrdiff_t>(k) * n, k, state, config,
                   problem, partition, weights.s);
    }
    finish_step(state, problem);
}

void step_general_ordered(DiffusionState& state, const AlgorithmConfig& config,
                          const ProblemInstance& problem, const Partition& partition,
                          const WeightMatrices& weights, std::span<const int> order) {
    const int n = problem.n();
    for (int k : order) combine_node(state.phase_a, k, state.weights, weights.a1, n);
    for (int k : order) {
        adapt_node(state.phase_b.data() + static_cast<std::ptrdiff_t>(k) * n,
                   state.phase_a.data() + static_cast<std::ptrdiff_t>(k) * n, k, state, config,
                   problem, partition, weights.s);
    }
    for (int k : order) combine_node(state.weights, k, state.phase_b, weights.a2, n);
    finish_step(state, problem);
}

void step_mb_ordered(DiffusionState& state, const AlgorithmConfig& config,
                     const ProblemInstance& problem, const Partition& partition,
                     const WeightMatrices& weights, bool adapt_then_combine,
                     std::span<const int> order) {
    const int n = problem.n();
    const double tau = config.reg.tau;
    draw_batches(state, config, partition);
    state.phase_b = state.weights; // w(i), kept for the per-node guard
    if (adapt_then_combine) {
        for (int k : order) {
            adapt_node_minibatch(state.phase_a.data() + static_cast<std::ptrdiff_t>(k) * n,
                                 state.weights.data() + static_cast<std::ptrdiff_t>(k) * n, k,
                                 state, config, problem, partition, weights.s);
        }
        for (int k : order) combine_node(state.weights, k, state.phase_a, weights.a2, n);
    } else {
        for (int k : order) combine_node(state.phase_a, k, state.weights, weights.a1, n);
        for (int k : order) {
            adapt_node_minibatch(state.weights.data() + static_cast<std::ptrdiff_t>(k) * n,
                                 state.phase_a.data() + static_cast<std::ptrdiff_t>(k) * n, k,
                                 state, config, problem, partition, weights.s);
        }
    }
    for (int k : order) {
        const auto prev = state.phase_b.col(k);
        const auto next = state.weights.col(k);
        const int s_prev = sparsity(std::span<const double>(prev.data(), static_cast<std::size_t>(n)), tau);
        const int s_next = sparsity(std::span<const double>(next.data(), static_cast<std::size_t>(n)), tau);
        if (sparsity_guard_rejects(s_prev, s_next, state.iteration, n)) {
            state.weights.col(k) = prev;
        }
    }
    finish_step(state, problem);
}

} // namespace detail

void step_atc(DiffusionState& state, const AlgorithmConfig& config, const ProblemInstance& problem,
              const Partition& partition, const WeightMatrices& weights) {
    detail::step_atc_ordered(state, config, problem, partition, weights,
                             identity_order(partition.node_count()));
}

void step_cta(DiffusionState& state, const AlgorithmConfig& config, const ProblemInstance& problem,
              const Partition& partition, const WeightMatrices& weights) {
    detail::step_cta_ordered(state, config, problem, partition, weights,
                             identity_order(partition.node_count()));
}

void step_general(DiffusionState& state, const AlgorithmConfig& config,
                  const ProblemInstance& problem, const Partition& partition,
                  const WeightMatrices& weights) {
    detail::step_general_ordered(state, config, problem, partition, weights,
                                 identity_order(partition.node_count()));
}

void step_mb_atc(DiffusionState& state, const AlgorithmConfig& config,
                 const ProblemInstance& problem, const Partition& partition,
                 const WeightMatrices& weights) {
    detail::step_mb_ordered(state, config, problem, partition, weights, true,
                            identity_order(partition.node_count()));
}

void step_mb_cta(DiffusionState& state, const AlgorithmConfig& config,
                 const ProblemInstance& problem, const Partition& partition,
                 const WeightMatrices& weights) {
    detail::step_mb_ordered(state, config, problem, partition, weights, false,
                            identity_order(partition.node_count()));
}

void step(DiffusionState& state, const AlgorithmConfig& config, const ProblemInstance& problem,
          const Partition& partition, const WeightMatrices& weights) {
    switch (config.variant) {
        case Variant::Atc: step_atc(state, config, problem, partition, weights); break;
        case Variant::Cta: step_cta(state, config, problem, partition, weights); break;
        case Variant::MbAtc: step_mb_atc(state, config, problem, partition, weights); break;
        case Variant::MbCta: step_mb_cta(state, config, problem, partition, weights); break;
        case Variant::General: step_general(state, config, problem, partition, weights); break;
    }
}

RunResult run(const AlgorithmConfig& config, const ProblemInstance& problem,
              const Partition& partition, const WeightMatrices& weights, long record_every) {
    if (record_every < 1) throw std::invalid_argument("run: record_every must be >= 1");
    if (config.max_iterations < 1) throw std::invalid_argument("run: need max_iterations >= 1");

    const int n = problem.n();
    const int window = resolved_window(config.reg, n);
    const Eigen::VectorXd x = problem.signal.dense();

    DiffusionState state = make_state(config, problem, partition.node_count());
    RunResult result;
    result.stop_reason = StopReason::MaxIterations;

    Eigen::VectorXd wbar(n);
    long steps = 0;
    bool recorded_last = false;
    for (steps = 1; steps <= config.max_iterations; ++steps) {
        step(state, config, problem, partition, weights);

        wbar = state.average_estimate();
        const int s_bar = sparsity(wbar, config.reg.tau);
        state.avg_sparsity_history.push_back(s_bar);

        recorded_last = false;
        if (steps % record_every == 0) {
            result.trace_iterations.push_back(steps);
            result.msd_trace.push_back((wbar - x).squaredNorm());
            result.sparsity_trace.push_back(s_bar);
            recorded_last = true;
        }
        if (state.diverged) {
            result.stop_reason = StopReason::Divergence;
            break;
        }
        if (config.use_stop_criterion &&
            stop_check(state.avg_sparsity_history, window, config.reg.band)) {
            result.stop_reason = StopReason::Criterion;
            break;
        }
    }
    if (steps > config.max_iterations) steps = config.max_iterations;

    result.final_estimate = wbar;
    result.final_sq_deviation = (wbar - x).squaredNorm();
    result.final_sparsity = sparsity(wbar, config.reg.tau);
    result.iterations_used = steps;
    if (!recorded_last) {
        result.trace_iterations.push_back(steps);
        result.msd_trace.push_back(result.final_sq_deviation);
        result.sparsity_trace.push_back(result.final_sparsity);
    }
    return result;
}

} // namespace dcs
