#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace dcs {

/// Zero-attraction and stop-criterion parameters. window/band are the
/// sparsity-window length L_s and tolerance band p_s.
struct RegularizerParams {
    double xi = 5e-6;
    double delta = 10.0;
    double tau = 1e-3;
    int window = 0; // 0: resolve to ceil(0.2 N) at configuration time
    int band = 20;
};

/// Piecewise-linear surrogate for -grad ||w||_0, componentwise:
///   delta^2 w + delta on [-1/delta, 0)
///   delta^2 w - delta on (0, 1/delta]
///   0 elsewhere (including w = 0 exactly).
inline double zero_attraction(double w, double delta) {
    if (w > 0.0 && w <= 1.0 / delta) return delta * delta * w - delta;
    if (w < 0.0 && w >= -1.0 / delta) return delta * delta * w + delta;
    return 0.0;
}

void zero_attraction(std::span<const double> w, double delta, std::span<double> out);
Eigen::VectorXd zero_attraction(const Eigen::VectorXd& w, double delta);

/// Number of components with |w_j| > tau.
int sparsity(std::span<const double> w, double tau);
int sparsity(const Eigen::VectorXd& w, double tau);

/// Sparsity-window stop criterion: over the last `window` entries, count
/// those within [s_min, s_min + band]; stop iff the count exceeds
/// 0.8 * window strictly. Returns false until the history is long enough.
bool stop_check(const std::vector<int>& sparsity_history, int window, int band);

/// Iteration gate of the mini-batch sparsity guard: active past ceil(0.02 n).
long guard_gate(int n);

/// True when the update must be rejected: iteration past the gate and the
/// sparsity jump s(next) - s(prev) exceeds 1.5 * s(prev).
bool sparsity_guard_rejects(int s_prev, int s_next, long iteration, int n);

/// Returns next_w, or prev_w when the guard rejects the update.
Eigen::VectorXd sparsity_guard(const Eigen::VectorXd& prev_w, const Eigen::VectorXd& next_w,
                               double tau, long iteration, int n);

} // namespace dcs
