#include "dcs/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcs {

void zero_attraction(std::span<const double> w, double delta, std::span<double> out) {
    for (std::size_t j = 0; j < w.size(); ++j) out[j] = zero_attraction(w[j], delta);
}

Eigen::VectorXd zero_attraction(const Eigen::VectorXd& w, double delta) {
    Eigen::VectorXd z(w.size());
    zero_attraction(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), delta,
                    std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
    return z;
}

int sparsity(std::span<const double> w, double tau) {
    int count = 0;
    for (double v : w) {
        if (std::abs(v) > tau) ++count;
    }
    return count;
}

int sparsity(const Eigen::VectorXd& w, double tau) {
    return sparsity(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), tau);
}

bool stop_check(const std::vector<int>& sparsity_history, int window, int band) {
    if (window < 1) throw std::invalid_argument("stop_check: window must be >= 1");
    const long n = static_cast<long>(sparsity_history.size());
    if (n < window) return false;
    const auto begin = sparsity_history.end() - window;
    const int s_min = *std::min_element(begin, sparsity_history.end());
    int count = 0;
    for (auto it = begin; it != sparsity_history.end(); ++it) {
        if (*it <= s_min + band) ++count; // >= s_min by construction
    }
    return static_cast<double>(count) > 0.8 * static_cast<double>(window);
}

long guard_gate(int n) {
    return static_cast<long>(std::ceil(0.02 * static_cast<double>(n)));
}

bool sparsity_guard_rejects(int s_prev, int s_next, long iteration, int n) {
    if (iteration <= guard_gate(n)) return false;
    return static_cast<double>(s_next - s_prev) > 1.5 * static_cast<double>(s_prev);
}

Eigen::VectorXd sparsity_guard(const Eigen::VectorXd& prev_w, const Eigen::VectorXd& next_w,
                               double tau, long iteration, int n) {
    if (prev_w.size() != next_w.size()) {
        throw std::invalid_argument("sparsity_guard: vectors must have the same length");
    }
    const int s_prev = sparsity(prev_w, tau);
    const int s_next = sparsity(next_w, tau);
    return sparsity_guard_rejects(s_prev, s_next, iteration, n) ? prev_w : next_w;
}

} // namespace dcs
