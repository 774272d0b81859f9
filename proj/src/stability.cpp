#include "dcs/stability.hpp"

#include "dcs/rng.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dcs {

namespace {

constexpr int kDenseEigenLimit = 4000;

long lcm_counts(const std::vector<int>& counts) {
    long l = 1;
    for (int c : counts) l = std::lcm(l, static_cast<long>(c));
    return l;
}

Eigen::MatrixXd random_matrix(int rows, int cols, SplitRng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
    }
    return m;
}

bool is_doubly_stochastic(const Eigen::MatrixXd& s, double tol = 1e-10) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.rows());
    return s.minCoeff() >= -tol && ((s * ones).array() - 1.0).abs().maxCoeff() <= tol &&
           ((s.transpose() * ones).array() - 1.0).abs().maxCoeff() <= tol;
}

} // namespace

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

GammaProduct build_gamma(const ProblemInstance& problem, const Partition& partition,
                         const WeightMatrices& weights, const std::vector<double>& step_sizes) {
    const int n = problem.n();
    const int p = partition.node_count();
    const long dim = static_cast<long>(n) * p;
    if (dim > kDenseEigenLimit) {
        throw std::invalid_argument("build_gamma: N*P exceeds the dense eigenanalysis guard (4000)");
    }
    if (step_sizes.size() != 1 && step_sizes.size() != static_cast<std::size_t>(p)) {
        throw std::invalid_argument("build_gamma: step_sizes must have 1 or P entries");
    }
    const auto mu_at = [&](int k) {
        return step_sizes.size() == 1 ? step_sizes[0] : step_sizes[static_cast<std::size_t>(k)];
    };

    GammaProduct gamma;
    gamma.period = lcm_counts(partition.counts);

    const Eigen::MatrixXd identity_n = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd a1t = kron(weights.a1.transpose(), identity_n);
    const Eigen::MatrixXd a2k = kron(weights.a2, identity_n);

    Eigen::MatrixXd mid(dim, dim);
    for (long iter = 1; iter <= gamma.period; ++iter) {
        mid.setZero();
        // Block k of I - D H(iter): I_N - mu_k sum_l alpha_{l,k} u_l u_l^T.
        for (int k = 0; k < p; ++k) {
            auto block = mid.block(static_cast<long>(k) * n, static_cast<long>(k) * n, n, n);
            block = identity_n;
            for (int l = 0; l < p; ++l) {
                const double a = weights.s(l, k);
                if (a == 0.0) continue;
                const NodeSample sample = data_at(problem, partition, l, iter);
                const Eigen::Map<const Eigen::VectorXd> u(sample.u.data(), n);
                block.noalias() -= (mu_at(k) * a) * (u * u.transpose());
            }
        }
        const Eigen::MatrixXd factor = a1t * mid * a2k;
        if (iter == 1) {
            gamma.matrix = factor;
        } else {
            gamma.matrix = gamma.matrix * factor;
        }
    }

    Eigen::EigenSolver<Eigen::MatrixXd> solver(gamma.matrix, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("build_gamma: eigensolver failed");
    }
    gamma.eigen_moduli.resize(static_cast<std::size_t>(dim));
    for (long i = 0; i < dim; ++i) gamma.eigen_moduli[static_cast<std::size_t>(i)] = std::abs(solver.eigenvalues()[i]);
    std::sort(gamma.eigen_moduli.begin(), gamma.eigen_moduli.end(), std::greater<double>());
    return gamma;
}

bool gamma_predicts_convergence(const GammaProduct& gamma, int n, int m) {
    const long rank = static_cast<long>(n) - m; // 0-based index of the (N-M+1)-th modulus
    if (rank < 0 || rank >= static_cast<long>(gamma.eigen_moduli.size())) {
        throw std::invalid_argument("gamma_predicts_convergence: rank N-M+1 outside the spectrum");
    }
    return gamma.eigen_moduli[static_cast<std::size_t>(rank)] < 1.0;
}

int count_unit_moduli(const GammaProduct& gamma, double tol) {
    int count = 0;
    for (double mod : gamma.eigen_moduli) {
        if (std::abs(mod - 1.0) <= tol) ++count;
    }
    return count;
}

Eigen::MatrixXd build_f_matrix(const Eigen::MatrixXd& a2, const Eigen::MatrixXd& s, double mu,
                               int n, int m) {
    const int p = static_cast<int>(s.rows());
    if (a2.rows() != p || a2.cols() != p || s.cols() != p) {
        throw std::invalid_argument("build_f_matrix: dimension mismatch");
    }
    const double contraction = 1.0 - mu / static_cast<double>(m);
    const double batch_gain = (static_cast<double>(n) + 1.0) * mu * mu /
                              (static_cast<double>(m) * static_cast<double>(m));
    Eigen::MatrixXd v = contraction * contraction * Eigen::MatrixXd::Identity(p * p, p * p);
    for (int k = 0; k < p; ++k) {
        const Eigen::MatrixXd t_k = s.col(k).asDiagonal();
        v += batch_gain * kron(t_k, t_k);
    }
    return v * kron(a2, a2);
}

Eigen::MatrixXd build_full_f_matrix(const Eigen::MatrixXd& a2, const Eigen::MatrixXd& s, double mu,
                                    int n, int m) {
    const int p = static_cast<int>(s.rows());
    if (n > 3 || p > 3) {
        throw std::invalid_argument("build_full_f_matrix: cross-validation guard is N <= 3, P <= 3");
    }
    const Eigen::MatrixXd identity_n = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd mid = (1.0 - mu / static_cast<double>(m)) *
                                Eigen::MatrixXd::Identity(n * p, n * p);
    const double batch_gain = (static_cast<double>(n) + 1.0) * mu * mu /
                              (static_cast<double>(m) * static_cast<double>(m));
    Eigen::MatrixXd core = kron(mid, mid);
    for (int k = 0; k < p; ++k) {
        const Eigen::MatrixXd t_k = s.col(k).asDiagonal();
        const Eigen::MatrixXd t_cal = kron(t_k, identity_n);
        core += batch_gain * kron(t_cal, t_cal);
    }
    const Eigen::MatrixXd a2_cal = kron(a2, identity_n);
    return core * kron(a2_cal, a2_cal);
}

double spectral_radius_dense(const Eigen::MatrixXd& matrix) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(matrix, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("spectral_radius_dense: eigensolver failed");
    }
    double radius = 0.0;
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        radius = std::max(radius, std::abs(solver.eigenvalues()[i]));
    }
    return radius;
}

double spectral_radius_power(const Eigen::MatrixXd& matrix) {
    if (matrix.minCoeff() < 0.0) {
        throw std::invalid_argument("spectral_radius_power: matrix must be entrywise nonnegative");
    }
    const Eigen::Index dim = matrix.rows();
    // Diagonal shift makes the Perron root strictly dominant in modulus.
    const double shift = matrix.rowwise().sum().maxCoeff() + 1.0;
    Eigen::VectorXd v = Eigen::VectorXd::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    double lambda = 0.0;
    for (int it = 0; it < 200000; ++it) {
        Eigen::VectorXd next = matrix * v + shift * v;
        const double norm = next.norm();
        if (norm == 0.0) return 0.0;
        next /= norm;
        const double estimate = norm;
        if (it > 2 && std::abs(estimate - lambda) <= 1e-13 * std::max(1.0, estimate)) {
            lambda = estimate;
            break;
        }
        lambda = estimate;
        v.swap(next);
    }
    return lambda - shift;
}

double spectral_radius(const Eigen::MatrixXd& matrix) {
    if (matrix.rows() != matrix.cols()) {
        throw std::invalid_argument("spectral_radius: matrix must be square");
    }
    if (matrix.rows() <= kDenseEigenLimit) return spectral_radius_dense(matrix);
    return spectral_radius_power(matrix);
}

MuBracket mu_bracket(const Eigen::MatrixXd& s, int n, int m, int p) {
    MuBracket br;
    br.zeta = (s.transpose() * s).maxCoeff();
    br.lower = 2.0 * m / ((static_cast<double>(n) + 1.0) * br.zeta + 1.0);
    br.upper = 2.0 * static_cast<double>(p) * m / (static_cast<double>(p) + n + 1.0);
    return br;
}

MuExactResult mu_exact(const Eigen::MatrixXd& a2, const Eigen::MatrixXd& s, int n, int m, int p,
                       double tol) {
    const MuBracket br = mu_bracket(s, n, m, p);
    MuExactResult result;
    const auto rho = [&](double mu) {
        result.evaluations += 1;
        return spectral_radius_dense(build_f_matrix(a2, s, mu, n, m));
    };

    double a = br.lower;
    double fa = rho(a);
    if (std::abs(fa - 1.0) <= tol) {
        result.mu = a;
        return result;
    }
    if (fa > 1.0) { // sufficient bound violated: preconditions do not hold
        result.mu = br.upper;
        result.bracket_valid = false;
        return result;
    }
    double b = br.upper * (1.0 + 1e-6);
    if (rho(b) < 1.0) { // no sign change in the bracket
        result.mu = br.upper;
        result.bracket_valid = false;
        return result;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = rho(mid);
        if (fm < 1.0) {
            if (1.0 - fm <= tol) {
                result.mu = mid;
                return result;
            }
            a = mid;
        } else {
            b = mid;
        }
        if (b - a <= 1e-12 * std::max(1.0, b)) break;
    }
    result.mu = a;
    return result;
}

TheoremReport verify_kron_sum_dominance(int trials, std::uint64_t seed) {
    TheoremReport report;
    report.trials = trials;
    SplitRng root(seed);
    for (int t = 0; t < trials; ++t) {
        SplitRng rng = root.substream(StreamTag::Trial, static_cast<std::uint64_t>(t));
        const int count = 1 + static_cast<int>(rng.uniform_int(4));
        const int dim = 1 + static_cast<int>(rng.uniform_int(4));
        std::vector<Eigen::MatrixXd> mats;
        mats.reserve(static_cast<std::size_t>(count));
        for (int k = 0; k < count; ++k) mats.push_back(random_matrix(dim, dim, rng));
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(dim * dim, dim * dim);
        for (const auto& b : mats) sum += kron(b, b);
        const double lhs = spectral_radius_dense(kron(mats[0], mats[0]));
        const double rhs = spectral_radius_dense(sum);
        const double violation = lhs - rhs;
        report.max_violation = std::max(report.max_violation, violation);
        if (violation > 1e-10) report.violations += 1;
    }
    return report;
}

TheoremReport verify_identity_lift_invariance(int trials, std::uint64_t seed) {
    TheoremReport report;
    report.trials = trials;
    SplitRng root(seed);
    for (int t = 0; t < trials; ++t) {
        SplitRng rng = root.substream(StreamTag::Trial, static_cast<std::uint64_t>(t));
        const int count = 1 + static_cast<int>(rng.uniform_int(3));
        const int dim = 2 + static_cast<int>(rng.uniform_int(2));
        std::vector<Eigen::MatrixXd> mats;
        for (int k = 0; k < count; ++k) mats.push_back(random_matrix(dim, dim, rng));
        Eigen::MatrixXd base = Eigen::MatrixXd::Zero(dim * dim, dim * dim);
        for (const auto& b : mats) base += kron(b, b);
        const double rho_base = spectral_radius_dense(base);
        for (int id_dim = 1; id_dim <= 3; ++id_dim) {
            const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(id_dim, id_dim);
            Eigen::MatrixXd lifted =
                Eigen::MatrixXd::Zero(dim * id_dim * dim * id_dim, dim * id_dim * dim * id_dim);
            for (const auto& b : mats) {
                const Eigen::MatrixXd bi = kron(b, identity);
                lifted += kron(bi, bi);
            }
            const double violation = std::abs(spectral_radius_dense(lifted) - rho_base);
            report.max_violation = std::max(report.max_violation, violation);
            if (violation > 1e-8) report.violations += 1;
        }
    }
    return report;
}

TheoremReport verify_weighted_kron_bound(int trials, std::uint64_t seed) {
    TheoremReport report;
    report.trials = trials;
    SplitRng root(seed);
    for (int t = 0; t < trials; ++t) {
        SplitRng rng = root.substream(StreamTag::Trial, static_cast<std::uint64_t>(t));
        const int count = 1 + static_cast<int>(rng.uniform_int(4));
        const int dim = 1 + static_cast<int>(rng.uniform_int(4));
        const double p_coef = rng.uniform(0.0, 2.0);
        const double q_coef = rng.uniform(0.0, 2.0);
        std::vector<Eigen::MatrixXd> mats;
        for (int k = 0; k < count; ++k) mats.push_back(random_matrix(dim, dim, rng));

        Eigen::MatrixXd total = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::MatrixXd sum_kron = Eigen::MatrixXd::Zero(dim * dim, dim * dim);
        for (const auto& b : mats) {
            total += b;
            sum_kron += kron(b, b);
        }
        const double rho_total = spectral_radius_dense(kron(total, total));
        const double lhs = spectral_radius_dense(p_coef * kron(total, total) + q_coef * sum_kron);
        const double rhs = (p_coef + q_coef / count) * rho_total;
        const double violation = rhs - lhs;
        report.max_violation = std::max(report.max_violation, violation);
        if (violation > 1e-10) report.violations += 1;

        // Equality case: all members identical.
        Eigen::MatrixXd eq_total = static_cast<double>(count) * mats[0];
        const Eigen::MatrixXd eq_sum = static_cast<double>(count) * kron(mats[0], mats[0]);
        const double eq_lhs =
            spectral_radius_dense(p_coef * kron(eq_total, eq_total) + q_coef * eq_sum);
        const double eq_rhs =
            (p_coef + q_coef / count) * spectral_radius_dense(kron(eq_total, eq_total));
        const double eq_violation = std::abs(eq_lhs - eq_rhs);
        report.max_violation = std::max(report.max_violation, eq_violation);
        if (eq_violation > 1e-10) report.violations += 1;
    }
    return report;
}

StabilityReport analyze_stability(const Eigen::MatrixXd& a2, const Eigen::MatrixXd& s, int n,
                                  int m, int p, double tested_mu) {
    StabilityReport report;
    report.n = n;
    report.m = m;
    report.p = p;
    report.s_doubly_stochastic = is_doubly_stochastic(s);
    report.bracket = mu_bracket(s, n, m, p);
    report.zeta = report.bracket.zeta;
    const MuExactResult exact = mu_exact(a2, s, n, m, p);
    report.mu_exact_value = exact.mu;
    report.exact_bracket_ok = exact.bracket_valid;
    if (tested_mu >= 0.0) {
        report.tested_mu = tested_mu;
        report.rho_f_at_tested = spectral_radius_dense(build_f_matrix(a2, s, tested_mu, n, m));
        report.stable_at_tested = report.rho_f_at_tested < 1.0;
    }
    return report;
}

std::string stability_text(const StabilityReport& report) {
    std::ostringstream out;
    out.precision(12);
    out << "n: " << report.n << '\n';
    out << "m: " << report.m << '\n';
    out << "p: " << report.p << '\n';
    out << "zeta: " << report.zeta << '\n';
    out << "mu_lower: " << report.bracket.lower << '\n';
    out << "mu_upper: " << report.bracket.upper << '\n';
    out << "mu_exact: " << report.mu_exact_value << '\n';
    out << "exact_bracket_ok: " << (report.exact_bracket_ok ? 1 : 0) << '\n';
    out << "s_doubly_stochastic: " << (report.s_doubly_stochastic ? 1 : 0) << '\n';
    if (report.tested_mu >= 0.0) {
        out << "tested_mu: " << report.tested_mu << '\n';
        out << "rho_f: " << report.rho_f_at_tested << '\n';
        out << "stable: " << (report.stable_at_tested ? 1 : 0) << '\n';
    }
    return out.str();
}

} // namespace dcs
