#pragma once

#include "dcs/network.hpp"
#include "dcs/signal_model.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace dcs {

/// Deterministic transition product over one data period L_m = lcm{L_k}.
struct GammaProduct {
    Eigen::MatrixXd matrix;            // NP x NP
    long period = 0;                   // L_m
    std::vector<double> eigen_moduli;  // sorted non-increasing, length NP
};

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Product of the L_m factors A1^T [I - D H(n)] A2 built from the cyclic
/// data, with all eigenvalue moduli. Refuses instances with N*P > 4000.
GammaProduct build_gamma(const ProblemInstance& problem, const Partition& partition,
                         const WeightMatrices& weights, const std::vector<double>& step_sizes);

/// Modulus of the (N-M+1)-th eigenvalue (descending order) strictly below 1.
bool gamma_predicts_convergence(const GammaProduct& gamma, int n, int m);

/// Number of eigen-moduli within tol of 1.
int count_unit_moduli(const GammaProduct& gamma, double tol = 1e-6);

/// Simplified P^2 x P^2 stability matrix (shared step size, doubly
/// stochastic S, A1 = I):
///   F = [(1 - mu/M)^2 I + ((N+1)/M^2) mu^2 sum_k (T_k x T_k)] (A2 x A2),
/// with T_k = diag of column k of S.
Eigen::MatrixXd build_f_matrix(const Eigen::MatrixXd& a2, const Eigen::MatrixXd& s, double mu,
                               int n, int m);

/// Full (NP)^2 x (NP)^2 form of the same matrix (A_i replaced by A_i x I_N);
/// exists for cross-validation only, guarded to N <= 3, P <= 3.
Eigen::MatrixXd build_full_f_matrix(const Eigen::MatrixXd& a2, const Eigen::MatrixXd& s, double mu,
                                    int n, int m);

double spectral_radius(const Eigen::MatrixXd& matrix);
double spectral_radius_dense(const Eigen::MatrixXd& matrix);
/// Shifted power iteration; valid for entrywise-nonnegative matrices.
double spectral_radius_power(const Eigen::MatrixXd& matrix);

struct MuBracket {
    double lower = 0.0; // 2M / ((N+1) zeta + 1), zeta = max entry of S^T S
    double upper = 0.0; // 2PM / (P + N + 1)
    double zeta = 0.0;
};

MuBracket mu_bracket(const Eigen::MatrixXd& s, int n, int m, int p);

struct MuExactResult {
    double mu = 0.0;
    bool bracket_valid = true; // false: no sign change, upper bound returned
    int evaluations = 0;
};

/// Largest mu with rho(F(mu)) < 1, located by bisection on
/// [lower, upper (1+eps)]; |rho - 1| <= tol at the returned point.
MuExactResult mu_exact(const Eigen::MatrixXd& a2, const Eigen::MatrixXd& s, int n, int m, int p,
                       double tol = 1e-6);

struct TheoremReport {
    int trials = 0;
    int violations = 0;
    double max_violation = 0.0;
    bool pass() const { return violations == 0; }
};

/// rho(B1 x B1) <= rho(sum_k B_k x B_k) on random matrix sequences.
TheoremReport verify_kron_sum_dominance(int trials, std::uint64_t seed);
/// rho of sum_k (B_k x I_N) x (B_k x I_N) equals rho of sum_k B_k x B_k.
TheoremReport verify_identity_lift_invariance(int trials, std::uint64_t seed);
/// rho(p S x S + q sum B_k x B_k) >= (p + q/t) rho(S x S), S = sum B_k;
/// equality when all B_k coincide.
TheoremReport verify_weighted_kron_bound(int trials, std::uint64_t seed);

struct StabilityReport {
    int n = 0, m = 0, p = 0;
    double zeta = 0.0;
    MuBracket bracket;
    double mu_exact_value = 0.0;
    bool exact_bracket_ok = true;
    bool s_doubly_stochastic = true;
    double tested_mu = -1.0; // < 0: none
    double rho_f_at_tested = 0.0;
    bool stable_at_tested = false;
};

StabilityReport analyze_stability(const Eigen::MatrixXd& a2, const Eigen::MatrixXd& s, int n,
                                  int m, int p, double tested_mu = -1.0);

/// key: value lines, one per field.
std::string stability_text(const StabilityReport& report);

} // namespace dcs
