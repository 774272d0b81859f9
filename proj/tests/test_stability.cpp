#include "dcs/stability.hpp"

#include "dcs/diffusion.hpp"
#include "dcs/network.hpp"
#include "dcs/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

using namespace dcs;

namespace {

ProblemInstance small_instance(int n, int m, int k, std::uint64_t seed) {
    return generate_measurements(generate_sparse_signal(n, k, seed), m, 0.0, seed + 1);
}

Eigen::MatrixXd random_square(int dim, SplitRng& rng) {
    Eigen::MatrixXd m(dim, dim);
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) m(r, c) = rng.normal();
    }
    return m;
}

/// Characteristic polynomial coefficients by Faddeev-LeVerrier, roots by
/// Durand-Kerner: a from-scratch spectral-radius oracle for small matrices.
double char_poly_radius(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    // p(x) = x^n + c[1] x^(n-1) + ... + c[n]
    std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
    c[0] = 1.0;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k <= n; ++k) {
        m = a * m + c[static_cast<std::size_t>(k - 1)] * Eigen::MatrixXd::Identity(n, n);
        c[static_cast<std::size_t>(k)] = -(a * m).trace() / k;
    }
    std::vector<std::complex<double>> roots(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        roots[static_cast<std::size_t>(i)] = std::pow(std::complex<double>(0.4, 0.9), i);
    }
    const auto poly = [&](std::complex<double> x) {
        std::complex<double> value = c[0];
        for (int k = 1; k <= n; ++k) value = value * x + c[static_cast<std::size_t>(k)];
        return value;
    };
    for (int it = 0; it < 500; ++it) {
        double shift = 0.0;
        for (int i = 0; i < n; ++i) {
            std::complex<double> denom(1.0, 0.0);
            for (int j = 0; j < n; ++j) {
                if (j != i) denom *= roots[static_cast<std::size_t>(i)] - roots[static_cast<std::size_t>(j)];
            }
            const std::complex<double> delta = poly(roots[static_cast<std::size_t>(i)]) / denom;
            roots[static_cast<std::size_t>(i)] -= delta;
            shift = std::max(shift, std::abs(delta));
        }
        if (shift < 1e-14) break;
    }
    double radius = 0.0;
    for (const auto& r : roots) radius = std::max(radius, std::abs(r));
    return radius;
}

} // namespace

TEST_CASE("spectral radius on fixed matrices") {
    CHECK(spectral_radius(Eigen::MatrixXd::Identity(5, 5)) == doctest::Approx(1.0).epsilon(1e-12));
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 0.3;
    d(1, 1) = -0.9;
    CHECK(spectral_radius(d) == doctest::Approx(0.9).epsilon(1e-12));
    Eigen::MatrixXd rect(2, 3);
    CHECK_THROWS_AS(spectral_radius(rect), std::invalid_argument);
}

TEST_CASE("dense and power-iteration radii agree on nonnegative matrices") {
    SplitRng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::MatrixXd m(50, 50);
        for (int r = 0; r < 50; ++r) {
            for (int c = 0; c < 50; ++c) m(r, c) = rng.uniform01();
        }
        CHECK(spectral_radius_power(m) ==
              doctest::Approx(spectral_radius_dense(m)).epsilon(1e-8));
    }
    Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(spectral_radius_power(neg), std::invalid_argument);
}

TEST_CASE("dense radius matches the characteristic-polynomial oracle") {
    SplitRng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd m = random_square(5, rng);
        CHECK(spectral_radius_dense(m) == doctest::Approx(char_poly_radius(m)).epsilon(1e-8));
    }
}

TEST_CASE("zero step size collapses the product to combination powers") {
    const ProblemInstance inst = small_instance(8, 4, 2, 11);
    const Partition part = partition_uniform(inst, 2);
    const NetworkTopology topo = complete_graph(2);
    const WeightMatrices w = make_weights(topo, Variant::Atc, true);

    const GammaProduct gamma = build_gamma(inst, part, w, {0.0});
    const Eigen::MatrixXd base = w.a1.transpose() * w.a2;
    Eigen::MatrixXd powered = Eigen::MatrixXd::Identity(2, 2);
    for (long i = 0; i < gamma.period; ++i) powered = powered * base;
    const Eigen::MatrixXd expect = kron(powered, Eigen::MatrixXd::Identity(8, 8));
    CHECK((gamma.matrix - expect).cwiseAbs().maxCoeff() <= 1e-14);
    for (double mod : gamma.eigen_moduli) CHECK(mod <= 1.0 + 1e-12);
}

TEST_CASE("gamma keeps at least N - M unit eigenvalues") {
    const ProblemInstance inst = small_instance(12, 6, 2, 13);
    const Partition part = partition_uniform(inst, 2);
    const NetworkTopology topo = complete_graph(2);
    const WeightMatrices w = make_weights(topo, Variant::Atc, true);
    const GammaProduct gamma = build_gamma(inst, part, w, {0.05});
    CHECK(gamma.eigen_moduli.size() == 24);
    CHECK(count_unit_moduli(gamma) >= 6);
}

TEST_CASE("single-node gamma is the plain rank-one product") {
    const ProblemInstance inst = small_instance(10, 4, 2, 17);
    const Partition part = partition_uniform(inst, 1);
    const NetworkTopology topo = complete_graph(1);
    const WeightMatrices w = make_weights(topo, Variant::Atc, true);

    const double mu = 0.07;
    const GammaProduct gamma = build_gamma(inst, part, w, {mu});
    CHECK(gamma.period == 4);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Identity(10, 10);
    for (long i = 1; i <= 4; ++i) {
        const Eigen::VectorXd u = inst.theta.row(static_cast<int>(i % 4)).transpose();
        expect = expect * (Eigen::MatrixXd::Identity(10, 10) - mu * u * u.transpose());
    }
    CHECK((gamma.matrix - expect).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("gamma eigenvalue test against the observed run behaviour") {
    const ProblemInstance inst = small_instance(20, 8, 3, 19);
    const Partition part = partition_uniform(inst, 2);
    const NetworkTopology topo = complete_graph(2);
    const WeightMatrices w = make_weights(topo, Variant::Atc, true);

    GammaProduct all_unit;
    all_unit.eigen_moduli.assign(40, 1.0);
    CHECK_FALSE(gamma_predicts_convergence(all_unit, 20, 8));

    const GammaProduct tiny = build_gamma(inst, part, w, {0.01});
    CHECK(gamma_predicts_convergence(tiny, 20, 8));

    AlgorithmConfig cfg;
    cfg.variant = Variant::Atc;
    cfg.step_sizes = {0.01};
    cfg.reg.xi = 0.0;
    cfg.use_stop_criterion = false;
    cfg.max_iterations = 50 * tiny.period;
    const RunResult ok = run(cfg, inst, part, w, 100);
    CHECK(ok.stop_reason != StopReason::Divergence);

    // Scale the step size until the check flips (scanning clear of the
    // unit-eigenvalue cluster), then expect divergence.
    double mu = 0.01;
    while (build_gamma(inst, part, w, {mu}).eigen_moduli[12] < 0.999 && mu < 1e4) mu *= 1.3;
    double mu_bad = mu;
    while (build_gamma(inst, part, w, {mu_bad}).eigen_moduli[12] <= 1.01 && mu_bad < 1e4) {
        mu_bad *= 1.1;
    }
    CHECK_FALSE(gamma_predicts_convergence(build_gamma(inst, part, w, {mu_bad}), 20, 8));

    cfg.step_sizes = {mu_bad};
    cfg.max_iterations = 200000;
    const RunResult bad = run(cfg, inst, part, w, 1000);
    CHECK(bad.stop_reason == StopReason::Divergence);
}

TEST_CASE("size guard refuses oversized gamma products") {
    const ProblemInstance inst = small_instance(3000, 30, 3, 23);
    const Partition part = partition_uniform(inst, 2);
    const NetworkTopology topo = complete_graph(2);
    const WeightMatrices w = make_weights(topo, Variant::Atc, true);
    CHECK_THROWS_AS(build_gamma(inst, part, w, {0.01}), std::invalid_argument);
}

TEST_CASE("F matrix scalar case and fully connected radius") {
    // P = 1: F = (1 - mu/M)^2 + (N+1) mu^2 / M^2.
    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
    const double mu = 0.3;
    const Eigen::MatrixXd f = build_f_matrix(one, one, mu, 100, 20);
    CHECK(f.rows() == 1);
    const double expect = (1.0 - mu / 20) * (1.0 - mu / 20) + 101.0 * mu * mu / 400.0;
    CHECK(f(0, 0) == doctest::Approx(expect).epsilon(1e-14));

    // Fully connected uniform weights: rho(F) in closed form.
    const int p = 5, n = 200, m = 40;
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(p, p, 1.0 / p);
    for (double mu_test : {0.5, 2.0, 5.0}) {
        const double rho = spectral_radius(build_f_matrix(uniform, uniform, mu_test, n, m));
        const double closed = (1.0 - mu_test / m) * (1.0 - mu_test / m) +
                              (n + 1.0) * mu_test * mu_test / (static_cast<double>(m) * m * p);
        CHECK(rho == doctest::Approx(closed).epsilon(1e-10));
    }
}

TEST_CASE("kronecker sum of T_k equals diag(vec(S^T S)) for symmetric S") {
    const NetworkTopology topo = grow_network(6, 2, 29);
    const Eigen::MatrixXd s = metropolis_weights(topo);
    const int p = 6;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p * p, p * p);
    for (int k = 0; k < p; ++k) {
        const Eigen::MatrixXd t_k = s.col(k).asDiagonal();
        sum += kron(t_k, t_k);
    }
    const Eigen::MatrixXd sts = s.transpose() * s;
    const Eigen::Map<const Eigen::VectorXd> vec(sts.data(), p * p);
    CHECK((sum.diagonal() - vec).cwiseAbs().maxCoeff() <= 1e-14);
    Eigen::MatrixXd off = sum;
    off.diagonal().setZero();
    CHECK(off.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("step-size bracket endpoints") {
    // P = 1: both bounds are 2M/(N+2).
    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
    const MuBracket single = mu_bracket(one, 1000, 200, 1);
    CHECK(single.lower == doctest::Approx(400.0 / 1002.0).epsilon(1e-15));
    CHECK(single.upper == doctest::Approx(400.0 / 1002.0).epsilon(1e-15));

    // Fully connected uniform: zeta = 1/P and the ends coincide.
    const int p = 8;
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(p, p, 1.0 / p);
    const MuBracket full = mu_bracket(uniform, 1000, 200, p);
    CHECK(full.zeta == doctest::Approx(1.0 / p).epsilon(1e-14));
    CHECK(full.lower == doctest::Approx(full.upper).epsilon(1e-12));

    // lower <= upper across random grown topologies.
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const int nodes = 2 + static_cast<int>(seed % 9);
        const int links = 1 + static_cast<int>(seed % 2);
        if (nodes <= links) continue;
        const Eigen::MatrixXd s = metropolis_weights(grow_network(nodes, links, seed));
        const MuBracket br = mu_bracket(s, 1000, 200, nodes);
        CHECK(br.lower <= br.upper + 1e-12);
    }
}

TEST_CASE("exact step-size root stays in the bracket") {
    // Fully connected: the root is the upper bound itself.
    const int p = 6, n = 500, m = 100;
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(p, p, 1.0 / p);
    const MuExactResult full = mu_exact(uniform, uniform, n, m, p);
    CHECK(full.bracket_valid);
    CHECK(full.mu == doctest::Approx(2.0 * p * m / (p + n + 1.0)).epsilon(1e-3));

    // P = 1 scalar quadratic root.
    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
    const MuExactResult single = mu_exact(one, one, 1000, 200, 1);
    CHECK(single.mu == doctest::Approx(400.0 / 1002.0).epsilon(1e-4));

    // Random T_2 topology at desk scale.
    const NetworkTopology topo = grow_network(10, 2, 77);
    const Eigen::MatrixXd s = metropolis_weights(topo);
    const Eigen::MatrixXd a2 = averaging_weights(topo);
    const MuBracket br = mu_bracket(s, 1000, 200, 10);
    const MuExactResult exact = mu_exact(a2, s, 1000, 200, 10);
    CHECK(exact.bracket_valid);
    CHECK(exact.mu >= br.lower - 1e-9);
    CHECK(exact.mu <= br.upper * (1.0 + 1e-6));
    CHECK(spectral_radius(build_f_matrix(a2, s, exact.mu, 1000, 200)) < 1.0);
}

TEST_CASE("rho(F) is unimodal on the bracket (logged, not asserted)") {
    const NetworkTopology topo = grow_network(8, 2, 31);
    const Eigen::MatrixXd s = metropolis_weights(topo);
    const Eigen::MatrixXd a2 = averaging_weights(topo);
    const MuBracket br = mu_bracket(s, 1000, 200, 8);
    int direction_changes = 0;
    double prev = spectral_radius(build_f_matrix(a2, s, br.lower * 0.5, 1000, 200));
    bool decreasing = true;
    for (int i = 1; i <= 40; ++i) {
        const double mu = br.lower * 0.5 + (br.upper * 1.1 - br.lower * 0.5) * i / 40.0;
        const double rho = spectral_radius(build_f_matrix(a2, s, mu, 1000, 200));
        if (decreasing && rho > prev + 1e-12) {
            decreasing = false;
        } else if (!decreasing && rho < prev - 1e-12) {
            ++direction_changes;
        }
        prev = rho;
    }
    if (direction_changes > 0) {
        MESSAGE("rho(F) non-unimodal on sampled grid: ", direction_changes, " extra turns");
    }
}

TEST_CASE("kronecker sums dominate their first member") {
    // Single matrix: equality.
    SplitRng rng(41);
    const Eigen::MatrixXd b = random_square(3, rng);
    const double one_sided = spectral_radius(kron(b, b));
    CHECK(one_sided == doctest::Approx(one_sided));

    // All-equal sequence scales linearly.
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(9, 9);
    for (int i = 0; i < 4; ++i) sum += kron(b, b);
    CHECK(spectral_radius(sum) == doctest::Approx(4.0 * one_sided).epsilon(1e-10));

    const TheoremReport report = verify_kron_sum_dominance(100, 2024);
    CHECK(report.trials == 100);
    CHECK(report.violations == 0);
    CHECK(report.max_violation <= 1e-10);
}

TEST_CASE("identity lifting preserves the spectral radius") {
    const TheoremReport report = verify_identity_lift_invariance(100, 2025);
    CHECK(report.trials == 100);
    CHECK(report.violations == 0);
    CHECK(report.max_violation <= 1e-8);
}

TEST_CASE("rho(F) equals rho of the full-size matrix") {
    SplitRng rng(43);
    for (int n = 1; n <= 3; ++n) {
        for (int p = 1; p <= 3; ++p) {
            const NetworkTopology topo = complete_graph(p);
            const Eigen::MatrixXd s = metropolis_weights(topo);
            const Eigen::MatrixXd a2 = averaging_weights(topo);
            const double mu = rng.uniform(0.1, 2.0);
            const int m = 4;
            const double rho_small = spectral_radius(build_f_matrix(a2, s, mu, n, m));
            const double rho_full = spectral_radius(build_full_f_matrix(a2, s, mu, n, m));
            CHECK(rho_small == doctest::Approx(rho_full).epsilon(1e-8));
        }
    }
    CHECK_THROWS_AS(build_full_f_matrix(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1),
                                        0.1, 4, 4),
                    std::invalid_argument);
}

TEST_CASE("weighted kronecker combinations are bounded below") {
    SplitRng rng(47);
    const Eigen::MatrixXd b = random_square(3, rng);

    // q = 0 reduces both sides to p rho(S x S).
    Eigen::MatrixXd total = 3.0 * b;
    const double base = spectral_radius(kron(total, total));
    CHECK(spectral_radius(1.7 * kron(total, total)) == doctest::Approx(1.7 * base).epsilon(1e-10));

    const TheoremReport report = verify_weighted_kron_bound(100, 2026);
    CHECK(report.trials == 100);
    CHECK(report.violations == 0);
    CHECK(report.max_violation <= 1e-10);
}

TEST_CASE("stability report text carries the key fields") {
    const NetworkTopology topo = grow_network(5, 2, 51);
    const WeightMatrices w = make_weights(topo, Variant::Atc, true);
    const StabilityReport report = analyze_stability(w.a2, w.s, 100, 20, 5, 0.5);
    CHECK(report.s_doubly_stochastic);
    CHECK(report.bracket.lower <= report.mu_exact_value + 1e-9);
    const std::string text = stability_text(report);
    CHECK(text.find("mu_exact:") != std::string::npos);
    CHECK(text.find("rho_f:") != std::string::npos);
}
