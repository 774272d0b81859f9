#include "dcs/network.hpp"

#include "dcs/diffusion.hpp"
#include "dcs/stability.hpp"

#include <doctest.h>

#include <cmath>

using namespace dcs;

namespace {

void check_doubly_stochastic(const Eigen::MatrixXd& s, double tol = 1e-12) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.rows());
    CHECK(((s * ones).array() - 1.0).abs().maxCoeff() <= tol);
    CHECK(((s.transpose() * ones).array() - 1.0).abs().maxCoeff() <= tol);
    CHECK(s.minCoeff() >= 0.0);
}

} // namespace

TEST_CASE("smallest grown network is the complete triangle") {
    const NetworkTopology t = grow_network(3, 2, 5);
    CHECK(t.node_count == 3);
    CHECK(t.edge_count() == 3);
    for (int k = 0; k < 3; ++k) CHECK(t.degree(k) == 3);
}

TEST_CASE("growth rule fixes the edge count") {
    // Complete seed on p+1 nodes plus p links per added node:
    // C(4,2) + 3 * 16 = 54 edges for (20, 3).
    const NetworkTopology t = grow_network(20, 3, 123);
    CHECK(t.edge_count() == 54);
    CHECK(is_connected(t));
}

TEST_CASE("grown networks are connected and deterministic") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const int p_links = 1 + static_cast<int>(seed % 4);
        const int p_count = p_links + 2 + static_cast<int>(seed % 23);
        const NetworkTopology t = grow_network(p_count, p_links, seed);
        CHECK(is_connected(t));
        for (int k = 0; k < t.node_count; ++k) CHECK(t.adjacent(k, k));
        const NetworkTopology again = grow_network(p_count, p_links, seed);
        CHECK(t.neighborhoods == again.neighborhoods);
    }
    CHECK_THROWS_AS(grow_network(3, 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(grow_network(4, 0, 1), std::invalid_argument);
}

TEST_CASE("metropolis weights on the complete triangle are uniform") {
    const Eigen::MatrixXd s = metropolis_weights(complete_graph(3));
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) CHECK(s(r, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }
}

TEST_CASE("metropolis weights on the 3-node path") {
    // Nodes 0-1-2: |N| = (2, 3, 2); alpha_{0,1} = 1/3, alpha_{0,0} = 2/3.
    const NetworkTopology path = topology_from_edges(3, {{0, 1}, {1, 2}});
    const Eigen::MatrixXd s = metropolis_weights(path);
    CHECK(s(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(s(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(s(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(s == s.transpose());
    check_doubly_stochastic(s);
}

TEST_CASE("metropolis weights are doubly stochastic on grown graphs") {
    for (std::uint64_t seed : {2u, 9u, 31u}) {
        const NetworkTopology t = grow_network(17, 3, seed);
        const Eigen::MatrixXd s = metropolis_weights(t);
        CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
        check_doubly_stochastic(s);
        for (int k = 0; k < t.node_count; ++k) {
            for (int l = 0; l < t.node_count; ++l) {
                if (!t.adjacent(l, k)) CHECK(s(l, k) == 0.0);
            }
        }
    }
}

TEST_CASE("averaging weights") {
    const NetworkTopology path = topology_from_edges(3, {{0, 1}, {1, 2}});
    const Eigen::MatrixXd a = averaging_weights(path);
    for (int l = 0; l < 3; ++l) CHECK(a(l, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    const Eigen::MatrixXd full = averaging_weights(complete_graph(5));
    CHECK((full.array() - 0.2).abs().maxCoeff() <= 1e-15);

    for (std::uint64_t seed : {3u, 14u}) {
        const NetworkTopology t = grow_network(12, 3, seed);
        const Eigen::MatrixXd avg = averaging_weights(t);
        const Eigen::VectorXd col_sums = avg.transpose() * Eigen::VectorXd::Ones(12);
        CHECK((col_sums.array() - 1.0).abs().maxCoeff() <= 1e-12);
        // Spectral radius of a column-stochastic matrix is 1.
        CHECK(std::abs(spectral_radius(avg) - 1.0) <= 1e-10);
    }
}

TEST_CASE("weight validation passes clean matrices and flags defects") {
    const NetworkTopology t = grow_network(9, 2, 4);
    WeightMatrices w = make_weights(t, Variant::Atc, true);
    CHECK(validate_weights(w, t).all_pass());

    // No-exchange mode: identity adaptation matrix is valid.
    const WeightMatrices no_exchange = make_weights(t, Variant::Atc, false);
    CHECK(no_exchange.s == Eigen::MatrixXd::Identity(9, 9));
    CHECK(validate_weights(no_exchange, t).all_pass());

    w.s(0, 0) += 1e-3;
    const WeightValidation bad = validate_weights(w, t);
    CHECK_FALSE(bad.all_pass());
    CHECK(bad.max_violation() == doctest::Approx(1e-3).epsilon(1e-6));

    WeightMatrices wrong = make_weights(t, Variant::Atc, true);
    wrong.a1.resize(4, 4);
    CHECK_THROWS_AS(validate_weights(wrong, t), std::invalid_argument);
}

TEST_CASE("variant wiring of the combination matrices") {
    const NetworkTopology t = grow_network(7, 2, 8);
    const Eigen::MatrixXd avg = averaging_weights(t);
    const WeightMatrices atc = make_weights(t, Variant::Atc, true);
    CHECK(atc.a1 == Eigen::MatrixXd::Identity(7, 7));
    CHECK(atc.a2 == avg);
    const WeightMatrices cta = make_weights(t, Variant::Cta, true);
    CHECK(cta.a1 == avg);
    CHECK(cta.a2 == Eigen::MatrixXd::Identity(7, 7));
}

TEST_CASE("adjacency text and matrix csv round-trip") {
    const NetworkTopology t = grow_network(11, 2, 6);
    const NetworkTopology back = parse_adjacency_text(adjacency_text(t));
    CHECK(back.node_count == t.node_count);
    CHECK(back.neighborhoods == t.neighborhoods);

    const Eigen::MatrixXd s = metropolis_weights(t);
    const std::string csv = matrix_csv(s);
    CHECK(csv.find(',') != std::string::npos);
    // %.17g keeps doubles exactly.
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    const auto comma = line.find(',');
    CHECK(std::stod(line.substr(0, comma)) == s(0, 0));
}
