#include "dcs/network.hpp"

#include "dcs/diffusion.hpp"
#include "dcs/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dcs {

bool NetworkTopology::adjacent(int l, int k) const {
    const auto& nk = neighborhoods[static_cast<std::size_t>(k)];
    return std::binary_search(nk.begin(), nk.end(), l);
}

long NetworkTopology::edge_count() const {
    long twice = 0;
    for (int k = 0; k < node_count; ++k) twice += degree(k) - 1; // drop self
    return twice / 2;
}

namespace {

NetworkTopology from_adjacency_sets(int p, std::vector<std::vector<int>> neigh) {
    NetworkTopology t;
    t.node_count = p;
    t.neighborhoods = std::move(neigh);
    for (int k = 0; k < p; ++k) {
        auto& nk = t.neighborhoods[static_cast<std::size_t>(k)];
        nk.push_back(k);
        std::sort(nk.begin(), nk.end());
        nk.erase(std::unique(nk.begin(), nk.end()), nk.end());
    }
    return t;
}

} // namespace

NetworkTopology grow_network(int p_count, int p_links, std::uint64_t seed) {
    if (p_links < 1 || p_count <= p_links) {
        throw std::invalid_argument("grow_network: need p_links >= 1 and p_count > p_links");
    }
    SplitRng rng = SplitRng(seed).substream(StreamTag::Topology);

    std::vector<std::vector<int>> neigh(static_cast<std::size_t>(p_count));
    const int seed_nodes = p_links + 1;
    for (int a = 0; a < seed_nodes; ++a) {
        for (int b = a + 1; b < seed_nodes; ++b) {
            neigh[static_cast<std::size_t>(a)].push_back(b);
            neigh[static_cast<std::size_t>(b)].push_back(a);
        }
    }
    std::vector<int> pool;
    for (int v = seed_nodes; v < p_count; ++v) {
        // p_links distinct targets among nodes [0, v): partial Fisher-Yates.
        pool.resize(static_cast<std::size_t>(v));
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < p_links; ++i) {
            const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(v - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            const int target = pool[static_cast<std::size_t>(i)];
            neigh[static_cast<std::size_t>(v)].push_back(target);
            neigh[static_cast<std::size_t>(target)].push_back(v);
        }
    }
    return from_adjacency_sets(p_count, std::move(neigh));
}

NetworkTopology complete_graph(int p) {
    if (p < 1) throw std::invalid_argument("complete_graph: need p >= 1");
    std::vector<std::vector<int>> neigh(static_cast<std::size_t>(p));
    for (int a = 0; a < p; ++a) {
        for (int b = 0; b < p; ++b) {
            if (a != b) neigh[static_cast<std::size_t>(a)].push_back(b);
        }
    }
    return from_adjacency_sets(p, std::move(neigh));
}

NetworkTopology topology_from_edges(int p, const std::vector<std::pair<int, int>>& edges) {
    if (p < 1) throw std::invalid_argument("topology_from_edges: need p >= 1");
    std::vector<std::vector<int>> neigh(static_cast<std::size_t>(p));
    for (const auto& [a, b] : edges) {
        if (a < 0 || a >= p || b < 0 || b >= p || a == b) {
            throw std::invalid_argument("topology_from_edges: bad edge");
        }
        neigh[static_cast<std::size_t>(a)].push_back(b);
        neigh[static_cast<std::size_t>(b)].push_back(a);
    }
    return from_adjacency_sets(p, std::move(neigh));
}

bool is_connected(const NetworkTopology& topology) {
    if (topology.node_count == 0) return false;
    std::vector<char> seen(static_cast<std::size_t>(topology.node_count), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 0;
    while (!stack.empty()) {
        const int k = stack.back();
        stack.pop_back();
        ++count;
        for (int l : topology.neighborhoods[static_cast<std::size_t>(k)]) {
            if (!seen[static_cast<std::size_t>(l)]) {
                seen[static_cast<std::size_t>(l)] = 1;
                stack.push_back(l);
            }
        }
    }
    return count == topology.node_count;
}

Eigen::MatrixXd metropolis_weights(const NetworkTopology& topology) {
    const int p = topology.node_count;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    for (int k = 0; k < p; ++k) {
        double off_sum = 0.0;
        for (int l : topology.neighborhoods[static_cast<std::size_t>(k)]) {
            if (l == k) continue;
            const double w = 1.0 / static_cast<double>(std::max(topology.degree(k), topology.degree(l)));
            s(l, k) = w;
            off_sum += w;
        }
        s(k, k) = 1.0 - off_sum;
    }
    return s;
}

Eigen::MatrixXd averaging_weights(const NetworkTopology& topology) {
    const int p = topology.node_count;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
    for (int k = 0; k < p; ++k) {
        const double w = 1.0 / static_cast<double>(topology.degree(k));
        for (int l : topology.neighborhoods[static_cast<std::size_t>(k)]) a(l, k) = w;
    }
    return a;
}

namespace {

WeightValidation::Check check_ones(const std::string& name, const Eigen::VectorXd& sums) {
    WeightValidation::Check c{name, true, 0.0};
    c.violation = (sums.array() - 1.0).abs().maxCoeff();
    c.pass = c.violation <= 1e-12;
    return c;
}

WeightValidation::Check check_nonneg(const std::string& name, const Eigen::MatrixXd& m) {
    WeightValidation::Check c{name, true, 0.0};
    const double lowest = m.minCoeff();
    c.violation = lowest < 0.0 ? -lowest : 0.0;
    c.pass = c.violation == 0.0;
    return c;
}

WeightValidation::Check check_pattern(const std::string& name, const Eigen::MatrixXd& m,
                                      const NetworkTopology& topology) {
    WeightValidation::Check c{name, true, 0.0};
    for (int k = 0; k < topology.node_count; ++k) {
        for (int l = 0; l < topology.node_count; ++l) {
            if (!topology.adjacent(l, k)) c.violation = std::max(c.violation, std::abs(m(l, k)));
        }
    }
    c.pass = c.violation == 0.0;
    return c;
}

} // namespace

bool WeightValidation::all_pass() const {
    for (const auto& c : checks) {
        if (!c.pass) return false;
    }
    return true;
}

double WeightValidation::max_violation() const {
    double v = 0.0;
    for (const auto& c : checks) v = std::max(v, c.violation);
    return v;
}

WeightValidation validate_weights(const WeightMatrices& w, const NetworkTopology& topology) {
    const int p = topology.node_count;
    if (w.s.rows() != p || w.s.cols() != p || w.a1.rows() != p || w.a1.cols() != p ||
        w.a2.rows() != p || w.a2.cols() != p) {
        throw std::invalid_argument("validate_weights: dimension mismatch");
    }
    WeightValidation report;
    report.checks.push_back(check_ones("s_row_sums", w.s * Eigen::VectorXd::Ones(p)));
    report.checks.push_back(check_ones("a1_column_sums", w.a1.transpose() * Eigen::VectorXd::Ones(p)));
    report.checks.push_back(check_ones("a2_column_sums", w.a2.transpose() * Eigen::VectorXd::Ones(p)));
    report.checks.push_back(check_nonneg("s_nonnegative", w.s));
    report.checks.push_back(check_nonneg("a1_nonnegative", w.a1));
    report.checks.push_back(check_nonneg("a2_nonnegative", w.a2));
    report.checks.push_back(check_pattern("s_pattern", w.s, topology));
    report.checks.push_back(check_pattern("a1_pattern", w.a1, topology));
    report.checks.push_back(check_pattern("a2_pattern", w.a2, topology));
    return report;
}

WeightMatrices make_weights(const NetworkTopology& topology, Variant variant,
                            bool use_adaptation_exchange) {
    const int p = topology.node_count;
    WeightMatrices w;
    w.s = use_adaptation_exchange ? metropolis_weights(topology)
                                  : Eigen::MatrixXd::Identity(p, p);
    const Eigen::MatrixXd avg = averaging_weights(topology);
    switch (variant) {
        case Variant::Cta:
        case Variant::MbCta:
            w.a1 = avg;
            w.a2 = Eigen::MatrixXd::Identity(p, p);
            break;
        case Variant::Atc:
        case Variant::MbAtc:
        case Variant::General:
            w.a1 = Eigen::MatrixXd::Identity(p, p);
            w.a2 = avg;
            break;
    }
    return w;
}

std::string adjacency_text(const NetworkTopology& topology) {
    std::ostringstream out;
    for (int k = 0; k < topology.node_count; ++k) {
        out << k << ":";
        for (int l : topology.neighborhoods[static_cast<std::size_t>(k)]) {
            if (l != k) out << ' ' << l;
        }
        out << '\n';
    }
    return out.str();
}

NetworkTopology parse_adjacency_text(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::pair<int, int>> edges;
    int max_node = -1;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("parse_adjacency_text: missing ':'");
        const int k = std::stoi(line.substr(0, colon));
        max_node = std::max(max_node, k);
        std::istringstream rest(line.substr(colon + 1));
        int l = 0;
        while (rest >> l) {
            max_node = std::max(max_node, l);
            if (l > k) edges.emplace_back(k, l);
        }
    }
    return topology_from_edges(max_node + 1, edges);
}

std::string matrix_csv(const Eigen::MatrixXd& m) {
    std::string out;
    char buf[64];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
            out += buf;
            out += (c + 1 < m.cols()) ? ',' : '\n';
        }
    }
    return out;
}

} // namespace dcs
