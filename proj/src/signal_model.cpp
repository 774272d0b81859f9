#include "dcs/signal_model.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace dcs {

Eigen::VectorXd SparseSignal::dense() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    for (std::size_t j = 0; j < support.size(); ++j) x[support[j]] = values[static_cast<int>(j)];
    return x;
}

SparseSignal generate_sparse_signal(int n, int k, std::uint64_t seed) {
    if (n <= 0 || k <= 0 || k > n) {
        throw std::invalid_argument("generate_sparse_signal: need 0 < k <= n");
    }
    SplitRng rng(seed);

    // Support: partial Fisher-Yates, first k slots, then sorted.
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    SparseSignal sig;
    sig.dim = n;
    sig.support.assign(idx.begin(), idx.begin() + k);
    std::sort(sig.support.begin(), sig.support.end());

    // Magnitudes uniform on [0.2, 1], random sign.
    sig.values.resize(k);
    for (int j = 0; j < k; ++j) {
        const double mag = rng.uniform(0.2, 1.0);
        const double sgn = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        sig.values[j] = sgn * mag;
    }
    sig.raw_norm = sig.values.norm();
    sig.values /= sig.raw_norm;
    return sig;
}

ProblemInstance generate_measurements(const SparseSignal& x, int m, double sigma,
                                      std::uint64_t seed) {
    if (m <= 0 || m >= x.dim) {
        throw std::invalid_argument("generate_measurements: need 0 < m < dim(x)");
    }
    if (sigma < 0.0) throw std::invalid_argument("generate_measurements: sigma must be >= 0");

    const int n = x.dim;
    ProblemInstance inst;
    inst.signal = x;
    inst.noise_sigma = sigma;
    inst.rng_seed = seed;

    SplitRng master(seed);
    SplitRng rng_theta = master.substream(StreamTag::Matrix);
    SplitRng rng_noise = master.substream(StreamTag::Noise);

    const double theta_std = 1.0 / std::sqrt(static_cast<double>(m));
    inst.theta.resize(m, n);
    for (int r = 0; r < m; ++r) {
        double* row = inst.theta.data() + static_cast<std::ptrdiff_t>(r) * n;
        for (int c = 0; c < n; ++c) row[c] = theta_std * rng_theta.normal();
    }

    // Per-entry noise variance sigma^2 / M (covariance (sigma^2/M) I).
    const double noise_std = sigma / std::sqrt(static_cast<double>(m));
    inst.noise.resize(m);
    for (int r = 0; r < m; ++r) inst.noise[r] = noise_std * rng_noise.normal();

    inst.observations = inst.theta * x.dense() + inst.noise;
    return inst;
}

std::vector<int> partition_counts(int m, int p) {
    if (p < 1 || p > m) throw std::invalid_argument("partition_counts: need 1 <= p <= m");
    const int base = m / p;
    const int extra = m % p;
    std::vector<int> counts(static_cast<std::size_t>(p), base);
    for (int k = 0; k < extra; ++k) counts[static_cast<std::size_t>(k)] = base + 1;
    return counts;
}

Partition partition_uniform(const ProblemInstance& instance, int p) {
    Partition part;
    part.counts = partition_counts(instance.m(), p);
    part.node_rows.resize(part.counts.size());
    int next = 0;
    for (std::size_t k = 0; k < part.counts.size(); ++k) {
        part.node_rows[k].resize(static_cast<std::size_t>(part.counts[k]));
        std::iota(part.node_rows[k].begin(), part.node_rows[k].end(), next);
        next += part.counts[k];
    }
    return part;
}

NodeSample data_at(const ProblemInstance& instance, const Partition& partition, int node,
                   long iteration) {
    if (node < 0 || node >= partition.node_count()) {
        throw std::invalid_argument("data_at: node out of range");
    }
    if (iteration < 1) throw std::invalid_argument("data_at: iteration must be >= 1");
    const auto& rows = partition.node_rows[static_cast<std::size_t>(node)];
    const long lk = static_cast<long>(rows.size());
    const int local = static_cast<int>(iteration % lk); // 1-based mod(i, L_k) + 1
    const int global = rows[static_cast<std::size_t>(local)];
    NodeSample s;
    s.u = std::span<const double>(
        instance.theta.data() + static_cast<std::ptrdiff_t>(global) * instance.n(),
        static_cast<std::size_t>(instance.n()));
    s.d = instance.observations[global];
    s.global_row = global;
    return s;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "instance files are little-endian; big-endian hosts unsupported");

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_f64(std::ofstream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
double read_f64(std::ifstream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

} // namespace

void dump_instance(const ProblemInstance& instance, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("dump_instance: cannot open " + path);
    out.write("DCS1", 4);
    write_u64(out, static_cast<std::uint64_t>(instance.n()));
    write_u64(out, static_cast<std::uint64_t>(instance.m()));
    write_u64(out, static_cast<std::uint64_t>(instance.signal.sparsity_k()));
    write_f64(out, instance.noise_sigma);
    write_u64(out, instance.rng_seed);
    out.write(reinterpret_cast<const char*>(instance.theta.data()),
              static_cast<std::streamsize>(sizeof(double)) * instance.m() * instance.n());
    const Eigen::VectorXd x = instance.signal.dense();
    out.write(reinterpret_cast<const char*>(x.data()),
              static_cast<std::streamsize>(sizeof(double)) * instance.n());
    out.write(reinterpret_cast<const char*>(instance.observations.data()),
              static_cast<std::streamsize>(sizeof(double)) * instance.m());
    if (!out) throw std::runtime_error("dump_instance: write failed for " + path);
}

ProblemInstance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_instance: cannot open " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (std::memcmp(magic, "DCS1", 4) != 0) {
        throw std::runtime_error("load_instance: bad magic in " + path);
    }
    const int n = static_cast<int>(read_u64(in));
    const int m = static_cast<int>(read_u64(in));
    const int k = static_cast<int>(read_u64(in));
    ProblemInstance inst;
    inst.noise_sigma = read_f64(in);
    inst.rng_seed = read_u64(in);
    inst.theta.resize(m, n);
    in.read(reinterpret_cast<char*>(inst.theta.data()),
            static_cast<std::streamsize>(sizeof(double)) * m * n);
    Eigen::VectorXd x(n);
    in.read(reinterpret_cast<char*>(x.data()), static_cast<std::streamsize>(sizeof(double)) * n);
    inst.observations.resize(m);
    in.read(reinterpret_cast<char*>(inst.observations.data()),
            static_cast<std::streamsize>(sizeof(double)) * m);
    if (!in) throw std::runtime_error("load_instance: truncated file " + path);

    inst.signal.dim = n;
    inst.signal.raw_norm = 1.0;
    inst.signal.support.reserve(static_cast<std::size_t>(k));
    std::vector<double> vals;
    for (int j = 0; j < n; ++j) {
        if (x[j] != 0.0) {
            inst.signal.support.push_back(j);
            vals.push_back(x[j]);
        }
    }
    inst.signal.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<int>(vals.size()));
    if (inst.signal.sparsity_k() != k) {
        throw std::runtime_error("load_instance: support size mismatch in " + path);
    }
    inst.noise = inst.observations - inst.theta * x;
    return inst;
}

} // namespace dcs
