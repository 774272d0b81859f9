#include "dcs/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dcs {

namespace {

constexpr double kSuccessThreshold = 1e-2; // linear MSD
constexpr double kMsdFloorDb = -300.0;

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::uint64_t resolved_topology_seed(const ExperimentConfig& config) {
    if (config.topology_seed != 0) return config.topology_seed;
    return SplitRng(config.master_seed).substream(StreamTag::Topology).key();
}

/// Run `count` jobs on up to `workers` threads; job(t) writes slot t only, so
/// scheduling cannot affect the result.
void parallel_for(int count, int workers, const std::function<void(int)>& job) {
    const int threads = std::max(1, std::min(workers, count));
    if (threads == 1) {
        for (int t = 0; t < count; ++t) job(t);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const int t = next.fetch_add(1);
                if (t >= count) return;
                job(t);
            }
        });
    }
    for (auto& th : pool) th.join();
}

struct RunOutput {
    RunSummary summary;
    RunResult result;
};

RunOutput execute_run(const ExperimentConfig& config, const ExperimentSetup& setup,
                      int run_index) {
    RunOutput out;
    const double start = now_seconds();
    out.summary.seed = run_seed(config.master_seed, run_index);
    try {
        const ProblemInstance instance = make_run_instance(config, run_index);
        const Partition partition = partition_uniform(instance, config.p);
        AlgorithmConfig algo = config.algo;
        algo.seed = SplitRng(out.summary.seed).substream(StreamTag::Minibatch).key();
        out.result = run(algo, instance, partition, setup.weights, config.record_every);
        out.summary.iterations_used = out.result.iterations_used;
        out.summary.stop_reason = out.result.stop_reason;
        out.summary.final_sq_deviation = out.result.final_sq_deviation;
        out.summary.final_msd_db = msd_db({out.result.final_sq_deviation});
        out.summary.success = std::isfinite(out.result.final_sq_deviation) &&
                              out.result.final_sq_deviation < kSuccessThreshold;
    } catch (const std::exception& e) {
        out.summary.failed = true;
        out.summary.error = e.what();
        out.summary.success = false;
    }
    out.summary.elapsed_seconds = now_seconds() - start;
    return out;
}

} // namespace

ExperimentSetup make_setup(const ExperimentConfig& config) {
    ExperimentSetup setup;
    setup.topology = config.p == 1 ? complete_graph(1)
                                   : grow_network(config.p, config.p_links,
                                                  resolved_topology_seed(config));
    setup.weights =
        make_weights(setup.topology, config.algo.variant, config.algo.use_adaptation_exchange);
    return setup;
}

std::uint64_t run_seed(std::uint64_t master_seed, int run_index) {
    return SplitRng(master_seed).substream(StreamTag::Run, static_cast<std::uint64_t>(run_index))
        .key();
}

ProblemInstance make_run_instance(const ExperimentConfig& config, int run_index) {
    const std::uint64_t seed = run_seed(config.master_seed, run_index);
    const SplitRng rng(seed);
    const SparseSignal x =
        generate_sparse_signal(config.n, config.k, rng.substream(StreamTag::Signal).key());
    return generate_measurements(x, config.m, config.sigma,
                                 rng.substream(StreamTag::Matrix).key());
}

double msd_db(const std::vector<double>& squared_errors) {
    if (squared_errors.empty()) throw std::invalid_argument("msd_db: empty error list");
    double mean = 0.0;
    for (double e : squared_errors) mean += e;
    mean /= static_cast<double>(squared_errors.size());
    if (!(mean > 0.0)) return kMsdFloorDb;
    return std::max(kMsdFloorDb, 10.0 * std::log10(mean));
}

double MonteCarloResult::final_msd_db() const {
    return msd_db_trace.empty() ? kMsdFloorDb : msd_db_trace.back();
}

double MonteCarloResult::mean_iterations() const {
    if (run_summaries.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : run_summaries) total += static_cast<double>(s.iterations_used);
    return total / static_cast<double>(run_summaries.size());
}

MonteCarloResult monte_carlo(const ExperimentConfig& config) {
    if (config.runs < 1) throw std::invalid_argument("monte_carlo: need runs >= 1");
    const double start = now_seconds();
    const ExperimentSetup setup = make_setup(config);

    std::vector<RunOutput> outputs(static_cast<std::size_t>(config.runs));
    parallel_for(config.runs, config.workers,
                 [&](int t) { outputs[static_cast<std::size_t>(t)] = execute_run(config, setup, t); });

    MonteCarloResult mc;
    mc.run_summaries.reserve(outputs.size());
    int successes = 0;
    for (const auto& out : outputs) {
        mc.run_summaries.push_back(out.summary);
        if (out.summary.success) ++successes;
    }
    mc.success_rate = static_cast<double>(successes) / static_cast<double>(config.runs);

    // Union iteration grid; per-run values extend as step functions (a
    // stopped run keeps its final deviation).
    std::vector<long> grid;
    for (const auto& out : outputs) {
        if (out.summary.failed) continue;
        grid.insert(grid.end(), out.result.trace_iterations.begin(),
                    out.result.trace_iterations.end());
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::vector<std::size_t> cursor(outputs.size(), 0);
    for (long g : grid) {
        std::vector<double> sq;
        double sparsity_sum = 0.0;
        int live = 0;
        bool all_stopped = true;
        for (std::size_t r = 0; r < outputs.size(); ++r) {
            const auto& out = outputs[r];
            if (out.summary.failed) continue;
            const auto& labels = out.result.trace_iterations;
            auto& c = cursor[r];
            while (c + 1 < labels.size() && labels[c + 1] <= g) ++c;
            // labels[c] is the largest label <= g; when g precedes the first
            // label the first recorded value stands in.
            sq.push_back(out.result.msd_trace[c]);
            sparsity_sum += static_cast<double>(out.result.sparsity_trace[c]);
            ++live;
            if (g < out.summary.iterations_used) all_stopped = false;
        }
        if (live == 0) break;
        mc.trace_iterations.push_back(g);
        mc.msd_db_trace.push_back(msd_db(sq));
        mc.avg_sparsity.push_back(sparsity_sum / static_cast<double>(live));
        mc.all_stopped.push_back(all_stopped ? 1 : 0);
    }

    mc.wall_seconds = now_seconds() - start;
    return mc;
}

MuSearchResult empirical_mu_max(const ExperimentConfig& config, double lo, double hi,
                                int runs_per_point, MuSuccessMode mode, double rel_tol) {
    if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("empirical_mu_max: bad range");
    if (runs_per_point < 1) throw std::invalid_argument("empirical_mu_max: runs_per_point >= 1");

    const ExperimentSetup setup = make_setup(config);
    MuSearchResult result;

    const auto point_passes = [&](double mu) {
        result.points_evaluated += 1;
        std::vector<char> ok(static_cast<std::size_t>(runs_per_point), 0);
        parallel_for(runs_per_point, config.workers, [&](int r) {
            ExperimentConfig point = config;
            point.algo.step_sizes = {mu};
            const RunOutput out = execute_run(point, setup, r);
            const bool not_diverged = !out.summary.failed &&
                                      out.summary.stop_reason != StopReason::Divergence;
            ok[static_cast<std::size_t>(r)] =
                (mode == MuSuccessMode::NoDivergence)
                    ? static_cast<char>(not_diverged)
                    : static_cast<char>(not_diverged && out.summary.success);
        });
        return std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
    };

    if (!point_passes(lo)) {
        result.found = false;
        return result;
    }
    result.found = true;
    if (point_passes(hi)) {
        result.mu = hi;
        result.hit_upper = true;
        return result;
    }
    double a = lo;
    double b = hi;
    while (b - a > rel_tol * a) {
        const double mid = 0.5 * (a + b);
        if (point_passes(mid)) {
            a = mid;
        } else {
            b = mid;
        }
    }
    result.mu = a;
    return result;
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& parameter,
                            const std::vector<double>& values) {
    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (double value : values) {
        ExperimentConfig point = config;
        if (parameter == "sigma") {
            point.sigma = value;
        } else if (parameter == "xi") {
            point.algo.reg.xi = value;
        } else if (parameter == "P") {
            point.p = static_cast<int>(value);
        } else if (parameter == "mu") {
            point.algo.step_sizes = {value};
        } else {
            throw std::invalid_argument("sweep: unknown parameter '" + parameter + "'");
        }
        const MonteCarloResult mc = monte_carlo(point);
        std::vector<double> finals;
        for (const auto& s : mc.run_summaries) {
            if (!s.failed) finals.push_back(s.final_sq_deviation);
        }
        SweepRow row;
        row.value = value;
        row.msd_db = finals.empty() ? 0.0 : msd_db(finals);
        row.success_rate = mc.success_rate;
        row.iterations_mean = mc.mean_iterations();
        rows.push_back(row);
    }
    return rows;
}

std::string learning_curve_csv(const MonteCarloResult& result) {
    std::string out = "iteration,msd_db,avg_sparsity,stopped\n";
    char buf[128];
    for (std::size_t i = 0; i < result.trace_iterations.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%ld,%.10g,%.10g,%d\n", result.trace_iterations[i],
                      result.msd_db_trace[i], result.avg_sparsity[i], result.all_stopped[i]);
        out += buf;
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "value,msd_db,success_rate,iterations_mean\n";
    char buf[160];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g\n", row.value, row.msd_db,
                      row.success_rate, row.iterations_mean);
        out += buf;
    }
    return out;
}

std::string run_summary_json(const RunSummary& summary) {
    nlohmann::json j;
    j["final_msd_db"] = summary.final_msd_db;
    j["iterations_used"] = summary.iterations_used;
    j["stop_reason"] = to_string(summary.stop_reason);
    j["success"] = summary.success;
    j["seed"] = summary.seed;
    j["elapsed_seconds"] = summary.elapsed_seconds;
    if (summary.failed) j["error"] = summary.error;
    return j.dump();
}

RunSummary summarize_run(const RunResult& result, std::uint64_t seed, double elapsed_seconds) {
    RunSummary s;
    s.iterations_used = result.iterations_used;
    s.stop_reason = result.stop_reason;
    s.final_sq_deviation = result.final_sq_deviation;
    s.final_msd_db = msd_db({result.final_sq_deviation});
    s.success = std::isfinite(result.final_sq_deviation) &&
                result.final_sq_deviation < kSuccessThreshold;
    s.seed = seed;
    s.elapsed_seconds = elapsed_seconds;
    return s;
}

MonteCarloResult wrap_single_run(const RunResult& result, const RunSummary& summary) {
    MonteCarloResult mc;
    mc.run_summaries.push_back(summary);
    mc.success_rate = summary.success ? 1.0 : 0.0;
    mc.trace_iterations = result.trace_iterations;
    for (std::size_t i = 0; i < result.msd_trace.size(); ++i) {
        mc.msd_db_trace.push_back(msd_db({result.msd_trace[i]}));
        mc.avg_sparsity.push_back(static_cast<double>(result.sparsity_trace[i]));
        mc.all_stopped.push_back(result.trace_iterations[i] >= result.iterations_used ? 1 : 0);
    }
    mc.wall_seconds = summary.elapsed_seconds;
    return mc;
}

Variant parse_variant(const std::string& name) {
    if (name == "atc") return Variant::Atc;
    if (name == "cta") return Variant::Cta;
    if (name == "mb-atc") return Variant::MbAtc;
    if (name == "mb-cta") return Variant::MbCta;
    if (name == "general") return Variant::General;
    throw std::invalid_argument("unknown variant '" + name + "'");
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

} // namespace

void apply_config_line(ExperimentConfig& config, const std::string& key,
                       const std::string& value) {
    if (key == "n") config.n = std::stoi(value);
    else if (key == "m") config.m = std::stoi(value);
    else if (key == "k") config.k = std::stoi(value);
    else if (key == "sigma") config.sigma = std::stod(value);
    else if (key == "p") config.p = std::stoi(value);
    else if (key == "p_links") config.p_links = std::stoi(value);
    else if (key == "topology_seed") config.topology_seed = std::stoull(value);
    else if (key == "variant") config.algo.variant = parse_variant(value);
    else if (key == "mu") config.algo.step_sizes = {std::stod(value)};
    else if (key == "xi") config.algo.reg.xi = std::stod(value);
    else if (key == "delta") config.algo.reg.delta = std::stod(value);
    else if (key == "tau") config.algo.reg.tau = std::stod(value);
    else if (key == "window") config.algo.reg.window = std::stoi(value);
    else if (key == "band") config.algo.reg.band = std::stoi(value);
    else if (key == "q") config.algo.batch_size = std::stoi(value);
    else if (key == "max_iterations") config.algo.max_iterations = std::stol(value);
    else if (key == "use_adaptation_exchange")
        config.algo.use_adaptation_exchange = parse_bool(value);
    else if (key == "use_stop_criterion") config.algo.use_stop_criterion = parse_bool(value);
    else if (key == "runs") config.runs = std::stoi(value);
    else if (key == "master_seed") config.master_seed = std::stoull(value);
    else if (key == "workers") config.workers = std::stoi(value);
    else if (key == "record_every") config.record_every = std::stol(value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            apply_config_line(config, key, value);
        } catch (const std::exception& e) {
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

} // namespace dcs
