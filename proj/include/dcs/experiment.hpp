#pragma once

#include "dcs/diffusion.hpp"
#include "dcs/network.hpp"
#include "dcs/signal_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dcs {

/// Full Monte-Carlo experiment description. Defaults reproduce the desk-scale
/// configuration: N = 1000, M = 0.2 N, K = 0.125 M, sigma = 3e-3, P = 20 on a
/// T_3 topology.
struct ExperimentConfig {
    int n = 1000;
    int m = 200;
    int k = 25;
    double sigma = 3e-3;

    int p = 20;
    int p_links = 3;
    std::uint64_t topology_seed = 0; // 0: derive from master_seed

    AlgorithmConfig algo;

    int runs = 50;
    std::uint64_t master_seed = 1;
    int workers = 1;
    long record_every = 100;
};

struct RunSummary {
    long iterations_used = 0;
    StopReason stop_reason = StopReason::MaxIterations;
    double final_sq_deviation = 0.0;
    double final_msd_db = 0.0;
    bool success = false; // final squared deviation < 1e-2
    std::uint64_t seed = 0;
    double elapsed_seconds = 0.0;
    bool failed = false; // sub-run raised; recorded, not propagated
    std::string error;
};

struct MonteCarloResult {
    std::vector<RunSummary> run_summaries;
    std::vector<long> trace_iterations;  // union grid over runs
    std::vector<double> msd_db_trace;    // 10 log10 of the run-mean squared deviation
    std::vector<double> avg_sparsity;
    std::vector<int> all_stopped;        // 1 once every run has terminated
    double success_rate = 0.0;
    double wall_seconds = 0.0;

    [[nodiscard]] double final_msd_db() const;
    [[nodiscard]] double mean_iterations() const;
};

/// Topology and weight matrices shared by every run of an experiment.
struct ExperimentSetup {
    NetworkTopology topology;
    WeightMatrices weights;
};

ExperimentSetup make_setup(const ExperimentConfig& config);

std::uint64_t run_seed(std::uint64_t master_seed, int run_index);

/// Fresh instance + partition for one Monte-Carlo run.
ProblemInstance make_run_instance(const ExperimentConfig& config, int run_index);

/// 10 log10 of the mean squared error, floored at -300 dB.
double msd_db(const std::vector<double>& squared_errors);

MonteCarloResult monte_carlo(const ExperimentConfig& config);

enum class MuSuccessMode { Reconstruct, NoDivergence };

struct MuSearchResult {
    double mu = 0.0;
    bool found = false;
    bool hit_upper = false; // whole range passed
    int points_evaluated = 0;
};

/// Largest step size at which all runs_per_point runs pass, located by
/// bisection on [lo, hi] to 5% relative tolerance. Run instances are reused
/// across points so only mu varies.
MuSearchResult empirical_mu_max(const ExperimentConfig& config, double lo, double hi,
                                int runs_per_point, MuSuccessMode mode, double rel_tol = 0.05);

struct SweepRow {
    double value = 0.0;
    double msd_db = 0.0;
    double success_rate = 0.0;
    double iterations_mean = 0.0;
};

/// parameter is one of "sigma", "xi", "P", "mu".
std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& parameter,
                            const std::vector<double>& values);

std::string learning_curve_csv(const MonteCarloResult& result);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string run_summary_json(const RunSummary& summary);

RunSummary summarize_run(const RunResult& result, std::uint64_t seed, double elapsed_seconds);

/// Present one run in the Monte-Carlo aggregate shape (T = 1).
MonteCarloResult wrap_single_run(const RunResult& result, const RunSummary& summary);

Variant parse_variant(const std::string& name);

/// Flat "key = value" text, '#' comments; unknown keys raise.
void apply_config_file(ExperimentConfig& config, const std::string& path);
void apply_config_line(ExperimentConfig& config, const std::string& key, const std::string& value);

} // namespace dcs
