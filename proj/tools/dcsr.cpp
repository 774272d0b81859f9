// dcsr: sparse recovery over a simulated diffusion network, plus the
// step-size stability analysis that goes with it.
//
// Exit codes: 0 success, 1 usage error, 2 divergence in single-run mode,
// 3 internal error.

#include "dcs/diffusion.hpp"
#include "dcs/experiment.hpp"
#include "dcs/network.hpp"
#include "dcs/signal_model.hpp"
#include "dcs/stability.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitInternal = 3;

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
    out << text;
}

std::vector<double> parse_value_list(const std::string& csv) {
    std::vector<double> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) values.push_back(std::stod(item));
    }
    if (values.empty()) throw std::invalid_argument("--values: empty list");
    return values;
}

std::pair<double, double> parse_range(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("--range: expected lo:hi");
    return {std::stod(spec.substr(0, colon)), std::stod(spec.substr(colon + 1))};
}

/// Config file first, flags second: options are bound to fields already
/// seeded from the file, so only flags actually passed override it.
struct CommonOptions {
    dcs::ExperimentConfig cfg;
    std::string variant_name = "atc";
    double mu = 0.5;
    bool no_adapt_exchange = false;
    bool no_stop = false;

    void bind(CLI::App* app, bool with_algo = true) {
        app->add_option("--config", config_path_, "flat key = value config file")
            ->check(CLI::ExistingFile);
        app->add_option("--n", cfg.n, "signal dimension N");
        app->add_option("--m", cfg.m, "measurement count M");
        app->add_option("--k", cfg.k, "sparsity K");
        app->add_option("--sigma", cfg.sigma, "noise level");
        app->add_option("--p", cfg.p, "node count P");
        app->add_option("--p-links", cfg.p_links, "attachment degree of the grown topology");
        app->add_option("--topology-seed", cfg.topology_seed, "0 derives from the master seed");
        app->add_option("--seed", cfg.master_seed, "master seed");
        app->add_option("--record-every", cfg.record_every, "trace stride");
        if (with_algo) {
            app->add_option("--variant", variant_name, "atc|cta|mb-atc|mb-cta|general")
                ->check(CLI::IsMember({"atc", "cta", "mb-atc", "mb-cta", "general"}));
            app->add_option("--mu", mu, "step size");
            app->add_option("--xi", cfg.algo.reg.xi, "l0 regularization weight");
            app->add_option("--delta", cfg.algo.reg.delta, "zero-attraction parameter");
            app->add_option("--tau", cfg.algo.reg.tau, "sparsity threshold");
            app->add_option("--window", cfg.algo.reg.window, "stop window L_s (0: 0.2 N)");
            app->add_option("--band", cfg.algo.reg.band, "stop band p_s");
            app->add_option("--q", cfg.algo.batch_size, "mini-batch size");
            app->add_option("--max-iters", cfg.algo.max_iterations, "iteration cap C");
            app->add_flag("--no-adapt-exchange", no_adapt_exchange,
                          "drop the adaptation exchange (S = I)");
            app->add_flag("--no-stop", no_stop, "disable the sparsity stop criterion");
        }
    }

    void preload(int argc, char** argv) {
        for (int i = 1; i + 1 < argc; ++i) {
            if (std::string(argv[i]) == "--config") {
                dcs::apply_config_file(cfg, argv[i + 1]);
                mu = cfg.algo.step_sizes[0];
                variant_name = dcs::to_string(cfg.algo.variant);
                no_adapt_exchange = !cfg.algo.use_adaptation_exchange;
                no_stop = !cfg.algo.use_stop_criterion;
                break;
            }
        }
    }

    void finalize() {
        cfg.algo.variant = dcs::parse_variant(variant_name);
        cfg.algo.step_sizes = {mu};
        cfg.algo.use_adaptation_exchange = !no_adapt_exchange;
        cfg.algo.use_stop_criterion = !no_stop;
    }

private:
    std::string config_path_;
};

int cmd_gen(const CommonOptions& opts, const std::string& out_path) {
    const dcs::ProblemInstance instance = dcs::make_run_instance(opts.cfg, 0);
    dcs::dump_instance(instance, out_path);
    std::cout << "wrote " << out_path << " (n=" << instance.n() << " m=" << instance.m()
              << " k=" << instance.signal.sparsity_k() << " sigma=" << instance.noise_sigma
              << ")\n";
    return kExitOk;
}

int cmd_run(const CommonOptions& opts, const std::string& instance_path,
            const std::string& out_path) {
    const auto& cfg = opts.cfg;
    dcs::ProblemInstance instance =
        instance_path.empty() ? dcs::make_run_instance(cfg, 0) : dcs::load_instance(instance_path);
    const dcs::Partition partition = dcs::partition_uniform(instance, cfg.p);
    const dcs::ExperimentSetup setup = dcs::make_setup(cfg);

    dcs::AlgorithmConfig algo = cfg.algo;
    algo.seed = dcs::SplitRng(dcs::run_seed(cfg.master_seed, 0))
                    .substream(dcs::StreamTag::Minibatch)
                    .key();

    const double start = now_seconds();
    const dcs::RunResult result = dcs::run(algo, instance, partition, setup.weights,
                                           cfg.record_every);
    const dcs::RunSummary summary =
        dcs::summarize_run(result, dcs::run_seed(cfg.master_seed, 0), now_seconds() - start);

    if (!out_path.empty()) {
        write_text(out_path, dcs::learning_curve_csv(dcs::wrap_single_run(result, summary)));
    }
    std::cout << dcs::run_summary_json(summary) << "\n";
    return result.stop_reason == dcs::StopReason::Divergence ? kExitDivergence : kExitOk;
}

int cmd_mc(const CommonOptions& opts, const std::string& out_path,
           const std::string& summary_path) {
    const dcs::MonteCarloResult mc = dcs::monte_carlo(opts.cfg);
    write_text(out_path, dcs::learning_curve_csv(mc));
    std::string summaries;
    for (const auto& s : mc.run_summaries) summaries += dcs::run_summary_json(s) + "\n";
    if (!summary_path.empty()) write_text(summary_path, summaries);
    std::fprintf(stdout, "runs: %zu\nsuccess_rate: %.10g\nfinal_msd_db: %.10g\nwall_seconds: %.3f\n",
                 mc.run_summaries.size(), mc.success_rate, mc.final_msd_db(), mc.wall_seconds);
    return kExitOk;
}

int cmd_mumax(const CommonOptions& opts, const std::string& range_spec, int runs_per_point,
              const std::string& mode_name) {
    const auto& cfg = opts.cfg;
    const dcs::ExperimentSetup setup = dcs::make_setup(cfg);
    const dcs::MuBracket bracket = dcs::mu_bracket(setup.weights.s, cfg.n, cfg.m, cfg.p);

    double lo = 0.1 * bracket.lower;
    double hi = 2.0 * bracket.upper;
    if (!range_spec.empty()) std::tie(lo, hi) = parse_range(range_spec);

    const dcs::MuSuccessMode mode = mode_name == "stable" ? dcs::MuSuccessMode::NoDivergence
                                                          : dcs::MuSuccessMode::Reconstruct;
    const dcs::MuSearchResult found =
        dcs::empirical_mu_max(cfg, lo, hi, runs_per_point, mode);

    std::printf("mode: %s\n", mode_name.c_str());
    std::printf("range_lo: %.10g\nrange_hi: %.10g\n", lo, hi);
    std::printf("mu_lower: %.10g\nmu_upper: %.10g\n", bracket.lower, bracket.upper);
    std::printf("found: %d\n", found.found ? 1 : 0);
    if (found.found) std::printf("mu_max: %.10g\n", found.mu);
    std::printf("hit_upper: %d\npoints_evaluated: %d\n", found.hit_upper ? 1 : 0,
                found.points_evaluated);
    return kExitOk;
}

int cmd_analyze(const CommonOptions& opts, bool check_theorems, bool gamma_test,
                const std::string& dump_prefix) {
    const auto& cfg = opts.cfg;
    const dcs::ExperimentSetup setup = dcs::make_setup(cfg);
    const double tested_mu = cfg.algo.step_sizes[0];
    const dcs::StabilityReport report =
        dcs::analyze_stability(setup.weights.a2, setup.weights.s, cfg.n, cfg.m, cfg.p, tested_mu);
    std::cout << dcs::stability_text(report);

    const dcs::WeightValidation validation = dcs::validate_weights(setup.weights, setup.topology);
    std::printf("weights_valid: %d\nweights_max_violation: %.3g\n", validation.all_pass() ? 1 : 0,
                validation.max_violation());

    if (gamma_test) {
        if (static_cast<long>(cfg.n) * cfg.p > 4000) {
            throw std::invalid_argument("--gamma: N*P exceeds the dense eigenanalysis guard (4000)");
        }
        const dcs::ProblemInstance instance = dcs::make_run_instance(cfg, 0);
        const dcs::Partition partition = dcs::partition_uniform(instance, cfg.p);
        const dcs::GammaProduct gamma =
            dcs::build_gamma(instance, partition, setup.weights, cfg.algo.step_sizes);
        std::printf("gamma_period: %ld\n", gamma.period);
        std::printf("gamma_unit_moduli: %d\n", dcs::count_unit_moduli(gamma));
        const std::size_t rank = static_cast<std::size_t>(cfg.n - cfg.m);
        std::printf("gamma_lambda_nm1: %.12g\n", gamma.eigen_moduli[rank]);
        std::printf("gamma_converges: %d\n", dcs::gamma_predicts_convergence(gamma, cfg.n, cfg.m) ? 1 : 0);
    }

    if (check_theorems) {
        const auto t1 = dcs::verify_kron_sum_dominance(100, cfg.master_seed);
        const auto t2 = dcs::verify_identity_lift_invariance(100, cfg.master_seed);
        const auto t3 = dcs::verify_weighted_kron_bound(100, cfg.master_seed);
        std::printf("kron_sum_dominance: %s (trials=%d violations=%d max=%.3g)\n",
                    t1.pass() ? "pass" : "FAIL", t1.trials, t1.violations, t1.max_violation);
        std::printf("identity_lift_invariance: %s (trials=%d violations=%d max=%.3g)\n",
                    t2.pass() ? "pass" : "FAIL", t2.trials, t2.violations, t2.max_violation);
        std::printf("weighted_kron_bound: %s (trials=%d violations=%d max=%.3g)\n",
                    t3.pass() ? "pass" : "FAIL", t3.trials, t3.violations, t3.max_violation);
    }

    if (!dump_prefix.empty()) {
        write_text(dump_prefix + "_topology.txt", dcs::adjacency_text(setup.topology));
        write_text(dump_prefix + "_s.csv", dcs::matrix_csv(setup.weights.s));
        write_text(dump_prefix + "_a1.csv", dcs::matrix_csv(setup.weights.a1));
        write_text(dump_prefix + "_a2.csv", dcs::matrix_csv(setup.weights.a2));
    }
    return kExitOk;
}

int cmd_sweep(const CommonOptions& opts, const std::string& param, const std::string& values_csv,
              const std::string& out_path) {
    const std::vector<double> values = parse_value_list(values_csv);
    const std::vector<dcs::SweepRow> rows = dcs::sweep(opts.cfg, param, values);
    write_text(out_path, dcs::sweep_csv(rows));
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion l0-LMS compressive-sensing reconstruction"};
    app.require_subcommand(1);

    CommonOptions opts;
    try {
        opts.preload(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    std::string out_path;
    std::string summary_path;
    std::string instance_path;
    std::string range_spec;
    std::string mode_name = "reconstruct";
    std::string sweep_param;
    std::string sweep_values;
    std::string dump_prefix;
    int runs_per_point = 3;
    bool check_theorems = false;
    bool gamma_test = false;

    auto* gen = app.add_subcommand("gen", "generate and dump a problem instance");
    opts.bind(gen, /*with_algo=*/false);
    gen->add_option("--out", out_path, "instance file")->required();

    auto* run_cmd = app.add_subcommand("run", "single reconstruction run");
    opts.bind(run_cmd);
    run_cmd->add_option("--instance", instance_path, "load a dumped instance instead of generating")
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--out", out_path, "learning-curve CSV path");

    auto* mc_cmd = app.add_subcommand("mc", "Monte-Carlo experiment");
    opts.bind(mc_cmd);
    mc_cmd->add_option("--runs", opts.cfg.runs, "Monte-Carlo runs T");
    mc_cmd->add_option("--workers", opts.cfg.workers, "parallel run workers");
    mc_cmd->add_option("--out", out_path, "aggregate learning-curve CSV path");
    mc_cmd->add_option("--summary", summary_path, "per-run summary JSON lines path");

    auto* mumax_cmd = app.add_subcommand("mumax", "empirical largest stable/successful step size");
    opts.bind(mumax_cmd);
    mumax_cmd->add_option("--runs-per-point", runs_per_point, "runs per bisection point");
    mumax_cmd->add_option("--range", range_spec, "search range lo:hi");
    mumax_cmd->add_option("--mode", mode_name, "reconstruct|stable")
        ->check(CLI::IsMember({"reconstruct", "stable"}));
    mumax_cmd->add_option("--workers", opts.cfg.workers, "parallel run workers");

    auto* analyze_cmd = app.add_subcommand("analyze", "stability report");
    opts.bind(analyze_cmd);
    analyze_cmd->add_flag("--check-theorems", check_theorems, "run the randomized theorem checks");
    analyze_cmd->add_flag("--gamma", gamma_test, "run the deterministic product test");
    analyze_cmd->add_option("--dump-prefix", dump_prefix, "write topology/weights files");

    auto* sweep_cmd = app.add_subcommand("sweep", "Monte-Carlo sweep over one parameter");
    opts.bind(sweep_cmd);
    sweep_cmd->add_option("--param", sweep_param, "sigma|xi|P|mu")->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep_cmd->add_option("--runs", opts.cfg.runs, "Monte-Carlo runs per value");
    sweep_cmd->add_option("--workers", opts.cfg.workers, "parallel run workers");
    sweep_cmd->add_option("--out", out_path, "sweep CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        opts.finalize();
        if (gen->parsed()) return cmd_gen(opts, out_path);
        if (run_cmd->parsed()) return cmd_run(opts, instance_path, out_path);
        if (mc_cmd->parsed()) return cmd_mc(opts, out_path, summary_path);
        if (mumax_cmd->parsed()) return cmd_mumax(opts, range_spec, runs_per_point, mode_name);
        if (analyze_cmd->parsed()) return cmd_analyze(opts, check_theorems, gamma_test, dump_prefix);
        if (sweep_cmd->parsed()) return cmd_sweep(opts, sweep_param, sweep_values, out_path);
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
