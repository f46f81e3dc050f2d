// coral — experiment driver for the compressed consensus-ADMM tracking
// simulator.  Subcommands: run, sweep-n, noise, verify, plot-data.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "coral/analysis.hpp"
#include "coral/bench.hpp"
#include "coral/config.hpp"
#include "coral/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path output_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("CORAL_OUT_ROOT"); env && *env) return env;
    return "coral_out";
}

int cmd_run(const std::string& config_path, const fs::path& out_dir) {
    const coral::ExperimentConfig cfg = coral::parse_config_file(config_path);
    const coral::RunArtifacts art = coral::run_experiment(cfg, out_dir);
    std::cout << "trace:   " << art.trace_csv.string() << "\n"
              << "summary: " << art.summary_json.string() << "\n";
    if (art.diverged) {
        std::cerr << "run diverged: " << art.error << "\n";
        return 2;
    }
    std::cout << "final grad_norm " << art.final.grad_norm << " after " << art.final.t
              << " rounds";
    if (art.iterations_to_threshold >= 0)
        std::cout << " (threshold reached at t = " << art.iterations_to_threshold << ")";
    std::cout << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<int>& sizes,
              const fs::path& out_dir) {
    const coral::ExperimentConfig cfg = coral::parse_config_file(config_path);
    const coral::SweepResult result = coral::sweep_network_size(cfg, sizes, out_dir);
    const fs::path report = out_dir / (cfg.label + "_sweep.json");
    coral::write_sweep_json(result, cfg.label, report);
    for (const coral::SweepRow& row : result.rows) {
        std::cout << "N=" << row.n_agents << "  iterations=";
        if (row.diverged)
            std::cout << "diverged";
        else if (row.iterations_to_threshold < 0)
            std::cout << "not reached";
        else
            std::cout << row.iterations_to_threshold;
        std::cout << "  final grad_norm=" << row.final.grad_norm << "  bits=" << row.final.bits
                  << "\n";
    }
    std::cout << "report: " << report.string() << "\n";
    return 0;
}

int cmd_noise(const std::string& config_path, const std::vector<double>& sigmas, int seeds,
              const fs::path& out_dir) {
    const coral::ExperimentConfig cfg = coral::parse_config_file(config_path);
    const coral::SweepResult result = coral::noise_study(cfg, sigmas, out_dir, seeds);
    const fs::path report = out_dir / (cfg.label + "_noise.json");
    coral::write_sweep_json(result, cfg.label, report);
    for (const coral::SweepRow& row : result.rows) {
        std::cout << "sigma=" << row.sigma << "  plateau=" << row.plateau;
        if (row.diverged) std::cout << "  (diverged: " << row.error << ")";
        std::cout << "\n";
    }
    std::cout << "report: " << report.string() << "\n";
    return 0;
}

// Residual report: consensus-basis identities, frozen-x equilibrium
// identities over random iterates, and per-agent vs aggregate cross-check
// over shared compressor sample paths.
int cmd_verify(const std::string& config_path, int rounds, int x_samples,
               const std::string& out_file) {
    const coral::ExperimentConfig cfg = coral::parse_config_file(config_path);
    const coral::Graph graph = coral::build_graph(cfg);
    const auto problem = coral::build_problem(cfg);
    const int n = cfg.problem.dim;

    const coral::AggregateModel model = coral::build_aggregate(graph, n, cfg.params.rho);
    const coral::ConsensusBasis basis = coral::compute_basis(model);
    const coral::BasisIdentityResiduals ids = coral::basis_identity_residuals(basis, model);

    std::mt19937_64 xs = coral::make_stream(cfg.master_seed, coral::StreamPurpose::init, 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double eq_max = 0.0;
    for (int s = 0; s < x_samples; ++s) {
        Eigen::VectorXd x(graph.num_agents() * n);
        for (int i = 0; i < x.size(); ++i) x[i] = gauss(xs);
        eq_max = std::max(eq_max, coral::equilibrium_residuals(basis, model, *problem, x).max());
    }

    // Cross-check the engine against the aggregate map, both reading the
    // pre-update replica and drawing the same compressor realizations.
    coral::RunParams params = cfg.params;
    params.algorithm = coral::Algorithm::coral;
    params.variant = coral::ZhatVariant::literal;
    params.noise_std = 0.0;
    params.compressor = cfg.compressor.kind;
    params.compressor_k = cfg.compressor.k;
    params.scope = cfg.compressor.scope;
    coral::Engine engine(graph, problem, params, cfg.master_seed, cfg.compressor_seed());
    coral::CompressorBank bank(params.compressor, params.compressor_k, params.scope,
                               graph.num_agents(), cfg.compressor_seed());
    coral::AggregateState state;
    state.x = engine.x_stacked();
    const int edge_dim = 2 * n * graph.total_degree();
    state.z = Eigen::VectorXd::Zero(edge_dim);
    state.m = Eigen::VectorXd::Zero(edge_dim);
    state.mhat = Eigen::VectorXd::Zero(edge_dim);
    double oracle_max = 0.0;
    for (int t = 0; t < rounds; ++t) {
        engine.step_round();
        state = coral::aggregate_step(model, *problem, state, params, bank);
        oracle_max = std::max(
            {oracle_max, (engine.x_stacked() - state.x).cwiseAbs().maxCoeff(),
             (engine.z_stacked() - state.z).cwiseAbs().maxCoeff(),
             (engine.m_stacked() - state.m).cwiseAbs().maxCoeff(),
             (engine.mhat_stacked() - state.mhat).cwiseAbs().maxCoeff()});
    }

    json j;
    j["schema"] = 1;
    j["label"] = cfg.label;
    j["n_agents"] = graph.num_agents();
    j["num_edges"] = graph.num_undirected_edges();
    j["dim"] = n;
    j["rho"] = cfg.params.rho;
    j["basis"] = {{"b", basis.b},
                  {"p", basis.p},
                  {"spectral_radius", basis.spectral_radius},
                  {"sigma_min_i_minus_r", basis.sigma_min_i_minus_r}};
    j["basis_identities"] = {{"ax_b", ids.ax_b},
                             {"agrad_b", ids.agrad_b},
                             {"btpa", ids.btpa},
                             {"bt_invariance", ids.bt_invariance},
                             {"btp_plus_bt", ids.btp_plus_bt},
                             {"btpb_plus_i", ids.btpb_plus_i},
                             {"max", ids.max()}};
    j["equilibrium"] = {{"x_samples", x_samples}, {"max_residual", eq_max}};
    j["oracle_equivalence"] = {{"rounds", rounds}, {"max_error", oracle_max}};
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!out_file.empty()) {
        std::ofstream out(out_file, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + out_file);
        out << text;
    }
    const bool ok = ids.max() < 1e-10 && eq_max < 1e-10 && oracle_max <= 1e-12;
    return ok ? 0 : 3;
}

int cmd_plot_data(const std::vector<std::string>& trace_paths, const std::string& out_file) {
    std::vector<coral::LabeledTrace> traces;
    for (const std::string& p : trace_paths)
        traces.push_back({fs::path(p).stem().string(), coral::read_trace_csv(p)});
    if (out_file.empty()) {
        coral::emit_plot_data(traces, std::cout);
    } else {
        std::ofstream out(out_file, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + out_file);
        coral::emit_plot_data(traces, out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coral: compressed consensus-ADMM tracking experiments"};
    app.require_subcommand(1);

    std::string out_flag;
    app.add_option("--out", out_flag,
                   "output root (default: $CORAL_OUT_ROOT, else ./coral_out)");

    std::string config_path;
    auto* run = app.add_subcommand("run", "run one experiment, write trace CSV + summary JSON");
    run->fallthrough();
    run->add_option("config", config_path, "experiment config file")->required();

    std::string sweep_config;
    std::vector<int> sizes;
    auto* sweep = app.add_subcommand("sweep-n", "rerun on ring graphs of several sizes");
    sweep->fallthrough();
    sweep->add_option("config", sweep_config, "base config file")->required();
    sweep->add_option("--sizes", sizes, "comma-separated ring sizes")
        ->required()
        ->delimiter(',');

    std::string noise_config;
    std::vector<double> sigmas;
    int noise_seeds = 3;
    auto* noise = app.add_subcommand("noise", "plateau study across channel-noise levels");
    noise->fallthrough();
    noise->add_option("config", noise_config, "base config file")->required();
    noise->add_option("--sigmas", sigmas, "comma-separated noise standard deviations")
        ->required()
        ->delimiter(',');
    noise->add_option("--seeds", noise_seeds, "master seeds averaged per sigma");

    std::string verify_config, verify_out;
    int verify_rounds = 50, verify_samples = 20;
    auto* verify = app.add_subcommand("verify", "numerical residual report for the config");
    verify->fallthrough();
    verify->add_option("config", verify_config, "config file")->required();
    verify->add_option("--rounds", verify_rounds, "cross-check rounds");
    verify->add_option("--x-samples", verify_samples, "random iterates for equilibrium check");
    verify->add_option("--report", verify_out, "also write the JSON report here");

    std::vector<std::string> trace_paths;
    std::string plot_out;
    auto* plot = app.add_subcommand("plot-data", "merge trace CSVs into long-format plot data");
    plot->fallthrough();
    plot->add_option("traces", trace_paths, "trace CSV files")->required();
    plot->add_option("--out-file", plot_out, "write here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path out_dir = output_root(out_flag);
        if (run->parsed()) return cmd_run(config_path, out_dir);
        if (sweep->parsed()) return cmd_sweep(sweep_config, sizes, out_dir);
        if (noise->parsed()) return cmd_noise(noise_config, sigmas, noise_seeds, out_dir);
        if (verify->parsed()) return cmd_verify(verify_config, verify_rounds, verify_samples,
                                                verify_out);
        if (plot->parsed()) return cmd_plot_data(trace_paths, plot_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
