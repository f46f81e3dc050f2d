// Acceptance gate: one check per release criterion, each printed as a single
// [PASS]/[FAIL] line with its measured quantity and wall time.  Exits nonzero
// if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coral/analysis.hpp"
#include "coral/bench.hpp"
#include "coral/config.hpp"
#include "coral/engine.hpp"

using namespace coral;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, value);
    return buf;
}

fs::path scratch_root() {
    static const fs::path root = [] {
        const fs::path dir = fs::temp_directory_path() / "coral_acceptance";
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }();
    return root;
}

ExperimentConfig quadratic_config(int n_agents, int dim, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.graph.topology = "ring";
    cfg.graph.n_agents = n_agents;
    cfg.problem.kind = "quadratic";
    cfg.problem.dim = dim;
    cfg.master_seed = seed;
    return cfg;
}

ExperimentConfig classification_config(int n_agents, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.graph.topology = "ring";
    cfg.graph.n_agents = n_agents;
    cfg.problem.kind = "classification";
    cfg.problem.dim = 50;
    cfg.problem.samples_per_agent = 250;
    cfg.problem.reg_eps = 0.01;
    cfg.compressor.kind = CompressorKind::top_k;
    cfg.compressor.k = 1;
    cfg.compressor.scope = CompressScope::block;
    cfg.params.threshold = 1e-6;
    cfg.master_seed = seed;
    return cfg;
}

void use_compressor(ExperimentConfig& cfg, CompressorKind kind, int k,
                    CompressScope scope = CompressScope::message) {
    cfg.compressor.kind = kind;
    cfg.compressor.k = k;
    cfg.compressor.scope = scope;
}

// Shared ensemble for the structural criteria: random connected graphs with
// at least one cycle (trees carry no consensus subspace by construction and
// are rejected upstream), cycling through sizes, block dimensions and
// penalty values.
struct AnalysisConfig {
    Graph graph;
    int n = 0;
    double rho = 0.0;
};

std::vector<AnalysisConfig> analysis_ensemble() {
    const double rhos[3] = {0.1, 0.9, 5.0};
    std::vector<AnalysisConfig> out;
    for (int i = 0; i < 21; ++i) {
        const int N = 4 + i % 3;
        const int n = 1 + (i / 3) % 3;
        std::uint64_t seed = 500 + 17 * static_cast<std::uint64_t>(i);
        Graph g = Graph::random_connected(N, 0.6, seed);
        while (!g.has_cycle()) g = Graph::random_connected(N, 0.6, ++seed);
        out.push_back({std::move(g), n, rhos[i % 3]});
    }
    return out;
}

Eigen::VectorXd gaussian_vec(int n, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> gauss(0.0, scale);
    Eigen::VectorXd v(n);
    for (int l = 0; l < n; ++l) v[l] = gauss(rng);
    return v;
}

std::string file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// --- criteria -------------------------------------------------------------

Outcome criterion_collapse() {
    ExperimentConfig plain = quadratic_config(5, 3, 2024);
    plain.params.algorithm = Algorithm::tracking;
    ExperimentConfig compressed = quadratic_config(5, 3, 2024);
    compressed.params.algorithm = Algorithm::coral;
    compressed.params.variant = ZhatVariant::fresh;
    use_compressor(compressed, CompressorKind::identity, 1);

    Engine a = make_engine(plain);
    Engine b = make_engine(compressed);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        a.step_round();
        b.step_round();
        worst = std::max({worst, (a.x_stacked() - b.x_stacked()).cwiseAbs().maxCoeff(),
                          (a.z_stacked() - b.z_stacked()).cwiseAbs().maxCoeff()});
    }
    return {worst <= 1e-12, "max deviation " + fmt("%.1e", worst) + " over 100 rounds"};
}

Outcome criterion_convergence() {
    double worst_grad = 0.0, worst_cons = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ExperimentConfig cfg = quadratic_config(10, 5, seed);
        use_compressor(cfg, CompressorKind::rand_k, 1);
        cfg.params.T = 5000;
        cfg.params.log_every = 5000;
        cfg.params.threshold = 1e-8;
        Engine engine = make_engine(cfg);
        const RunResult res = engine.run();
        worst_grad = std::max(worst_grad, res.final.grad_norm);
        worst_cons = std::max(worst_cons, res.final.consensus_err);
    }
    const bool pass = worst_grad < 1e-8 && worst_cons < 1e-8;
    return {pass, "worst over 5 seeds: grad " + fmt("%.1e", worst_grad) + ", consensus " +
                      fmt("%.1e", worst_cons)};
}

Outcome criterion_classification() {
    ExperimentConfig cfg = classification_config(25, 7);
    cfg.params.T = 6600;
    cfg.params.log_every = 6600;
    Engine engine = make_engine(cfg);
    const RunResult res = engine.run();
    const int iters = res.iterations_to_threshold;
    const bool pass = iters >= 1650 && iters <= 6600;
    return {pass, "first passage below 1e-6 at round " + std::to_string(iters) +
                      " (accepted band [1650, 6600])"};
}

Outcome criterion_monotonicity() {
    std::vector<int> iters;
    for (int n_agents : {10, 25, 50}) {
        ExperimentConfig cfg = classification_config(n_agents, 7);
        cfg.params.T = 12000;
        cfg.params.log_every = 12000;
        Engine engine = make_engine(cfg);
        iters.push_back(engine.run().iterations_to_threshold);
    }
    const bool found = iters[0] > 0 && iters[1] > 0 && iters[2] > 0;
    const bool pass = found && iters[0] < iters[1] && iters[1] < iters[2];
    return {pass, "rounds to 1e-6 over N=10/25/50: " + std::to_string(iters[0]) + " / " +
                      std::to_string(iters[1]) + " / " + std::to_string(iters[2])};
}

Outcome criterion_basis_identities() {
    double worst = 0.0;
    for (const AnalysisConfig& cfg : analysis_ensemble()) {
        const AggregateModel model = build_aggregate(cfg.graph, cfg.n, cfg.rho);
        worst = std::max(worst, basis_identity_residuals(compute_basis(model), model).max());
    }
    return {worst < 1e-10,
            "worst of six identity residuals over 21 graphs: " + fmt("%.1e", worst)};
}

Outcome criterion_equilibrium() {
    double worst = 0.0;
    int config_index = 0;
    for (const AnalysisConfig& cfg : analysis_ensemble()) {
        const AggregateModel model = build_aggregate(cfg.graph, cfg.n, cfg.rho);
        const ConsensusBasis basis = compute_basis(model);
        const auto problem =
            random_quadratic_problem(cfg.graph.num_agents(), cfg.n,
                                     700 + static_cast<std::uint64_t>(config_index));
        std::mt19937_64 rng(900 + static_cast<std::uint64_t>(config_index));
        for (int trial = 0; trial < 100; ++trial) {
            const Eigen::VectorXd x =
                gaussian_vec(cfg.graph.num_agents() * cfg.n, rng, 2.0);
            worst = std::max(worst,
                             equilibrium_residuals(basis, model, *problem, x).max());
        }
        ++config_index;
    }
    return {worst < 1e-10, "worst residual over 21 configs x 100 states: " + fmt("%.1e", worst)};
}

Outcome criterion_oracle_equivalence() {
    struct Setup {
        Graph graph;
        int n;
        CompressorKind kind;
        CompressScope scope;
    };
    const std::vector<Setup> setups = {
        {Graph::ring(5), 2, CompressorKind::identity, CompressScope::message},
        {Graph::ring(5), 2, CompressorKind::rand_k, CompressScope::message},
        {Graph::random_connected(6, 0.6, 8), 3, CompressorKind::top_k, CompressScope::block},
    };
    double worst = 0.0;
    for (const Setup& setup : setups) {
        const AggregateModel model = build_aggregate(setup.graph, setup.n, 0.9);
        const auto problem =
            random_quadratic_problem(setup.graph.num_agents(), setup.n, 63);
        RunParams params;
        params.algorithm = Algorithm::coral;
        params.variant = ZhatVariant::literal;
        params.compressor = setup.kind;
        params.compressor_k = 1;
        params.scope = setup.scope;

        Engine engine(setup.graph, problem, params, 321);
        CompressorBank bank(setup.kind, 1, setup.scope, setup.graph.num_agents(), 321);
        AggregateState state{engine.x_stacked(), engine.z_stacked(), engine.m_stacked(),
                             engine.mhat_stacked()};
        for (int t = 0; t < 50; ++t) {
            engine.step_round();
            state = aggregate_step(model, *problem, state, params, bank);
            worst = std::max({worst, (engine.x_stacked() - state.x).cwiseAbs().maxCoeff(),
                              (engine.z_stacked() - state.z).cwiseAbs().maxCoeff(),
                              (engine.m_stacked() - state.m).cwiseAbs().maxCoeff(),
                              (engine.mhat_stacked() - state.mhat).cwiseAbs().maxCoeff()});
        }
    }
    return {worst <= 1e-12, "max deviation " + fmt("%.1e", worst) + " over 3 setups x 50 rounds"};
}

Outcome criterion_moments() {
    std::mt19937_64 rng(4242);
    const Eigen::VectorXd v = gaussian_vec(10, rng, 1.0);
    const int k = 3, trials = 100000;

    const MomentEstimate scaled = estimate_moments(CompressorKind::rand_k_unbiased, k, v, trials, 11);
    const double mean_err =
        (scaled.mean - v).cwiseAbs().maxCoeff() / v.cwiseAbs().maxCoeff();

    const MomentEstimate raw = estimate_moments(CompressorKind::rand_k, k, v, trials, 12);
    const double ratio_err = std::abs(raw.contraction_ratio - 0.7);

    std::mt19937_64 vec_rng(13);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::VectorXd w = gaussian_vec(10, vec_rng, 1.0);
        const Eigen::VectorXd kept = top_k(w, k).densify();
        if ((kept - w).squaredNorm() > 0.7 * w.squaredNorm()) ++violations;
    }

    const bool pass = mean_err <= 0.02 && ratio_err <= 0.01 && violations == 0;
    return {pass, "unbiased mean err " + fmt("%.4f", mean_err) + ", contraction |ratio-0.7| " +
                      fmt("%.4f", ratio_err) + ", top-k violations " + std::to_string(violations)};
}

Outcome criterion_lyapunov() {
    // (a) Monte Carlo mean U-increment along boundary-layer steps.
    const AggregateModel model = build_aggregate(Graph::ring(3), 1, 0.9);
    const ConsensusBasis basis = compute_basis(model);
    std::mt19937_64 rng(31415);
    double worst_mean_dU = -std::numeric_limits<double>::infinity();
    for (int state_trial = 0; state_trial < 10; ++state_trial) {
        const BoundaryLayerState state{gaussian_vec(basis.p, rng, 1.0),
                                       gaussian_vec(12, rng, 1.0)};
        const double u0 = lyapunov_U(state.z_tilde, state.m_tilde);
        double acc = 0.0;
        const int samples = 1000;
        for (int mc = 0; mc < samples; ++mc) {
            CompressorBank bank(CompressorKind::rand_k, 1, CompressScope::message, 3,
                                50'000 + static_cast<std::uint64_t>(1000 * state_trial + mc));
            const BoundaryLayerState next = boundary_layer_step(basis, model, state, 0.05, bank);
            acc += lyapunov_U(next.z_tilde, next.m_tilde);
        }
        worst_mean_dU = std::max(worst_mean_dU, acc / samples - u0);
    }

    // (b) W along reduced-system trajectories, zero violations up to
    // round-off slack.
    const auto problem = random_quadratic_problem(10, 5, 77);
    const auto* quad = dynamic_cast<const QuadraticProblem*>(problem.get());
    const double f_star = quad->minimum_value();
    int violations = 0;
    std::mt19937_64 start_rng(101);
    for (const double delta : {0.1, 0.5}) {
        for (int start = 0; start < 3; ++start) {
            Eigen::VectorXd x = gaussian_vec(50, start_rng, 2.0);
            double w_prev = lyapunov_W(*problem, x, 10.0, f_star);
            const double slack = 1e-12 * std::max(1.0, w_prev);
            for (int t = 0; t < 500; ++t) {
                x = reduced_step(*problem, x, 0.1, delta);
                const double w_next = lyapunov_W(*problem, x, 10.0, f_star);
                if (w_next > w_prev + slack) ++violations;
                w_prev = w_next;
            }
        }
    }
    const bool pass = worst_mean_dU < 0.0 && violations == 0;
    return {pass, "worst mean dU " + fmt("%.3f", worst_mean_dU) + " over 10 states, W violations " +
                      std::to_string(violations) + "/3000 steps"};
}

Outcome criterion_noise() {
    ExperimentConfig base = quadratic_config(10, 5, 5);
    use_compressor(base, CompressorKind::rand_k, 1);
    base.params.T = 2000;
    base.params.log_every = 10;
    base.label = "noise";
    const std::vector<double> sigmas = {0.0, 1e-2, std::sqrt(1e-3)};
    const SweepResult res = noise_study(base, sigmas, scratch_root() / "noise", 3);
    bool pass = res.rows.size() == sigmas.size();
    std::string plateaus;
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const SweepRow& row = res.rows[i];
        pass = pass && !row.diverged && std::isfinite(row.plateau);
        if (i > 0) pass = pass && row.plateau > res.rows[i - 1].plateau;
        plateaus += (i ? " < " : "") + fmt("%.2e", row.plateau);
    }
    return {pass, "plateaus ordered over sigma {0, 1e-2, sqrt(1e-3)}: " + plateaus};
}

Outcome criterion_determinism() {
    ExperimentConfig cfg = quadratic_config(6, 3, 15);
    use_compressor(cfg, CompressorKind::rand_k, 2);
    cfg.params.noise_std = 0.01;
    cfg.params.T = 300;
    cfg.label = "determinism";
    const RunArtifacts first = run_experiment(cfg, scratch_root() / "det_a");
    const RunArtifacts second = run_experiment(cfg, scratch_root() / "det_b");
    const std::string bytes_a = file_bytes(first.trace_csv);
    const std::string bytes_b = file_bytes(second.trace_csv);
    const bool pass = !bytes_a.empty() && bytes_a == bytes_b;
    return {pass, "trace CSVs byte-identical across reruns (" +
                      std::to_string(bytes_a.size()) + " bytes)"};
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        double time_budget_s;  // <= 0 means no explicit budget
        std::function<Outcome()> run;
    };
    const std::vector<Entry> entries = {
        {"identity compressor collapses onto the uncompressed algorithm", 1.0,
         criterion_collapse},
        {"compressed runs reach 1e-8 accuracy and consensus in 5000 rounds", 10.0,
         criterion_convergence},
        {"classification benchmark first passage inside the accepted band", 120.0,
         criterion_classification},
        {"rounds-to-threshold strictly increase with network size", 300.0,
         criterion_monotonicity},
        {"consensus-basis identities hold on random connected graphs", 30.0,
         criterion_basis_identities},
        {"frozen-state equilibrium identities hold for random states", 0.0,
         criterion_equilibrium},
        {"per-agent engine and aggregate oracle coincide", 0.0,
         criterion_oracle_equivalence},
        {"compressor moments match their closed forms", 0.0, criterion_moments},
        {"Lyapunov monitors dissipate along both subsystems", 0.0, criterion_lyapunov},
        {"channel noise leaves runs bounded with sigma-ordered plateaus", 0.0,
         criterion_noise},
        {"seeded reruns are byte-identical", 0.0, criterion_determinism},
    };

    int failures = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Entry& entry = entries[i];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = entry.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (entry.time_budget_s > 0 && seconds > entry.time_budget_s) {
            outcome.pass = false;
            outcome.detail += " — exceeded " + fmt("%.0f", entry.time_budget_s) + " s budget";
        }
        if (!outcome.pass) ++failures;
        std::printf("[%s] %2zu/%zu %s — %s (%.2f s)\n", outcome.pass ? "PASS" : "FAIL",
                    i + 1, entries.size(), entry.name, outcome.detail.c_str(), seconds);
        std::fflush(stdout);
    }
    if (failures == 0) {
        std::printf("all %zu criteria passed\n", entries.size());
        return 0;
    }
    std::printf("%d of %zu criteria FAILED\n", failures, entries.size());
    return 1;
}
