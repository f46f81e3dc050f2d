#include "coral/bench.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace coral {

namespace {

// Shortest exact decimal for a double; %.17g round-trips and keeps the CSV
// byte-stable across reruns.
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

nlohmann::json trace_json(const RoundTrace& row) {
    return {{"t", row.t},
            {"grad_norm", row.grad_norm},
            {"consensus_err", row.consensus_err},
            {"objective", row.objective},
            {"bits", row.bits}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
}

std::string sigma_tag(double sigma) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", sigma);
    std::string tag(buf);
    for (char& c : tag)
        if (c == '.' || c == '+' || c == '-') c = 'p';
    return tag;
}

}  // namespace

void write_trace_csv(const std::vector<RoundTrace>& rows, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "t,grad_norm,consensus_err,objective,bits\n";
    for (const RoundTrace& r : rows)
        out << r.t << ',' << fmt(r.grad_norm) << ',' << fmt(r.consensus_err) << ','
            << fmt(r.objective) << ',' << r.bits << '\n';
    write_text(path, out.str());
}

std::vector<RoundTrace> read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "t,grad_norm,consensus_err,objective,bits")
        throw std::runtime_error("not a trace CSV: " + path.string());
    std::vector<RoundTrace> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        RoundTrace r;
        std::array<double, 3> vals{};
        if (!std::getline(ls, cell, ',')) throw std::runtime_error("truncated trace row");
        r.t = std::stoi(cell);
        for (double& v : vals) {
            if (!std::getline(ls, cell, ',')) throw std::runtime_error("truncated trace row");
            v = std::stod(cell);
        }
        r.grad_norm = vals[0];
        r.consensus_err = vals[1];
        r.objective = vals[2];
        if (!std::getline(ls, cell, ',')) throw std::runtime_error("truncated trace row");
        r.bits = std::stoull(cell);  // kept integral: doubles drop bits past 2^53
        rows.push_back(r);
    }
    return rows;
}

double trace_plateau(const std::vector<RoundTrace>& rows) {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double cutoff = 0.9 * rows.back().t;
    std::vector<double> tail;
    for (const RoundTrace& r : rows)
        if (r.t >= cutoff) tail.push_back(r.grad_norm);
    std::sort(tail.begin(), tail.end());
    const std::size_t m = tail.size();
    return m % 2 == 1 ? tail[m / 2] : 0.5 * (tail[m / 2 - 1] + tail[m / 2]);
}

RunArtifacts run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    RunArtifacts art;
    art.trace_csv = out_dir / (config.label + "_trace.csv");
    art.summary_json = out_dir / (config.label + "_summary.json");

    Engine engine = make_engine(config);
    RoundTrace row = engine.current_trace();
    art.rows.push_back(row);
    art.min_grad_norm = row.grad_norm;
    art.iterations_to_threshold = row.grad_norm < config.params.threshold ? 0 : -1;

    for (int t = 1; t <= config.params.T; ++t) {
        try {
            row = engine.step_round();
        } catch (const DivergenceError& e) {
            art.diverged = true;
            art.error = e.what();
            break;
        }
        art.min_grad_norm = std::min(art.min_grad_norm, row.grad_norm);
        if (art.iterations_to_threshold < 0 && row.grad_norm < config.params.threshold)
            art.iterations_to_threshold = t;
        if (t % config.params.log_every == 0) art.rows.push_back(row);
    }
    // Keep the last completed round visible even when the horizon or a
    // divergence cut it off between logging points.
    if (art.rows.back().t != row.t) art.rows.push_back(row);
    art.final = row;

    write_trace_csv(art.rows, art.trace_csv);

    nlohmann::json j;
    j["schema"] = 1;
    j["label"] = config.label;
    j["master_seed"] = config.master_seed;
    j["n_agents"] = config.graph.n_agents;
    j["dim"] = config.problem.dim;
    j["algorithm"] = to_string(config.params.algorithm);
    j["compressor"] = to_string(config.compressor.kind);
    j["T"] = config.params.T;
    j["threshold"] = config.params.threshold;
    if (art.iterations_to_threshold < 0)
        j["iterations_to_threshold"] = nullptr;
    else
        j["iterations_to_threshold"] = art.iterations_to_threshold;
    j["min_grad_norm"] = art.min_grad_norm;
    j["final"] = trace_json(art.final);
    j["diverged"] = art.diverged;
    if (art.diverged) j["error"] = art.error;
    write_text(art.summary_json, j.dump(2) + "\n");
    return art;
}

SweepResult sweep_network_size(const ExperimentConfig& base, const std::vector<int>& sizes,
                               const std::filesystem::path& out_dir) {
    SweepResult result;
    for (int n : sizes) {
        ExperimentConfig cfg = base;
        cfg.graph.topology = "ring";
        cfg.graph.n_agents = n;
        cfg.label = base.label + "_N" + std::to_string(n);

        SweepRow row;
        row.label = cfg.label;
        row.n_agents = n;
        const RunArtifacts art = run_experiment(cfg, out_dir);
        row.iterations_to_threshold = art.iterations_to_threshold;
        row.min_grad_norm = art.min_grad_norm;
        row.final = art.final;
        row.diverged = art.diverged;
        row.error = art.error;
        if (!art.diverged) row.plateau = trace_plateau(art.rows);
        result.rows.push_back(std::move(row));
    }
    return result;
}

SweepResult noise_study(const ExperimentConfig& base, const std::vector<double>& sigmas,
                        const std::filesystem::path& out_dir, int seeds) {
    if (seeds < 1) throw std::invalid_argument("noise_study: seeds must be >= 1");
    SweepResult result;
    for (double sigma : sigmas) {
        if (sigma < 0.0) throw std::invalid_argument("noise_study: sigma must be >= 0");
        SweepRow row;
        row.sigma = sigma;
        row.n_agents = base.graph.n_agents;
        row.label = base.label + "_sigma" + sigma_tag(sigma);

        double plateau_sum = 0.0;
        int plateau_count = 0;
        for (int s = 0; s < seeds; ++s) {
            ExperimentConfig cfg = base;
            cfg.params.noise_std = sigma;
            cfg.master_seed = base.master_seed + static_cast<std::uint64_t>(s);
            cfg.label = row.label + "_seed" + std::to_string(s);
            const RunArtifacts art = run_experiment(cfg, out_dir);
            if (art.diverged) {
                row.diverged = true;
                row.error = art.error;
                continue;
            }
            plateau_sum += trace_plateau(art.rows);
            ++plateau_count;
            if (s == 0) {
                row.iterations_to_threshold = art.iterations_to_threshold;
                row.min_grad_norm = art.min_grad_norm;
                row.final = art.final;
            }
        }
        if (plateau_count > 0) row.plateau = plateau_sum / plateau_count;
        result.rows.push_back(std::move(row));
    }
    return result;
}

void emit_plot_data(const std::vector<LabeledTrace>& traces, std::ostream& out) {
    if (traces.empty()) throw std::invalid_argument("emit_plot_data: no traces given");
    out << "label,t,metric,value\n";
    for (const LabeledTrace& tr : traces) {
        for (const RoundTrace& r : tr.rows) {
            out << tr.label << ',' << r.t << ",grad_norm," << fmt(r.grad_norm) << '\n';
            out << tr.label << ',' << r.t << ",consensus_err," << fmt(r.consensus_err) << '\n';
            out << tr.label << ',' << r.t << ",objective," << fmt(r.objective) << '\n';
            out << tr.label << ',' << r.t << ",bits," << r.bits << '\n';
        }
    }
}

void write_sweep_json(const SweepResult& result, const std::string& label,
                      const std::filesystem::path& path) {
    nlohmann::json rows = nlohmann::json::array();
    for (const SweepRow& r : result.rows) {
        nlohmann::json j;
        j["label"] = r.label;
        j["n_agents"] = r.n_agents;
        j["sigma"] = r.sigma;
        if (r.iterations_to_threshold < 0)
            j["iterations_to_threshold"] = nullptr;
        else
            j["iterations_to_threshold"] = r.iterations_to_threshold;
        j["min_grad_norm"] = r.min_grad_norm;
        j["final"] = trace_json(r.final);
        j["plateau"] = r.plateau;  // NaN serializes as null
        j["diverged"] = r.diverged;
        if (r.diverged) j["error"] = r.error;
        rows.push_back(std::move(j));
    }
    nlohmann::json j{{"schema", 1}, {"label", label}, {"rows", std::move(rows)}};
    write_text(path, j.dump(2) + "\n");
}

}  // namespace coral
