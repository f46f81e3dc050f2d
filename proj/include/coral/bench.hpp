#pragma once

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "coral/config.hpp"
#include "coral/engine.hpp"

namespace coral {

// Outcome of a single experiment run, mirrored both to disk and in memory.
struct RunArtifacts {
    std::filesystem::path trace_csv;
    std::filesystem::path summary_json;
    std::vector<RoundTrace> rows;       // logged rows (t = 0 always included)
    int iterations_to_threshold = -1;   // -1 => threshold never reached
    double min_grad_norm = 0.0;
    RoundTrace final{};                 // last completed round
    bool diverged = false;
    std::string error;                  // divergence message when diverged
};

// One configuration's outcome inside a sweep.
struct SweepRow {
    std::string label;
    int n_agents = 0;
    double sigma = 0.0;
    int iterations_to_threshold = -1;
    double min_grad_norm = 0.0;
    RoundTrace final{};
    double plateau = std::numeric_limits<double>::quiet_NaN();
    bool diverged = false;
    std::string error;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

// A named trace, the unit consumed by emit_plot_data.
struct LabeledTrace {
    std::string label;
    std::vector<RoundTrace> rows;
};

/// Runs one experiment and writes `<label>_trace.csv` + `<label>_summary.json`
/// under out_dir (created if missing).  On divergence the partial trace is
/// still flushed and the summary records the failure; the caller decides the
/// exit code.  Re-running with the same config produces byte-identical files.
RunArtifacts run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Runs the base config on ring graphs of each requested size.  A diverging
/// size is recorded in its row and the sweep continues.
SweepResult sweep_network_size(const ExperimentConfig& base, const std::vector<int>& sizes,
                               const std::filesystem::path& out_dir);

/// Runs the base config once per noise level sigma, repeated over `seeds`
/// consecutive master seeds; each row reports the plateau (median grad norm
/// over the last 10% of iterations) averaged across seeds.
SweepResult noise_study(const ExperimentConfig& base, const std::vector<double>& sigmas,
                        const std::filesystem::path& out_dir, int seeds = 3);

/// Long-format CSV (label,t,metric,value) with one line per trace row per
/// metric.  Throws std::invalid_argument on an empty trace list.
void emit_plot_data(const std::vector<LabeledTrace>& traces, std::ostream& out);

/// Median grad_norm over the logged rows in the last 10% of the horizon
/// (rows with t >= 0.9 * t_last).  NaN when the trace is empty.
double trace_plateau(const std::vector<RoundTrace>& rows);

void write_trace_csv(const std::vector<RoundTrace>& rows, const std::filesystem::path& path);
std::vector<RoundTrace> read_trace_csv(const std::filesystem::path& path);

void write_sweep_json(const SweepResult& result, const std::string& label,
                      const std::filesystem::path& path);

}  // namespace coral
