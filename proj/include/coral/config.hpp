#ifndef CORAL_CONFIG_HPP
#define CORAL_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "coral/engine.hpp"
#include "coral/graph.hpp"
#include "coral/problem.hpp"

namespace coral {

struct GraphConfig {
    std::string topology = "ring";  // "ring" | "complete" | "random"
    int n_agents = 0;
    double edge_prob = 0.5;
    std::optional<std::uint64_t> seed;  // defaults to the master seed
};

struct ProblemConfig {
    std::string kind = "quadratic";  // "quadratic" | "classification"
    int dim = 0;
    int samples_per_agent = 250;
    double reg_eps = 0.01;
    double cluster_scale = 0.5;
    std::optional<std::uint64_t> seed;  // defaults to the master seed
};

struct CompressorConfig {
    CompressorKind kind = CompressorKind::identity;
    int k = 1;
    CompressScope scope = CompressScope::message;
    std::optional<std::uint64_t> seed;  // defaults to the master seed
};

// Parsed experiment description: one run is a pure function of this struct.
struct ExperimentConfig {
    GraphConfig graph;
    ProblemConfig problem;
    CompressorConfig compressor;
    RunParams params;
    std::uint64_t master_seed = 0;
    std::string label = "experiment";

    std::uint64_t graph_seed() const { return graph.seed.value_or(master_seed); }
    std::uint64_t problem_seed() const { return problem.seed.value_or(master_seed); }
    std::uint64_t compressor_seed() const { return compressor.seed.value_or(master_seed); }
};

// Parses the key-value config format: `[section]` headers, `key = value`
// lines, `#` comments, optional double quotes around string values.
// Unknown sections or keys raise std::invalid_argument with a line number.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& default_label = "experiment");
ExperimentConfig parse_config_file(const std::filesystem::path& path);

Graph build_graph(const ExperimentConfig& config);
std::shared_ptr<const ProblemInstance> build_problem(const ExperimentConfig& config);

// Assembles the full engine.  Compressor parameters are copied into the run
// parameters; the compressor stream seed derives from compressor_seed().
Engine make_engine(const ExperimentConfig& config);

}  // namespace coral

#endif  // CORAL_CONFIG_HPP
