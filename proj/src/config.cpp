#include "coral/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace coral {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

[[noreturn]] void fail(int line, const std::string& what) {
    throw std::invalid_argument("config line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& v, int line) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        fail(line, "expected a number, got '" + v + "'");
    }
    if (used != v.size()) fail(line, "trailing characters in number '" + v + "'");
    return out;
}

long long parse_int(const std::string& v, int line) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        fail(line, "expected an integer, got '" + v + "'");
    }
    if (used != v.size()) fail(line, "trailing characters in integer '" + v + "'");
    return out;
}

std::uint64_t parse_seed(const std::string& v, int line) {
    std::size_t used = 0;
    std::uint64_t out = 0;
    try {
        out = std::stoull(v, &used);
    } catch (const std::exception&) {
        fail(line, "expected a nonnegative seed, got '" + v + "'");
    }
    if (used != v.size()) fail(line, "trailing characters in seed '" + v + "'");
    return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& default_label) {
    ExperimentConfig cfg;
    cfg.label = default_label;

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    bool saw_graph_agents = false, saw_problem_dim = false;

    while (std::getline(in, raw)) {
        ++lineno;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "graph" && section != "problem" && section != "compressor" &&
                section != "params")
                fail(lineno, "unknown section [" + section + "]");
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = unquote(trim(line.substr(eq + 1)));
        if (key.empty() || value.empty()) fail(lineno, "empty key or value");
        if (section.empty()) fail(lineno, "key '" + key + "' outside any section");

        if (section == "graph") {
            if (key == "topology") {
                if (value != "ring" && value != "complete" && value != "random")
                    fail(lineno, "unknown topology '" + value + "'");
                cfg.graph.topology = value;
            } else if (key == "n_agents") {
                cfg.graph.n_agents = static_cast<int>(parse_int(value, lineno));
                saw_graph_agents = true;
            } else if (key == "edge_prob") {
                cfg.graph.edge_prob = parse_double(value, lineno);
            } else if (key == "seed") {
                cfg.graph.seed = parse_seed(value, lineno);
            } else {
                fail(lineno, "unknown key '" + key + "' in [graph]");
            }
        } else if (section == "problem") {
            if (key == "problem") {
                if (value != "quadratic" && value != "classification")
                    fail(lineno, "unknown problem '" + value + "'");
                cfg.problem.kind = value;
            } else if (key == "dim") {
                cfg.problem.dim = static_cast<int>(parse_int(value, lineno));
                saw_problem_dim = true;
            } else if (key == "samples_per_agent") {
                cfg.problem.samples_per_agent = static_cast<int>(parse_int(value, lineno));
            } else if (key == "reg_eps") {
                cfg.problem.reg_eps = parse_double(value, lineno);
            } else if (key == "cluster_scale") {
                cfg.problem.cluster_scale = parse_double(value, lineno);
            } else if (key == "seed") {
                cfg.problem.seed = parse_seed(value, lineno);
            } else {
                fail(lineno, "unknown key '" + key + "' in [problem]");
            }
        } else if (section == "compressor") {
            if (key == "compressor") {
                try {
                    cfg.compressor.kind = compressor_kind_from_string(value);
                } catch (const std::exception& e) {
                    fail(lineno, e.what());
                }
            } else if (key == "k") {
                cfg.compressor.k = static_cast<int>(parse_int(value, lineno));
            } else if (key == "scope") {
                try {
                    cfg.compressor.scope = compress_scope_from_string(value);
                } catch (const std::exception& e) {
                    fail(lineno, e.what());
                }
            } else if (key == "compressor_seed") {
                cfg.compressor.seed = parse_seed(value, lineno);
            } else {
                fail(lineno, "unknown key '" + key + "' in [compressor]");
            }
        } else {  // params
            if (key == "algorithm") {
                try {
                    cfg.params.algorithm = algorithm_from_string(value);
                } catch (const std::exception& e) {
                    fail(lineno, e.what());
                }
            } else if (key == "gamma") {
                cfg.params.gamma = parse_double(value, lineno);
            } else if (key == "delta") {
                cfg.params.delta = parse_double(value, lineno);
            } else if (key == "rho") {
                cfg.params.rho = parse_double(value, lineno);
            } else if (key == "alpha") {
                cfg.params.alpha = parse_double(value, lineno);
            } else if (key == "T") {
                cfg.params.T = static_cast<int>(parse_int(value, lineno));
            } else if (key == "zhat_variant") {
                try {
                    cfg.params.variant = zhat_variant_from_string(value);
                } catch (const std::exception& e) {
                    fail(lineno, e.what());
                }
            } else if (key == "noise_std") {
                cfg.params.noise_std = parse_double(value, lineno);
            } else if (key == "init_std") {
                cfg.params.init_std = parse_double(value, lineno);
            } else if (key == "threshold") {
                cfg.params.threshold = parse_double(value, lineno);
            } else if (key == "log_every") {
                cfg.params.log_every = static_cast<int>(parse_int(value, lineno));
            } else if (key == "master_seed") {
                cfg.master_seed = parse_seed(value, lineno);
            } else if (key == "label") {
                cfg.label = value;
            } else {
                fail(lineno, "unknown key '" + key + "' in [params]");
            }
        }
    }

    if (!saw_graph_agents) throw std::invalid_argument("config: [graph] n_agents is required");
    if (!saw_problem_dim) throw std::invalid_argument("config: [problem] dim is required");
    return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.stem().string());
}

Graph build_graph(const ExperimentConfig& config) {
    const auto& g = config.graph;
    if (g.topology == "ring") return Graph::ring(g.n_agents);
    if (g.topology == "complete") return Graph::complete(g.n_agents);
    return Graph::random_connected(g.n_agents, g.edge_prob, config.graph_seed());
}

std::shared_ptr<const ProblemInstance> build_problem(const ExperimentConfig& config) {
    const auto& p = config.problem;
    if (p.kind == "quadratic")
        return random_quadratic_problem(config.graph.n_agents, p.dim, config.problem_seed());
    return generate_classification(config.graph.n_agents, p.dim, p.samples_per_agent, p.reg_eps,
                                   config.problem_seed(), p.cluster_scale);
}

Engine make_engine(const ExperimentConfig& config) {
    RunParams params = config.params;
    params.compressor = config.compressor.kind;
    params.compressor_k = config.compressor.k;
    params.scope = config.compressor.scope;
    return Engine(build_graph(config), build_problem(config), params, config.master_seed,
                  config.compressor_seed());
}

}  // namespace coral
