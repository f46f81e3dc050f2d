#ifndef CORAL_ENGINE_HPP
#define CORAL_ENGINE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "coral/compression.hpp"
#include "coral/graph.hpp"
#include "coral/problem.hpp"

namespace coral {

// Which update law the engine executes: the uncompressed tracking algorithm
// exchanges raw messages; the compressed variant adds the per-edge
// error-feedback integrators m_ij with replicas mhat_ji.
enum class Algorithm { tracking, coral };

// Ordering of the z-relaxation versus the replica update within a round.
// `fresh` relaxes towards the replica value after the incoming message has
// been applied, which makes the identity-compressor run collapse exactly
// onto the tracking algorithm; `literal` uses the pre-update replica.
enum class ZhatVariant { fresh, literal };

// Granularity of compression.  `message` applies the compressor to the full
// 2n residual of an edge message; `block` applies it independently to the
// y-half and the s-half (two R^n calls).  Block scope matches the reference
// experiments, where the compressor is defined over the canonical basis of
// R^n.
enum class CompressScope { message, block };

Algorithm algorithm_from_string(const std::string& s);
ZhatVariant zhat_variant_from_string(const std::string& s);
CompressScope compress_scope_from_string(const std::string& s);
std::string to_string(Algorithm a);
std::string to_string(ZhatVariant v);
std::string to_string(CompressScope s);

struct RunParams {
    double gamma = 0.1;   // solution step gain, in (0, 1)
    double delta = 0.5;   // gradient gain, > 0
    double rho = 0.9;     // penalty parameter, > 0
    double alpha = 0.9;   // edge-state relaxation, in (0, 1)
    int T = 1000;         // iteration budget
    Algorithm algorithm = Algorithm::coral;
    ZhatVariant variant = ZhatVariant::fresh;
    CompressorKind compressor = CompressorKind::identity;
    int compressor_k = 1;
    CompressScope scope = CompressScope::message;
    double noise_std = 0.0;    // additive channel noise on received messages
    double init_std = 1.0;     // x_i^0 ~ N(0, init_std^2 I)
    double threshold = 1e-6;   // first-passage target on grad_norm_at_mean
    int log_every = 1;

    void validate(const ProblemInstance& problem) const;  // throws on bad ranges
};

struct RoundTrace {
    int t = 0;
    double grad_norm = 0.0;       // || sum_i grad f_i(mean iterate) ||
    double consensus_err = 0.0;   // || x - 1 (x-bar) ||
    double objective = 0.0;       // f(mean iterate)
    std::uint64_t bits = 0;       // cumulative transmitted payload bits
};

struct RunResult {
    std::vector<RoundTrace> rows;        // t = 0 plus every log_every-th round
    int iterations_to_threshold = -1;    // first t with grad_norm < threshold, -1 if never
    double min_grad_norm = 0.0;
    RoundTrace final;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int iteration, const std::string& what)
        : std::runtime_error(what), iteration_(iteration) {}
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

// Per-agent compressors plus the scope they are applied at.  Both the engine
// and the aggregate-form oracle consume messages through a bank so that two
// runs constructed from the same seed share one compressor sample path.
class CompressorBank {
public:
    CompressorBank(CompressorKind kind, int k, CompressScope scope, int n_agents,
                   std::uint64_t master_seed);

    // Compresses an edge residual (dimension 2n) on behalf of `agent`.
    // Returns the densified transmitted vector; accumulates wire bits.
    Eigen::VectorXd apply(int agent, const Eigen::Ref<const Eigen::VectorXd>& residual);

    CompressScope scope() const { return scope_; }
    CompressorKind kind() const { return kind_; }
    std::uint64_t bits_accumulated() const { return bits_; }
    void reset_bits() { bits_ = 0; }

private:
    CompressorKind kind_;
    CompressScope scope_;
    std::vector<Compressor> per_agent_;
    std::uint64_t bits_ = 0;
};

// Single-agent update pieces (free functions so tests can drive them
// directly against hand-evaluated values).

// [y_i; s_i] = 1/(1 + rho d_i) ([x_i; grad_i] + sum_j z_ij)
void local_averaging_step(const Eigen::Ref<const Eigen::VectorXd>& x_i,
                          const Eigen::Ref<const Eigen::VectorXd>& grad_i,
                          const std::vector<const Eigen::VectorXd*>& z_edges, double rho,
                          Eigen::Ref<Eigen::VectorXd> y_i, Eigen::Ref<Eigen::VectorXd> s_i);

// x_i' = x_i + gamma (y_i - x_i) - gamma delta s_i
Eigen::VectorXd solution_update(const Eigen::Ref<const Eigen::VectorXd>& x_i,
                                const Eigen::Ref<const Eigen::VectorXd>& y_i,
                                const Eigen::Ref<const Eigen::VectorXd>& s_i, double gamma,
                                double delta);

// -z_ij + 2 rho [y_i; s_i]
Eigen::VectorXd nominal_message(const Eigen::Ref<const Eigen::VectorXd>& z_ij,
                                const Eigen::Ref<const Eigen::VectorXd>& y_i,
                                const Eigen::Ref<const Eigen::VectorXd>& s_i, double rho);

// Round-synchronous simulator over a fixed graph and problem.  All reads in
// a round target the pre-round snapshot; per-agent RNG streams make the
// joint sample path a pure function of the seeds.
class Engine {
public:
    // The compressor streams derive from compressor_seed when given, so the
    // sample path of the compressors can be varied (or shared with an
    // aggregate-form oracle) without touching initialization or noise.
    Engine(Graph graph, std::shared_ptr<const ProblemInstance> problem, RunParams params,
           std::uint64_t master_seed,
           std::optional<std::uint64_t> compressor_seed = std::nullopt);

    // One synchronous round; returns the post-round trace row.
    RoundTrace step_round();

    // Runs params.T rounds from the current state (trace row t=0 included).
    RunResult run();

    const Graph& graph() const { return graph_; }
    const ProblemInstance& problem() const { return *problem_; }
    const RunParams& params() const { return params_; }
    int round() const { return t_; }

    // Stacked-state accessors in the canonical directed-pair order.  The
    // edge blocks hold z_(i,j), m_(i,j) and mhat_(i,j), where mhat_(i,j) is
    // the replica of m_(i,j) kept by the receiving agent j.
    const Eigen::VectorXd& x_stacked() const { return x_; }
    Eigen::VectorXd z_stacked() const;
    Eigen::VectorXd m_stacked() const;
    Eigen::VectorXd mhat_stacked() const;
    void set_x_stacked(const Eigen::Ref<const Eigen::VectorXd>& x);
    void set_z_stacked(const Eigen::Ref<const Eigen::VectorXd>& z);
    void set_m_stacked(const Eigen::Ref<const Eigen::VectorXd>& m);
    void set_mhat_stacked(const Eigen::Ref<const Eigen::VectorXd>& mhat);

    // Largest || mhat_ij - m_ij || over edges (zero in noiseless runs).
    double max_replica_deviation() const;

    // Largest || nominal_message - m_ij || over edges for the current state
    // (error-feedback convergence witness).
    double max_error_feedback_residual() const;

    RoundTrace current_trace() const;  // metrics of the current state

private:
    void check_finite(int t) const;

    Graph graph_;
    std::shared_ptr<const ProblemInstance> problem_;
    RunParams params_;
    int n_;
    int t_ = 0;
    std::uint64_t bits_ = 0;

    Eigen::VectorXd x_;                // N*n stacked
    std::vector<Eigen::VectorXd> z_;   // per pair (i,j): z_ij, dim 2n
    std::vector<Eigen::VectorXd> m_;   // per pair (i,j): m_ij
    // Replica offset per pair: mhat_ij = m_ij + nu_ij.  On clean channels nu
    // stays exactly zero, which keeps the replica bitwise equal to the
    // integrator; channel noise accumulates here.
    std::vector<Eigen::VectorXd> nu_;

    CompressorBank bank_;
    std::vector<std::mt19937_64> noise_streams_;  // per receiving agent

    // scratch reused across rounds
    Eigen::MatrixXd ys_;  // 2n x N, column i = [y_i; s_i]
};

}  // namespace coral

#endif  // CORAL_ENGINE_HPP
