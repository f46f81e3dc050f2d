#include "coral/engine.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "coral/rng.hpp"

namespace coral {

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "tracking") return Algorithm::tracking;
    if (s == "coral") return Algorithm::coral;
    throw std::invalid_argument("unknown algorithm: " + s);
}

ZhatVariant zhat_variant_from_string(const std::string& s) {
    if (s == "fresh") return ZhatVariant::fresh;
    if (s == "literal") return ZhatVariant::literal;
    throw std::invalid_argument("unknown zhat variant: " + s);
}

CompressScope compress_scope_from_string(const std::string& s) {
    if (s == "message") return CompressScope::message;
    if (s == "block") return CompressScope::block;
    throw std::invalid_argument("unknown compressor scope: " + s);
}

std::string to_string(Algorithm a) { return a == Algorithm::tracking ? "tracking" : "coral"; }
std::string to_string(ZhatVariant v) { return v == ZhatVariant::fresh ? "fresh" : "literal"; }
std::string to_string(CompressScope s) { return s == CompressScope::message ? "message" : "block"; }

void RunParams::validate(const ProblemInstance& problem) const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("params: gamma must be in (0,1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("params: alpha must be in (0,1)");
    if (!(rho > 0.0)) throw std::invalid_argument("params: rho must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("params: delta must be positive");
    if (T < 0) throw std::invalid_argument("params: T must be nonnegative");
    if (noise_std < 0.0) throw std::invalid_argument("params: noise_std must be nonnegative");
    if (init_std < 0.0) throw std::invalid_argument("params: init_std must be nonnegative");
    if (!(threshold > 0.0)) throw std::invalid_argument("params: threshold must be positive");
    if (log_every < 1) throw std::invalid_argument("params: log_every must be >= 1");
    if (compressor_k < 1) throw std::invalid_argument("params: compressor_k must be >= 1");
    if (algorithm == Algorithm::coral && compressor != CompressorKind::identity) {
        const int cap = (scope == CompressScope::message ? 2 : 1) * problem.dim();
        if (compressor_k > cap)
            throw std::invalid_argument("params: compressor_k exceeds the compressed dimension");
    }
    const double N = static_cast<double>(problem.num_agents());
    const double bound = 2.0 * N / (problem.lipschitz_estimate() * std::sqrt(N));
    if (delta >= bound) {
        std::cerr << "warning: delta = " << delta << " outside the nominal range (0, " << bound
                  << ") for this instance\n";
    }
}

CompressorBank::CompressorBank(CompressorKind kind, int k, CompressScope scope, int n_agents,
                               std::uint64_t master_seed)
    : kind_(kind), scope_(scope) {
    per_agent_.reserve(n_agents);
    for (int i = 0; i < n_agents; ++i)
        per_agent_.emplace_back(kind, k,
                                derive_seed(master_seed, StreamPurpose::compressor,
                                            static_cast<std::uint64_t>(i)));
}

Eigen::VectorXd CompressorBank::apply(int agent,
                                      const Eigen::Ref<const Eigen::VectorXd>& residual) {
    Compressor& comp = per_agent_.at(agent);
    if (scope_ == CompressScope::message) {
        const CompressedMessage msg = comp.compress(residual);
        bits_ += msg.bit_cost();
        return msg.densify();
    }
    const int half = static_cast<int>(residual.size()) / 2;
    const CompressedMessage top = comp.compress(residual.head(half));
    const CompressedMessage bottom = comp.compress(residual.tail(half));
    bits_ += top.bit_cost() + bottom.bit_cost();
    Eigen::VectorXd dense(residual.size());
    dense.head(half) = top.densify();
    dense.tail(half) = bottom.densify();
    return dense;
}

void local_averaging_step(const Eigen::Ref<const Eigen::VectorXd>& x_i,
                          const Eigen::Ref<const Eigen::VectorXd>& grad_i,
                          const std::vector<const Eigen::VectorXd*>& z_edges, double rho,
                          Eigen::Ref<Eigen::VectorXd> y_i, Eigen::Ref<Eigen::VectorXd> s_i) {
    const int n = static_cast<int>(x_i.size());
    Eigen::VectorXd col(2 * n);
    col.head(n) = x_i;
    col.tail(n) = grad_i;
    for (const Eigen::VectorXd* z : z_edges) {
        if (z->size() != 2 * n) throw std::invalid_argument("local_averaging_step: z size");
        col += *z;
    }
    col /= 1.0 + rho * static_cast<double>(z_edges.size());
    y_i = col.head(n);
    s_i = col.tail(n);
}

Eigen::VectorXd solution_update(const Eigen::Ref<const Eigen::VectorXd>& x_i,
                                const Eigen::Ref<const Eigen::VectorXd>& y_i,
                                const Eigen::Ref<const Eigen::VectorXd>& s_i, double gamma,
                                double delta) {
    return x_i + gamma * (y_i - x_i) - gamma * delta * s_i;
}

Eigen::VectorXd nominal_message(const Eigen::Ref<const Eigen::VectorXd>& z_ij,
                                const Eigen::Ref<const Eigen::VectorXd>& y_i,
                                const Eigen::Ref<const Eigen::VectorXd>& s_i, double rho) {
    const int n = static_cast<int>(y_i.size());
    Eigen::VectorXd msg = -z_ij;
    msg.head(n) += 2.0 * rho * y_i;
    msg.tail(n) += 2.0 * rho * s_i;
    return msg;
}

Engine::Engine(Graph graph, std::shared_ptr<const ProblemInstance> problem, RunParams params,
               std::uint64_t master_seed, std::optional<std::uint64_t> compressor_seed)
    : graph_(std::move(graph)),
      problem_(std::move(problem)),
      params_(params),
      n_(problem_->dim()),
      bank_(params.compressor, params.compressor_k, params.scope, graph_.num_agents(),
            compressor_seed.value_or(master_seed)) {
    if (graph_.num_agents() != problem_->num_agents())
        throw std::invalid_argument("engine: graph and problem disagree on agent count");
    params_.validate(*problem_);

    const int N = graph_.num_agents();
    std::mt19937_64 init = make_stream(master_seed, StreamPurpose::init);
    std::normal_distribution<double> gauss(0.0, 1.0);
    x_.resize(static_cast<Eigen::Index>(N) * n_);
    for (Eigen::Index l = 0; l < x_.size(); ++l) x_[l] = params_.init_std * gauss(init);

    const int dd = graph_.total_degree();
    z_.assign(dd, Eigen::VectorXd::Zero(2 * n_));
    m_.assign(dd, Eigen::VectorXd::Zero(2 * n_));
    nu_.assign(dd, Eigen::VectorXd::Zero(2 * n_));

    noise_streams_.reserve(N);
    for (int i = 0; i < N; ++i)
        noise_streams_.push_back(make_stream(master_seed, StreamPurpose::noise,
                                             static_cast<std::uint64_t>(i)));

    ys_.resize(2 * n_, N);
}

RoundTrace Engine::current_trace() const {
    RoundTrace row;
    row.t = t_;
    const Eigen::VectorXd mean = mean_iterate(*problem_, x_);
    row.grad_norm = problem_->total_gradient(mean).norm();
    row.objective = problem_->total_cost(mean);
    row.consensus_err = consensus_error(*problem_, x_);
    row.bits = bits_;
    return row;
}

void Engine::check_finite(int t) const {
    auto bad = [](const Eigen::VectorXd& v) {
        return !v.allFinite() || v.cwiseAbs().maxCoeff() > 1e12;
    };
    if (bad(x_)) throw DivergenceError(t, "engine: solution state diverged at round " + std::to_string(t));
    for (const auto& v : z_)
        if (bad(v)) throw DivergenceError(t, "engine: edge state diverged at round " + std::to_string(t));
}

RoundTrace Engine::step_round() {
    const int N = graph_.num_agents();
    const int dd = graph_.total_degree();
    const auto& pairs = graph_.pairs();

    // Phase 1: per-agent averaging from the pre-round snapshot.
    std::vector<Eigen::VectorXd> zsum(N, Eigen::VectorXd::Zero(2 * n_));
    for (int k = 0; k < dd; ++k) zsum[pairs[k].first] += z_[k];
    for (int i = 0; i < N; ++i) {
        ys_.col(i).head(n_) = x_.segment(i * n_, n_);
        ys_.col(i).tail(n_) = problem_->local_gradient(i, x_.segment(i * n_, n_));
        ys_.col(i) = (ys_.col(i) + zsum[i]) / (1.0 + params_.rho * graph_.degree(i));
    }

    // Phase 2: solution update.
    for (int i = 0; i < N; ++i) {
        x_.segment(i * n_, n_) +=
            params_.gamma * (ys_.col(i).head(n_) - x_.segment(i * n_, n_)) -
            params_.gamma * params_.delta * ys_.col(i).tail(n_);
    }

    // Snapshot for the literal variant, which relaxes z towards the replica
    // value held before this round's message lands.
    std::vector<Eigen::VectorXd> replica_pre;
    if (params_.algorithm == Algorithm::coral && params_.variant == ZhatVariant::literal) {
        replica_pre.resize(dd);
        for (int k = 0; k < dd; ++k) replica_pre[k] = m_[k] + nu_[k];
    }

    // Phase 3: outgoing messages, canonical pair order (agent-major, so each
    // agent's compressor stream is consumed over its edges in neighbor order).
    // The integrator update is written in compensated form,
    //   m' = nominal - (residual - c),
    // algebraically equal to m + c, so that an identity compressor leaves m
    // bitwise equal to the nominal message and the run collapses onto the
    // uncompressed algorithm exactly, not just to rounding error.
    std::vector<Eigen::VectorXd> sent(dd);
    for (int k = 0; k < dd; ++k) {
        const int i = pairs[k].first;
        const Eigen::VectorXd nominal = -z_[k] + 2.0 * params_.rho * ys_.col(i);
        if (params_.algorithm == Algorithm::tracking) {
            sent[k] = nominal;
            bits_ += static_cast<std::uint64_t>(2 * n_) * 64u;
        } else {
            const Eigen::VectorXd residual = nominal - m_[k];
            sent[k] = bank_.apply(i, residual);
            m_[k] = nominal - (residual - sent[k]);
        }
    }
    if (params_.algorithm == Algorithm::coral) bits_ = bank_.bits_accumulated();

    // Phase 4: delivery.  Channel noise is drawn by the receiving agent, in
    // canonical pair order, one sample per densified message component.  For
    // the compressed algorithm the noise accumulates in the replica offset
    // nu = mhat - m, which stays exactly zero on clean channels.
    if (params_.noise_std > 0.0) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int k = 0; k < dd; ++k) {
            std::mt19937_64& stream = noise_streams_[pairs[k].second];
            if (params_.algorithm == Algorithm::tracking) {
                for (int l = 0; l < 2 * n_; ++l) sent[k][l] += params_.noise_std * gauss(stream);
            } else {
                for (int l = 0; l < 2 * n_; ++l) nu_[k][l] += params_.noise_std * gauss(stream);
            }
        }
    }

    // Phase 5: z relaxation.  Agent i relaxes z_ij towards its replica of
    // the neighbor's integrator (or towards the raw received message in the
    // tracking algorithm).
    for (int k = 0; k < dd; ++k) {
        const int rev = graph_.reverse_index(k);
        Eigen::VectorXd target;
        if (params_.algorithm == Algorithm::tracking)
            target = sent[rev];
        else if (params_.variant == ZhatVariant::literal)
            target = replica_pre[rev];
        else
            target = m_[rev] + nu_[rev];
        z_[k] = (1.0 - params_.alpha) * z_[k] + params_.alpha * target;
    }

    ++t_;
    check_finite(t_);
    return current_trace();
}

RunResult Engine::run() {
    RunResult result;
    RoundTrace row = current_trace();
    result.rows.push_back(row);
    result.min_grad_norm = row.grad_norm;
    result.iterations_to_threshold = row.grad_norm < params_.threshold ? 0 : -1;
    for (int t = 1; t <= params_.T; ++t) {
        row = step_round();
        result.min_grad_norm = std::min(result.min_grad_norm, row.grad_norm);
        if (result.iterations_to_threshold < 0 && row.grad_norm < params_.threshold)
            result.iterations_to_threshold = t;
        if (t % params_.log_every == 0) result.rows.push_back(row);
    }
    result.final = row;
    return result;
}

Eigen::VectorXd Engine::z_stacked() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(2 * n_) * graph_.total_degree());
    for (int k = 0; k < graph_.total_degree(); ++k) out.segment(2 * n_ * k, 2 * n_) = z_[k];
    return out;
}

Eigen::VectorXd Engine::m_stacked() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(2 * n_) * graph_.total_degree());
    for (int k = 0; k < graph_.total_degree(); ++k) out.segment(2 * n_ * k, 2 * n_) = m_[k];
    return out;
}

Eigen::VectorXd Engine::mhat_stacked() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(2 * n_) * graph_.total_degree());
    for (int k = 0; k < graph_.total_degree(); ++k)
        out.segment(2 * n_ * k, 2 * n_) = m_[k] + nu_[k];
    return out;
}

void Engine::set_x_stacked(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != x_.size()) throw std::invalid_argument("engine: x size mismatch");
    x_ = x;
}

namespace {
void scatter_pairs(const Eigen::Ref<const Eigen::VectorXd>& stacked, int two_n,
                   std::vector<Eigen::VectorXd>& out) {
    if (stacked.size() != static_cast<Eigen::Index>(two_n) * static_cast<Eigen::Index>(out.size()))
        throw std::invalid_argument("engine: stacked edge state size mismatch");
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = stacked.segment(static_cast<Eigen::Index>(two_n) * k, two_n);
}
}  // namespace

void Engine::set_z_stacked(const Eigen::Ref<const Eigen::VectorXd>& z) { scatter_pairs(z, 2 * n_, z_); }
void Engine::set_m_stacked(const Eigen::Ref<const Eigen::VectorXd>& m) { scatter_pairs(m, 2 * n_, m_); }
void Engine::set_mhat_stacked(const Eigen::Ref<const Eigen::VectorXd>& mhat) {
    scatter_pairs(mhat, 2 * n_, nu_);
    for (int k = 0; k < graph_.total_degree(); ++k) nu_[k] -= m_[k];
}

double Engine::max_replica_deviation() const {
    double worst = 0.0;
    for (int k = 0; k < graph_.total_degree(); ++k) worst = std::max(worst, nu_[k].norm());
    return worst;
}

double Engine::max_error_feedback_residual() const {
    const int N = graph_.num_agents();
    const int dd = graph_.total_degree();
    const auto& pairs = graph_.pairs();
    std::vector<Eigen::VectorXd> zsum(N, Eigen::VectorXd::Zero(2 * n_));
    for (int k = 0; k < dd; ++k) zsum[pairs[k].first] += z_[k];
    Eigen::MatrixXd ys(2 * n_, N);
    for (int i = 0; i < N; ++i) {
        ys.col(i).head(n_) = x_.segment(i * n_, n_);
        ys.col(i).tail(n_) = problem_->local_gradient(i, x_.segment(i * n_, n_));
        ys.col(i) = (ys.col(i) + zsum[i]) / (1.0 + params_.rho * graph_.degree(i));
    }
    double worst = 0.0;
    for (int k = 0; k < dd; ++k) {
        const int i = pairs[k].first;
        worst = std::max(worst, (-z_[k] + 2.0 * params_.rho * ys.col(i) - m_[k]).norm());
    }
    return worst;
}

}  // namespace coral
