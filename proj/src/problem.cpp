#include "coral/problem.hpp"

#include <cmath>
#include <stdexcept>

#include "coral/rng.hpp"

namespace coral {

namespace {

// log(1 + exp(w)) without overflow for large |w|.
double log1p_exp(double w) {
    if (w > 0.0) return w + std::log1p(std::exp(-w));
    return std::log1p(std::exp(w));
}

// Logistic sigma(w) = 1 / (1 + exp(-w)), stable on both tails.
double sigmoid(double w) {
    if (w >= 0.0) return 1.0 / (1.0 + std::exp(-w));
    const double e = std::exp(w);
    return e / (1.0 + e);
}

}  // namespace

double ProblemInstance::total_cost(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    double c = 0.0;
    for (int i = 0; i < num_agents(); ++i) c += local_cost(i, x);
    return c;
}

Eigen::VectorXd ProblemInstance::total_gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
    for (int i = 0; i < num_agents(); ++i) g += local_gradient(i, x);
    return g;
}

QuadraticProblem::QuadraticProblem(std::vector<Eigen::VectorXd> targets)
    : targets_(std::move(targets)) {
    if (targets_.empty()) throw std::invalid_argument("quadratic: no targets");
    for (const auto& t : targets_)
        if (t.size() != targets_[0].size())
            throw std::invalid_argument("quadratic: target dimension mismatch");
}

double QuadraticProblem::local_cost(int agent, const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return 0.5 * (x - targets_[agent]).squaredNorm();
}

Eigen::VectorXd QuadraticProblem::local_gradient(
    int agent, const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return x - targets_[agent];
}

Eigen::VectorXd QuadraticProblem::minimizer() const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim());
    for (const auto& t : targets_) m += t;
    return m / static_cast<double>(targets_.size());
}

double QuadraticProblem::minimum_value() const {
    const Eigen::VectorXd xs = minimizer();
    double f = 0.0;
    for (const auto& t : targets_) f += 0.5 * (xs - t).squaredNorm();
    return f;
}

ClassificationProblem::ClassificationProblem(std::vector<Eigen::MatrixXd> features,
                                             std::vector<Eigen::VectorXd> labels, double reg_eps)
    : features_(std::move(features)), labels_(std::move(labels)), reg_eps_(reg_eps) {
    if (features_.empty() || features_.size() != labels_.size())
        throw std::invalid_argument("classification: feature/label agent count mismatch");
    if (reg_eps_ <= 0.0) throw std::invalid_argument("classification: reg_eps must be positive");
    double max_row = 0.0;
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i].rows() != labels_[i].size() || features_[i].rows() < 1)
            throw std::invalid_argument("classification: sample count mismatch");
        if (features_[i].cols() != features_[0].cols())
            throw std::invalid_argument("classification: feature dimension mismatch");
        for (int h = 0; h < labels_[i].size(); ++h)
            if (labels_[i][h] != 1.0 && labels_[i][h] != -1.0)
                throw std::invalid_argument("classification: labels must be exactly +-1");
        max_row = std::max(max_row,
                           features_[i].squaredNorm() / static_cast<double>(features_[i].rows()));
    }
    // Logistic curvature bound (1/m_i) sum_h ||a_{i,h}||^2 / 4 plus the
    // regularizer curvature bound 2 eps (the per-agent share is eps/N and the
    // coordinate-wise curvature of x^2/(1+x^2) never exceeds 2).
    lipschitz_ = max_row / 4.0 + 2.0 * reg_eps_;
}

double ClassificationProblem::local_cost(int agent,
                                         const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd w = -(labels_[agent].array() * (features_[agent] * x).array()).matrix();
    double c = 0.0;
    for (int h = 0; h < w.size(); ++h) c += log1p_exp(w[h]);
    c /= static_cast<double>(w.size());
    const double n_agents = static_cast<double>(num_agents());
    c += (reg_eps_ / n_agents) * (x.array().square() / (1.0 + x.array().square())).sum();
    return c;
}

Eigen::VectorXd ClassificationProblem::local_gradient(
    int agent, const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::MatrixXd& A = features_[agent];
    const Eigen::VectorXd& b = labels_[agent];
    Eigen::VectorXd w = -(b.array() * (A * x).array()).matrix();
    for (int h = 0; h < w.size(); ++h) w[h] = sigmoid(w[h]);
    Eigen::VectorXd g = A.transpose() * (-(b.array() * w.array()).matrix());
    g /= static_cast<double>(b.size());
    const double n_agents = static_cast<double>(num_agents());
    const Eigen::ArrayXd xa = x.array();
    g.array() += (reg_eps_ / n_agents) * 2.0 * xa / (1.0 + xa.square()).square();
    return g;
}

std::shared_ptr<QuadraticProblem> quadratic_problem(std::vector<Eigen::VectorXd> targets) {
    return std::make_shared<QuadraticProblem>(std::move(targets));
}

std::shared_ptr<QuadraticProblem> random_quadratic_problem(int n_agents, int dim,
                                                           std::uint64_t seed) {
    if (n_agents < 1 || dim < 1)
        throw std::invalid_argument("random_quadratic_problem: bad sizes");
    std::mt19937_64 gen = make_stream(seed, StreamPurpose::data);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::VectorXd> targets(n_agents);
    for (int i = 0; i < n_agents; ++i) {
        targets[i].resize(dim);
        for (int l = 0; l < dim; ++l) targets[i][l] = gauss(gen);
    }
    return quadratic_problem(std::move(targets));
}

std::shared_ptr<ClassificationProblem> generate_classification(int n_agents, int dim,
                                                               int samples_per_agent,
                                                               double reg_eps, std::uint64_t seed,
                                                               double cluster_scale) {
    if (n_agents < 1 || dim < 1 || samples_per_agent < 1)
        throw std::invalid_argument("generate_classification: sizes must be positive");
    if (reg_eps <= 0.0) throw std::invalid_argument("generate_classification: reg_eps <= 0");
    if (cluster_scale <= 0.0)
        throw std::invalid_argument("generate_classification: cluster_scale <= 0");

    std::mt19937_64 gen = make_stream(seed, StreamPurpose::data);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Eigen::VectorXd mu(dim);
    for (int l = 0; l < dim; ++l) mu[l] = gauss(gen);
    mu *= cluster_scale / mu.norm();

    const double flip_prob = 0.02;
    std::vector<Eigen::MatrixXd> features(n_agents);
    std::vector<Eigen::VectorXd> labels(n_agents);
    for (int i = 0; i < n_agents; ++i) {
        features[i].resize(samples_per_agent, dim);
        labels[i].resize(samples_per_agent);
        for (int h = 0; h < samples_per_agent; ++h) {
            const double cluster = unif(gen) < 0.5 ? -1.0 : 1.0;
            for (int l = 0; l < dim; ++l) features[i](h, l) = cluster * mu[l] + gauss(gen);
            labels[i][h] = unif(gen) < flip_prob ? -cluster : cluster;
        }
    }
    return std::make_shared<ClassificationProblem>(std::move(features), std::move(labels),
                                                   reg_eps);
}

Eigen::VectorXd mean_iterate(const ProblemInstance& problem,
                             const Eigen::Ref<const Eigen::VectorXd>& x_stacked) {
    const int N = problem.num_agents(), n = problem.dim();
    if (x_stacked.size() != static_cast<Eigen::Index>(N) * n)
        throw std::invalid_argument("mean_iterate: stacked state has wrong size");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < N; ++i) mean += x_stacked.segment(i * n, n);
    return mean / static_cast<double>(N);
}

double grad_norm_at_mean(const ProblemInstance& problem,
                         const Eigen::Ref<const Eigen::VectorXd>& x_stacked) {
    return problem.total_gradient(mean_iterate(problem, x_stacked)).norm();
}

double consensus_error(const ProblemInstance& problem,
                       const Eigen::Ref<const Eigen::VectorXd>& x_stacked) {
    const int N = problem.num_agents(), n = problem.dim();
    const Eigen::VectorXd mean = mean_iterate(problem, x_stacked);
    double err2 = 0.0;
    for (int i = 0; i < N; ++i) err2 += (x_stacked.segment(i * n, n) - mean).squaredNorm();
    return std::sqrt(err2);
}

}  // namespace coral
