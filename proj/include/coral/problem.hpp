#ifndef CORAL_PROBLEM_HPP
#define CORAL_PROBLEM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

namespace coral {

// A consensus problem instance: N private smooth local costs f_i over a
// shared decision variable in R^n.  The global cost is f(x) = sum_i f_i(x).
// Instances are immutable; gradient evaluation is pure and reentrant.
class ProblemInstance {
public:
    virtual ~ProblemInstance() = default;

    virtual int num_agents() const = 0;
    virtual int dim() const = 0;

    virtual double local_cost(int agent, const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
    virtual Eigen::VectorXd local_gradient(int agent,
                                           const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;

    // Upper bound on the Lipschitz constant of every local gradient.
    virtual double lipschitz_estimate() const = 0;

    double total_cost(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::VectorXd total_gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

// f_i(x) = 1/2 ||x - theta_i||^2.  Analytic oracle: the unique stationary
// point of the sum is the mean of the targets, gradients are affine, L = 1.
class QuadraticProblem : public ProblemInstance {
public:
    explicit QuadraticProblem(std::vector<Eigen::VectorXd> targets);

    int num_agents() const override { return static_cast<int>(targets_.size()); }
    int dim() const override { return static_cast<int>(targets_[0].size()); }
    double local_cost(int agent, const Eigen::Ref<const Eigen::VectorXd>& x) const override;
    Eigen::VectorXd local_gradient(int agent,
                                   const Eigen::Ref<const Eigen::VectorXd>& x) const override;
    double lipschitz_estimate() const override { return 1.0; }

    const Eigen::VectorXd& target(int agent) const { return targets_[agent]; }
    Eigen::VectorXd minimizer() const;       // mean of the targets
    double minimum_value() const;            // f evaluated at the minimizer

private:
    std::vector<Eigen::VectorXd> targets_;
};

// Nonconvex synthetic classification:
//   f_i(x) = (1/m_i) sum_h log(1 + exp(-b_{i,h} a_{i,h}^T x))
//            + (eps/N) sum_l x_l^2 / (1 + x_l^2)
// The nonconvex regularizer is split evenly across agents so the sum of the
// local costs carries the single global regularizer with weight eps.
class ClassificationProblem : public ProblemInstance {
public:
    ClassificationProblem(std::vector<Eigen::MatrixXd> features,
                          std::vector<Eigen::VectorXd> labels, double reg_eps);

    int num_agents() const override { return static_cast<int>(features_.size()); }
    int dim() const override { return static_cast<int>(features_[0].cols()); }
    double local_cost(int agent, const Eigen::Ref<const Eigen::VectorXd>& x) const override;
    Eigen::VectorXd local_gradient(int agent,
                                   const Eigen::Ref<const Eigen::VectorXd>& x) const override;
    double lipschitz_estimate() const override { return lipschitz_; }

    int samples_per_agent(int agent) const { return static_cast<int>(labels_[agent].size()); }
    double reg_eps() const { return reg_eps_; }
    const Eigen::MatrixXd& features(int agent) const { return features_[agent]; }
    const Eigen::VectorXd& labels(int agent) const { return labels_[agent]; }

private:
    std::vector<Eigen::MatrixXd> features_;  // per agent: m_i x n
    std::vector<Eigen::VectorXd> labels_;    // per agent: entries +-1
    double reg_eps_;
    double lipschitz_;
};

std::shared_ptr<QuadraticProblem> quadratic_problem(std::vector<Eigen::VectorXd> targets);

// Random quadratic targets theta_i ~ N(0, I_n) from a dedicated stream.
std::shared_ptr<QuadraticProblem> random_quadratic_problem(int n_agents, int dim,
                                                           std::uint64_t seed);

// Synthetic two-cluster generator.  Features are drawn around +-mu with
// identity covariance, where mu is a random direction of norm cluster_scale;
// labels follow the cluster and are flipped with probability 2%.  The scale
// default is calibrated so the instance difficulty matches the reference
// iteration counts (see README).  Deterministic given the seed.
std::shared_ptr<ClassificationProblem> generate_classification(int n_agents, int dim,
                                                               int samples_per_agent,
                                                               double reg_eps,
                                                               std::uint64_t seed,
                                                               double cluster_scale = 0.5);

// Stacked-state metrics.  x holds the N agent iterates concatenated (N*n).
Eigen::VectorXd mean_iterate(const ProblemInstance& problem,
                             const Eigen::Ref<const Eigen::VectorXd>& x_stacked);
double grad_norm_at_mean(const ProblemInstance& problem,
                         const Eigen::Ref<const Eigen::VectorXd>& x_stacked);
double consensus_error(const ProblemInstance& problem,
                       const Eigen::Ref<const Eigen::VectorXd>& x_stacked);

}  // namespace coral

#endif  // CORAL_PROBLEM_HPP
