#include "coral/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace coral {

namespace {

double maxabs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/* Replicates the per-agent mean across all agents: (11^T / N) x. */
Eigen::VectorXd lift_mean(const Eigen::Ref<const Eigen::VectorXd>& x, int n_agents, int dim) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < n_agents; ++i) mean += x.segment(i * dim, dim);
    mean /= static_cast<double>(n_agents);
    Eigen::VectorXd out(x.size());
    for (int i = 0; i < n_agents; ++i) out.segment(i * dim, dim) = mean;
    return out;
}

}  // namespace

double BasisIdentityResiduals::max() const {
    return std::max({ax_b, agrad_b, btpa, bt_invariance, btp_plus_bt, btpb_plus_i});
}

double EquilibriumResiduals::max() const { return std::max(x_identity, grad_identity); }

Eigen::VectorXd stacked_gradient(const ProblemInstance& problem,
                                 const Eigen::Ref<const Eigen::VectorXd>& x) {
    const int N = problem.num_agents();
    const int n = problem.dim();
    if (x.size() != static_cast<Eigen::Index>(N) * n)
        throw std::invalid_argument("stacked_gradient: x has wrong size");
    Eigen::VectorXd g(x.size());
    for (int i = 0; i < N; ++i)
        g.segment(i * n, n) = problem.local_gradient(i, x.segment(i * n, n));
    return g;
}

Eigen::VectorXd stacked_v(const ProblemInstance& problem,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
    const int N = problem.num_agents();
    const int n = problem.dim();
    if (x.size() != static_cast<Eigen::Index>(N) * n)
        throw std::invalid_argument("stacked_v: x has wrong size");
    Eigen::VectorXd v(2 * x.size());
    for (int i = 0; i < N; ++i) {
        v.segment(2 * i * n, n) = x.segment(i * n, n);
        v.segment(2 * i * n + n, n) = problem.local_gradient(i, x.segment(i * n, n));
    }
    return v;
}

AggregateModel build_aggregate(const Graph& graph, int dim, double rho) {
    if (dim < 1) throw std::invalid_argument("build_aggregate: dim must be positive");
    if (!(rho > 0.0)) throw std::invalid_argument("build_aggregate: rho must be positive");
    const int N = graph.num_agents();
    const int dd = graph.total_degree();
    const int rows = 2 * dim * dd;
    // The model materializes dense rows x rows matrices; it is an oracle for
    // small instances, not a simulation path.
    if (rows > 2048) throw std::invalid_argument("build_aggregate: instance too large for the dense oracle");

    AggregateModel model;
    model.rho = rho;
    model.n_agents = N;
    model.dim = dim;
    model.total_degree = dd;
    model.pairs = graph.pairs();

    model.A_x = Eigen::MatrixXd::Zero(rows, N * dim);
    model.A_grad = Eigen::MatrixXd::Zero(rows, N * dim);
    model.A = Eigen::MatrixXd::Zero(rows, 2 * N * dim);
    model.P = Eigen::MatrixXd::Zero(rows, rows);
    model.H = Eigen::MatrixXd::Zero(N * dim, N * dim);
    model.Hcal = Eigen::MatrixXd::Zero(2 * N * dim, 2 * N * dim);

    for (int k = 0; k < dd; ++k) {
        const int i = model.pairs[k].first;
        const int r = 2 * dim * k;
        model.A_x.block(r, i * dim, dim, dim).setIdentity();
        model.A_grad.block(r + dim, i * dim, dim, dim).setIdentity();
        model.A.block(r, 2 * i * dim, 2 * dim, 2 * dim).setIdentity();
        const int rev = graph.reverse_index(k);
        model.P.block(r, 2 * dim * rev, 2 * dim, 2 * dim).setIdentity();
    }
    for (int i = 0; i < N; ++i) {
        const double h = 1.0 / (1.0 + rho * graph.degree(i));
        model.H.block(i * dim, i * dim, dim, dim) =
            h * Eigen::MatrixXd::Identity(dim, dim);
        model.Hcal.block(2 * i * dim, 2 * i * dim, 2 * dim, 2 * dim) =
            h * Eigen::MatrixXd::Identity(2 * dim, 2 * dim);
    }
    return model;
}

Eigen::MatrixXd edge_operator(const AggregateModel& model) {
    const Eigen::Index rows = model.P.rows();
    return model.P * (2.0 * model.rho * model.A * model.Hcal * model.A.transpose() -
                      Eigen::MatrixXd::Identity(rows, rows));
}

ConsensusBasis compute_basis(const AggregateModel& model, double tol) {
    const Eigen::MatrixXd T = edge_operator(model);
    const Eigen::Index rows = T.rows();

    // Fixed directions of the iteration satisfy T^t v = v; the singular
    // value decomposition of T^t - I exposes them as the null space.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        T.transpose() - Eigen::MatrixXd::Identity(rows, rows),
        Eigen::ComputeFullU | Eigen::ComputeFullV);
    int b = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) < tol) ++b;
    if (b == 0)
        throw StructuralError(
            "compute_basis: the edge-state operator has no unit eigenvalue; the "
            "consensus subspace is trivial (this happens on tree topologies)");

    // Algebraic multiplicity of the unit eigenvalue must match the null-space
    // dimension, otherwise a defective (Jordan) block is present.
    Eigen::EigenSolver<Eigen::MatrixXd> es(T);
    int algebraic = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0)) < tol) ++algebraic;
    if (algebraic != b)
        throw StructuralError("compute_basis: unit eigenvalue is defective (algebraic " +
                              std::to_string(algebraic) + " vs geometric " + std::to_string(b) +
                              ")");

    ConsensusBasis basis;
    basis.b = b;
    basis.p = static_cast<int>(rows) - b;
    basis.B = svd.matrixV().rightCols(b);
    basis.M = svd.matrixV().leftCols(basis.p);
    basis.R_perp = basis.M.transpose() * T * basis.M;

    Eigen::EigenSolver<Eigen::MatrixXd> er(basis.R_perp);
    double spr = 0.0;
    for (Eigen::Index i = 0; i < er.eigenvalues().size(); ++i)
        spr = std::max(spr, std::abs(er.eigenvalues()(i)));
    basis.spectral_radius = spr;

    Eigen::JacobiSVD<Eigen::MatrixXd> inv_check(
        Eigen::MatrixXd::Identity(basis.p, basis.p) - basis.R_perp);
    basis.sigma_min_i_minus_r = inv_check.singularValues().minCoeff();
    return basis;
}

BasisIdentityResiduals basis_identity_residuals(const ConsensusBasis& basis, const AggregateModel& model) {
    const Eigen::MatrixXd T = edge_operator(model);
    const Eigen::Index rows = T.rows();
    const Eigen::MatrixXd Bt = basis.B.transpose();

    BasisIdentityResiduals r;
    r.ax_b = maxabs(model.A_x.transpose() * basis.B);
    r.agrad_b = maxabs(model.A_grad.transpose() * basis.B);
    r.btpa = maxabs(Bt * model.P * model.A);
    r.bt_invariance = maxabs(Bt * (Eigen::MatrixXd::Identity(rows, rows) - T));
    r.btp_plus_bt = maxabs(Bt * model.P + Bt);
    r.btpb_plus_i = maxabs(Bt * model.P * basis.B +
                           Eigen::MatrixXd::Identity(basis.b, basis.b));
    return r;
}

Eigen::VectorXd z_equilibrium(const ConsensusBasis& basis, const AggregateModel& model,
                              const ProblemInstance& problem,
                              const Eigen::Ref<const Eigen::VectorXd>& x) {
    const Eigen::VectorXd rhs = 2.0 * model.rho * basis.M.transpose() * model.P * model.A *
                                model.Hcal * stacked_v(problem, x);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(
        Eigen::MatrixXd::Identity(basis.p, basis.p) - basis.R_perp);
    if (qr.rank() < basis.p)
        throw StructuralError("z_equilibrium: I - R_perp is singular; no unique equilibrium");
    return qr.solve(rhs);
}

EquilibriumResiduals equilibrium_residuals(const ConsensusBasis& basis,
                                           const AggregateModel& model,
                                           const ProblemInstance& problem,
                                           const Eigen::Ref<const Eigen::VectorXd>& x) {
    const Eigen::VectorXd z_eq = z_equilibrium(basis, model, problem, x);
    const Eigen::VectorXd g = stacked_gradient(problem, x);
    const Eigen::VectorXd lifted_x = lift_mean(x, model.n_agents, model.dim);
    const Eigen::VectorXd lifted_g = lift_mean(g, model.n_agents, model.dim);

    EquilibriumResiduals r;
    r.x_identity =
        maxabs(model.H * model.A_x.transpose() * basis.M * z_eq - lifted_x + model.H * x);
    r.grad_identity =
        maxabs(model.H * model.A_grad.transpose() * basis.M * z_eq - lifted_g + model.H * g);
    return r;
}

AggregateState aggregate_step(const AggregateModel& model, const ProblemInstance& problem,
                              const AggregateState& state, const RunParams& params,
                              CompressorBank& bank) {
    if (params.rho != model.rho)
        throw std::invalid_argument("aggregate_step: params.rho disagrees with the model");
    const int two_n = 2 * model.dim;
    if (state.z.size() != static_cast<Eigen::Index>(two_n) * model.total_degree)
        throw std::invalid_argument("aggregate_step: z has wrong size");

    const Eigen::VectorXd g = stacked_gradient(problem, state.x);
    const Eigen::VectorXd v = stacked_v(problem, state.x);

    AggregateState next;
    next.x = state.x +
             params.gamma * (model.H * (state.x + model.A_x.transpose() * state.z) - state.x) -
             params.gamma * params.delta *
                 (model.H * (g + model.A_grad.transpose() * state.z));

    // The compressor acts on the residual of the nominal message against the
    // integrator, pair block by pair block in canonical (sender-major) order.
    const Eigen::VectorXd w = -state.z +
                              2.0 * model.rho * model.A * model.Hcal *
                                  (model.A.transpose() * state.z + v) -
                              state.m;
    Eigen::VectorXd c(state.m.size());
    for (int k = 0; k < model.total_degree; ++k)
        c.segment(two_n * k, two_n) = bank.apply(model.pairs[k].first, w.segment(two_n * k, two_n));

    next.z = (1.0 - params.alpha) * state.z + params.alpha * model.P * state.mhat;
    next.m = state.m + c;
    next.mhat = state.mhat + c;
    return next;
}

TransformedState transform_state(const ConsensusBasis& basis, const AggregateModel& model,
                                 const ProblemInstance& problem, const AggregateState& state) {
    const Eigen::VectorXd v = stacked_v(problem, state.x);
    TransformedState t;
    t.zbar = basis.B.transpose() * state.z;
    t.z_perp = basis.M.transpose() * state.z;
    t.m_tilde = state.m + state.z -
                2.0 * model.rho * model.A * model.Hcal * (model.A.transpose() * state.z + v);
    return t;
}

BoundaryLayerState boundary_layer_step(const ConsensusBasis& basis, const AggregateModel& model,
                                       const BoundaryLayerState& state, double alpha,
                                       CompressorBank& bank) {
    if (state.z_tilde.size() != basis.p)
        throw std::invalid_argument("boundary_layer_step: z_tilde has wrong size");
    const int two_n = 2 * model.dim;
    if (state.m_tilde.size() != static_cast<Eigen::Index>(two_n) * model.total_degree)
        throw std::invalid_argument("boundary_layer_step: m_tilde has wrong size");

    BoundaryLayerState next;
    next.z_tilde = (1.0 - alpha) * state.z_tilde + alpha * basis.R_perp * state.z_tilde +
                   alpha * basis.M.transpose() * model.P * state.m_tilde;

    Eigen::VectorXd c(state.m_tilde.size());
    const Eigen::VectorXd neg_m = -state.m_tilde;
    for (int k = 0; k < model.total_degree; ++k)
        c.segment(two_n * k, two_n) =
            bank.apply(model.pairs[k].first, neg_m.segment(two_n * k, two_n));

    const Eigen::MatrixXd E = 2.0 * model.rho * model.A * model.Hcal * model.A.transpose() -
                              Eigen::MatrixXd::Identity(state.m_tilde.size(), state.m_tilde.size());
    next.m_tilde = state.m_tilde + c - alpha * E * model.P * state.m_tilde -
                   alpha * E * basis.M *
                       ((basis.R_perp - Eigen::MatrixXd::Identity(basis.p, basis.p)) *
                        state.z_tilde);
    return next;
}

Eigen::VectorXd reduced_step(const ProblemInstance& problem,
                             const Eigen::Ref<const Eigen::VectorXd>& x, double gamma,
                             double delta) {
    const int N = problem.num_agents();
    const int n = problem.dim();
    if (x.size() != static_cast<Eigen::Index>(N) * n)
        throw std::invalid_argument("reduced_step: x has wrong size");
    const Eigen::VectorXd g = stacked_gradient(problem, x);
    const Eigen::VectorXd xbar = lift_mean(x, N, n);
    const Eigen::VectorXd gbar = lift_mean(g, N, n);
    return x - gamma * (x - xbar) - gamma * delta * gbar;
}

Eigen::VectorXd zbar_monitor_step(const ConsensusBasis& basis, const AggregateModel& model,
                                  const Eigen::Ref<const Eigen::VectorXd>& zbar,
                                  const Eigen::Ref<const Eigen::VectorXd>& m_tilde,
                                  double alpha) {
    return zbar + alpha * basis.B.transpose() * model.P * m_tilde;
}

Eigen::MatrixXd consensus_complement(int n_agents, int dim) {
    if (n_agents < 2 || dim < 1)
        throw std::invalid_argument("consensus_complement: need N >= 2 and dim >= 1");

    static std::mutex cache_mutex;
    static std::map<std::pair<int, int>, Eigen::MatrixXd> cache;
    std::lock_guard<std::mutex> lock(cache_mutex);
    const auto key = std::make_pair(n_agents, dim);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    // Householder reflection sending e_1 to 1/sqrt(N); the remaining columns
    // form an orthonormal basis of the complement of the consensus direction.
    Eigen::VectorXd w = -Eigen::VectorXd::Ones(n_agents) / std::sqrt(double(n_agents));
    w(0) += 1.0;
    w.normalize();
    const Eigen::MatrixXd house =
        Eigen::MatrixXd::Identity(n_agents, n_agents) - 2.0 * w * w.transpose();

    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n_agents * dim, (n_agents - 1) * dim);
    for (int i = 0; i < n_agents; ++i)
        for (int c = 1; c < n_agents; ++c)
            R.block(i * dim, (c - 1) * dim, dim, dim) =
                house(i, c) * Eigen::MatrixXd::Identity(dim, dim);
    cache[key] = R;
    return R;
}

double phi(const ProblemInstance& problem, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const int N = problem.num_agents();
    const Eigen::VectorXd mean = mean_iterate(problem, x);
    const double grad_sq = problem.total_gradient(mean).squaredNorm();
    const Eigen::VectorXd dev = x - lift_mean(x, N, problem.dim());
    return std::sqrt(static_cast<double>(N) * grad_sq + dev.squaredNorm());
}

double lyapunov_U(const Eigen::Ref<const Eigen::VectorXd>& z_tilde,
                  const Eigen::Ref<const Eigen::VectorXd>& m_tilde) {
    return z_tilde.squaredNorm() + m_tilde.squaredNorm();
}

double lyapunov_W(const ProblemInstance& problem, const Eigen::Ref<const Eigen::VectorXd>& x,
                  double kappa, double f_star) {
    if (!(kappa > 0.0)) throw std::invalid_argument("lyapunov_W: kappa must be positive");
    const Eigen::VectorXd mean = mean_iterate(problem, x);
    const Eigen::VectorXd dev = x - lift_mean(x, problem.num_agents(), problem.dim());
    return problem.total_cost(mean) - f_star + 0.5 * kappa * dev.squaredNorm();
}

}  // namespace coral
