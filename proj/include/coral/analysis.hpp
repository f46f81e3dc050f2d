#ifndef CORAL_ANALYSIS_HPP
#define CORAL_ANALYSIS_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coral/engine.hpp"
#include "coral/graph.hpp"
#include "coral/problem.hpp"

namespace coral {

// Raised when a structural assumption about the aggregate model fails (no
// consensus subspace, defective unit eigenvalue, singular solve).
class StructuralError : public std::runtime_error {
public:
    explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

// Dense matrices of the aggregate reformulation of the edge-message
// dynamics, assembled under the canonical directed-pair ordering.  Each pair
// block has dimension 2n and holds the interleaved [y-part; s-part] layout
// used by the engine.
struct AggregateModel {
    Eigen::MatrixXd A_x;     // 2n dd x Nn, selects x-halves of sender blocks
    Eigen::MatrixXd A_grad;  // 2n dd x Nn, selects gradient-halves
    Eigen::MatrixXd A;       // 2n dd x 2Nn, lifts per-agent [y;s] to pair slots
    Eigen::MatrixXd H;       // Nn x Nn, diag 1/(1+rho d_i)
    Eigen::MatrixXd Hcal;    // 2Nn x 2Nn, same scaling on interleaved blocks
    Eigen::MatrixXd P;       // 2n dd x 2n dd, swaps pair blocks (i,j) <-> (j,i)
    double rho = 0.0;
    int n_agents = 0;
    int dim = 0;             // per-agent dimension n
    int total_degree = 0;    // number of directed pairs
    std::vector<std::pair<int, int>> pairs;  // canonical order, for compressor routing
};

// Orthonormal split of the edge-state space into the consensus subspace
// (columns of B, fixed by the edge-state iteration map) and its complement
// (columns of M).  R_perp is the iteration map restricted to the complement.
struct ConsensusBasis {
    Eigen::MatrixXd B;       // 2n dd x b
    Eigen::MatrixXd M;       // 2n dd x p
    Eigen::MatrixXd R_perp;  // p x p complement-restricted iteration map
    int b = 0;
    int p = 0;
    double spectral_radius = 0.0;       // of R_perp
    double sigma_min_i_minus_r = 0.0;   // smallest singular value of I - R_perp
};

struct BasisIdentityResiduals {
    double ax_b = 0.0;            // || A_x^T B ||_max
    double agrad_b = 0.0;         // || A_grad^T B ||_max
    double btpa = 0.0;            // || B^T P A ||_max
    double bt_invariance = 0.0;   // || B^T (I + P - 2 rho P A Hcal A^T) ||_max
    double btp_plus_bt = 0.0;     // || B^T P + B^T ||_max
    double btpb_plus_i = 0.0;     // || B^T P B + I ||_max
    double max() const;
};

struct EquilibriumResiduals {
    double x_identity = 0.0;     // || H A_x^T M z_eq - (11^T/N) x + H x ||_max
    double grad_identity = 0.0;  // same with stacked gradients
    double max() const;
};

// Full stacked state of the aggregate dynamics.
struct AggregateState {
    Eigen::VectorXd x;     // Nn
    Eigen::VectorXd z;     // 2n dd
    Eigen::VectorXd m;     // 2n dd
    Eigen::VectorXd mhat;  // 2n dd
};

// Edge-state coordinates after the consensus split.
struct TransformedState {
    Eigen::VectorXd zbar;     // b, inert consensus coordinate
    Eigen::VectorXd z_perp;   // p
    Eigen::VectorXd m_tilde;  // 2n dd, integrator error off the nominal message
};

// Fast-subsystem state in equilibrium-centred coordinates.
struct BoundaryLayerState {
    Eigen::VectorXd z_tilde;  // p
    Eigen::VectorXd m_tilde;  // 2n dd
};

// Stacked per-agent gradients col(grad f_i(x_i)).
Eigen::VectorXd stacked_gradient(const ProblemInstance& problem,
                                 const Eigen::Ref<const Eigen::VectorXd>& x);

// Stacked per-agent pairs col(col(x_i, grad f_i(x_i))).
Eigen::VectorXd stacked_v(const ProblemInstance& problem,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

AggregateModel build_aggregate(const Graph& graph, int dim, double rho);

// The linear map driving the uncompressed edge-state iteration,
// -P + 2 rho P A Hcal A^T.  Its unit eigenspace is the consensus subspace.
Eigen::MatrixXd edge_operator(const AggregateModel& model);

// Splits the edge-state space.  Throws StructuralError when the operator has
// no unit eigenvalue (tree topologies: the consensus subspace is trivial) or
// when the unit eigenvalue is defective.
ConsensusBasis compute_basis(const AggregateModel& model, double tol = 1e-9);

BasisIdentityResiduals basis_identity_residuals(const ConsensusBasis& basis,
                                                const AggregateModel& model);

// Equilibrium of the complement coordinate at frozen x: solves
// (I - R_perp) z = 2 rho M^T P A Hcal v(x).
Eigen::VectorXd z_equilibrium(const ConsensusBasis& basis, const AggregateModel& model,
                              const ProblemInstance& problem,
                              const Eigen::Ref<const Eigen::VectorXd>& x);

EquilibriumResiduals equilibrium_residuals(const ConsensusBasis& basis,
                                           const AggregateModel& model,
                                           const ProblemInstance& problem,
                                           const Eigen::Ref<const Eigen::VectorXd>& x);

// One exact step of the aggregate dynamics (the z relaxation reads the
// pre-update replica, matching the literal engine variant).  The compressor
// bank supplies the per-sender sample path; sharing a seed with an engine
// run makes the two trajectories comparable draw for draw.
AggregateState aggregate_step(const AggregateModel& model, const ProblemInstance& problem,
                              const AggregateState& state, const RunParams& params,
                              CompressorBank& bank);

// Change of coordinates (z, m) -> (zbar, z_perp, m_tilde) at the given x.
TransformedState transform_state(const ConsensusBasis& basis, const AggregateModel& model,
                                 const ProblemInstance& problem, const AggregateState& state);

// One step of the fast subsystem at frozen slow state, in error coordinates.
BoundaryLayerState boundary_layer_step(const ConsensusBasis& basis, const AggregateModel& model,
                                       const BoundaryLayerState& state, double alpha,
                                       CompressorBank& bank);

// Slow subsystem on the equilibrium manifold:
// x' = x - gamma (I - 11^T/N) x - (gamma delta / N) 11^T G(x).
Eigen::VectorXd reduced_step(const ProblemInstance& problem,
                             const Eigen::Ref<const Eigen::VectorXd>& x, double gamma,
                             double delta);

// Monitor for the inert consensus coordinate: zbar' = zbar + alpha B^T P m_tilde.
Eigen::VectorXd zbar_monitor_step(const ConsensusBasis& basis, const AggregateModel& model,
                                  const Eigen::Ref<const Eigen::VectorXd>& zbar,
                                  const Eigen::Ref<const Eigen::VectorXd>& m_tilde, double alpha);

// Deterministic orthonormal complement of the consensus direction:
// R in R^{Nn x (N-1)n} with R^T (1 kron I_n) = 0 and R^T R = I, built from a
// Householder reflection and lifted by the identity.
Eigen::MatrixXd consensus_complement(int n_agents, int dim);

// phi(x) = sqrt( N || grad f(xbar) ||^2 + || x - 1 xbar ||^2 ); zero exactly
// on consensual stationary points.
double phi(const ProblemInstance& problem, const Eigen::Ref<const Eigen::VectorXd>& x);

// U(z_tilde, m_tilde) = ||z_tilde||^2 + ||m_tilde||^2.
double lyapunov_U(const Eigen::Ref<const Eigen::VectorXd>& z_tilde,
                  const Eigen::Ref<const Eigen::VectorXd>& m_tilde);

// W(x) = f(xbar) - f_star + (kappa/2) || x - 1 xbar ||^2.
double lyapunov_W(const ProblemInstance& problem, const Eigen::Ref<const Eigen::VectorXd>& x,
                  double kappa, double f_star);

}  // namespace coral

#endif  // CORAL_ANALYSIS_HPP
