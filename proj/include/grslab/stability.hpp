#pragma once
// Second-variation machinery for the weighted entropy on an exact shrinker
// model: the divergence-potential solve, the stability operator N (applied to
// fields and assembled over the tensor Galerkin basis), the quadratic form it
// induces, the gauge-sector identity chain, and the eigenvalue-based
// necessary/sufficient stability criteria with their consistency relation.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <string>
#include <vector>

#include "grslab/galerkin.hpp"
#include "grslab/weighted.hpp"

namespace grs {

// Solution of (drift Laplacian + 1/(2 tau)) u = div_w div_w h on the
// mean-zero scalar Galerkin space.
struct PotentialSolve {
  TensorField field;       // the solved scalar as a field
  Eigen::VectorXd coef;    // coefficients over the scalar basis (entry 0 zero)
  double rhs_norm = 0.0;   // L2(dm) size of the source seen by the basis
  double residual = 0.0;   // L2(dm) norm of the pointwise equation defect
  double mean = 0.0;       // dm-mean of the solution
};

PotentialSolve solve_divergence_potential(const ManifoldModel& m, const QuadratureGrid& grid,
                                          const ScalarSystem& scalars, const TensorField& h,
                                          ExecPolicy policy = ExecPolicy::Serial);

// One application of the stability operator to a symmetric 2-tensor field.
struct OperatorApplication {
  TensorField field;  // N(h)
  PotentialSolve potential;
  double ricci_pairing = 0.0;       // integral of <Ric, h> dm
  double curvature_integral = 0.0;  // integral of R dm
};

OperatorApplication stability_operator_apply(const ManifoldModel& m, const QuadratureGrid& grid,
                                             const ScalarSystem& scalars, const TensorField& h,
                                             ExecPolicy policy = ExecPolicy::Serial);

// Second variation of the weighted entropy in direction h: the quadrature of
// <h, N(h)> dm.
double second_variation(const ManifoldModel& m, const QuadratureGrid& grid,
                        const ScalarSystem& scalars, const TensorField& h,
                        ExecPolicy policy = ExecPolicy::Serial);

// Gauge-sector identity chain for a one-form test field: the divergence of a
// symmetrized Lie derivative of the metric, its three corollaries, and the
// vanishing of N on the image sector (keys T4.1, C4.2, L4.3, L4.4, T4.5).
IdentityResidualSet image_kernel_residuals(const ManifoldModel& m, const QuadratureGrid& grid,
                                           const ScalarSystem& scalars, const TensorField& omega,
                                           std::span<const int> check,
                                           ExecPolicy policy = ExecPolicy::Serial);

// Tolerances used by the eigenvalue-based criteria.
struct StabilityTolerances {
  double cluster_rel = 1e-6;   // eigenvalue clustering, relative to spectral radius
  double match_rel = 1e-6;     // transversal classification |mu - lambda|
  double scan_gap = 1e-6;      // lambda must exceed -1/(2 tau) by this to be scanned
  double unstable = 1e-6;      // second variation above this certifies instability
  double pair_rel = 1e-6;      // relative agreement of the two second-variation paths
  double kernel_sup = 1e-6;    // |N v| bound for image-sector members
  double stable_slack = 1e-6;  // slack on the sufficient bound -1/tau
};

// Both Galerkin systems plus everything derived from them that the criteria
// share: the mean-zero scalar solve operator and the assembled N matrix.
struct StabilitySystem {
  ScalarSystem scalars;  // degree cap L + 2
  TensorSystem tensors;
  Eigen::MatrixXd k_matrix;  // mean-zero scalar block of (drift op + 1/(2 tau))
  Eigen::MatrixXd n_matrix;  // stability operator over the tensor basis
  double n_assembly_defect = 0.0;  // asymmetry of the N matrix before symmetrization
  double k_top = 0.0;              // largest eigenvalue of k_matrix (negative)
  double tau = 0.0;
};

StabilitySystem assemble_stability_system(const ManifoldModel& m, const QuadratureGrid& grid,
                                          int L, ExecPolicy policy = ExecPolicy::Serial);

// Necessary-criterion scan: every non-Ricci joint eigendirection with
// Lichnerowicz eigenvalue above -1/(2 tau) is evaluated through the second
// variation twice (direct quadrature and the eigenvalue closed form), with
// the divergence cross-checks the eigenvalue argument predicts.
struct ScanRow {
  double lambda = 0.0;
  double mu = 0.0;
  Eigen::VectorXd direction;  // coefficients over the tensor basis, rescaled
  double scale = 0.0;         // rescaling applied to the unit eigenvector
  double nu2_direct = 0.0;
  double nu2_closed = 0.0;
  double pair_gap_rel = 0.0;    // |direct - closed| / max(|closed|, 1e-12)
  double divdiv_norm = 0.0;     // |div div h| seen by the scalar basis
  double potential_norm = 0.0;  // |upsilon_h| over the scalar basis
  double ric_pairing = 0.0;     // integral of <Ric, h> dm (matrix level)
  bool unstable = false;
  std::string tag;
};

struct ScanReport {
  std::vector<ScanRow> rows;
  bool any_unstable = false;
  double bound = 0.0;  // -1/(2 tau)
};

ScanReport necessary_condition_scan(const ManifoldModel& m, const QuadratureGrid& grid,
                                    const StabilitySystem& sys, const StabilityTolerances& tol,
                                    ExecPolicy policy = ExecPolicy::Serial);

// Sufficient-criterion check over the clustered joint eigenbasis: classifies
// members, verifies the image sector is annihilated by N, and compares the
// deflated transversal spectrum against -1/tau.
struct SufficiencyReport {
  std::string verdict;  // "stable (sufficient, L=k)" | "inconclusive (gap)" |
                        // "inconclusive (truncation)"
  std::vector<JointMember> members;
  std::vector<double> n_action;        // |N v| per member (matrix level)
  double max_image_n_action = 0.0;     // over image-sector members
  double max_transversal_div = 0.0;    // |div h| over transversal members
  double commutation = 0.0;            // commutator size of the two matrices
  std::vector<double> offending;       // deflated transversal eigenvalues above the bound
  double bound = 0.0;                  // -1/tau
};

SufficiencyReport sufficient_condition_check(const StabilitySystem& sys,
                                             const StabilityTolerances& tol);

// Consistency relation for eigenpairs of N with nonzero eigenvalue: each must
// be a Lichnerowicz eigentensor with eigenvalue 2(lambda_N - 1/(2 tau)), and
// its image under N must be divergence-free.
struct RelationRow {
  double n_eigenvalue = 0.0;
  double relation_residual = 0.0;  // |A w - 2(lambda_N - 1/(2 tau)) w|
  double div_n_norm = 0.0;         // |div_w N(h)| through the divergence Gram
  std::string tag;
};

std::vector<RelationRow> n_eigentensor_relation(const StabilitySystem& sys, double select_tol);

}  // namespace grs
