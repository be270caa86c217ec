#pragma once
// Polynomial Galerkin systems on a model chart: ambient-monomial scalar
// bases, symmetric 2-tensor generator families, Gram-space
// orthonormalization, deterministic quadrature assembly of the weighted
// operator matrices, and the clustered joint eigenbasis of the two commuting
// operators used by the stability analysis.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "grslab/fields.hpp"
#include "grslab/kernels.hpp"
#include "grslab/model.hpp"
#include "grslab/quadrature.hpp"

namespace grs {

// A family of raw (not yet orthonormal) fields with bookkeeping.
struct FieldFamily {
  std::vector<TensorField> fields;
  std::vector<std::string> provenance;  // short construction tag per member
  std::vector<int> degree;              // ambient polynomial degree
  std::vector<char> image_seed;         // member seeded in the image sector
  int count() const { return static_cast<int>(fields.size()); }
};

// Ambient-coordinate monomials of total degree <= degree_cap: the constant
// first, then degree-major, lexicographic within each degree.  Shared
// per-coordinate fields keep per-node evaluations memoized across members.
FieldFamily scalar_monomials(const ManifoldModel& m, int degree_cap);

// Symmetric 2-tensor generator family at truncation level L >= 0, in
// orthonormalization order:
//   1. hessians of monomials of degree 1..L+1 (image-sector seeds),
//   2. symmetrized rotation derivatives of the metric (image-sector seeds;
//      identically zero on round factors, dropped as dependent),
//   3. the factor metrics (the full metric on a single factor),
//   4. monomial multiples of the factor metrics, degree <= L,
//   5. monomial multiples of symmetrized pairs of ambient coordinate
//      differentials, monomial degree <= L-1.
FieldFamily tensor_generators(const ManifoldModel& m, int L);

// One-form test family at level L: monomial multiples of ambient coordinate
// differentials (monomial degree <= L), differentials of monomials of degree
// <= L+1, and the per-factor ambient rotation generators.
FieldFamily one_form_family(const ManifoldModel& m, int L);

// Orthonormal basis produced by modified Gram-Schmidt in coefficient space
// against a quadrature Gram matrix.  Column j of `coef` expresses basis
// member j over the raw family; rows outside `kept` are zero, so assembly
// passes only ever evaluate the kept raw members.
struct OrthoBasis {
  std::vector<int> kept;                // pivot raw index of each basis member
  Eigen::MatrixXd coef;                 // raw count x basis count
  std::vector<std::string> provenance;  // pivot tag per basis member
  std::vector<char> image_seed;         // pivot seed flag per basis member
  std::vector<std::string> dropped;     // tags of members dropped as dependent
  int count() const { return static_cast<int>(kept.size()); }
};

// Two-pass modified Gram-Schmidt (each candidate is re-orthogonalized once)
// with relative drop tolerance: candidate k is dropped when its residual
// squared norm falls at or below drop_tol * gram(k, k).
OrthoBasis gram_orthonormalize(const Eigen::MatrixXd& gram, const FieldFamily& family,
                               double drop_tol);

// Scalar Galerkin system for the drift Laplacian.
struct ScalarSystem {
  int degree_cap = 0;
  FieldFamily raw;
  OrthoBasis basis;
  Eigen::MatrixXd op_drift;      // <e_i, drift Laplacian e_j>, symmetrized
  Eigen::MatrixXd grad_gram;     // <grad e_i, grad e_j>
  double sym_defect = 0.0;       // max-abs asymmetry before symmetrization
  double adjoint_defect = 0.0;   // max-abs of op_drift + grad_gram
  double gram_defect = 0.0;      // max-abs of recomputed Gram minus identity
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns, sign-canonical
  double eigen_residual = 0.0;   // max over pairs of |A v - lambda v|
};

ScalarSystem assemble_scalar_system(const ManifoldModel& m, const QuadratureGrid& grid,
                                    int degree_cap, ExecPolicy policy = ExecPolicy::Serial);

// Tensor Galerkin system for the weighted Lichnerowicz operator and its
// divergence-augmented companion, together with the couplings the stability
// operator needs.  The leak diagnostics bound how far each operator maps the
// basis span outside itself (zero up to quadrature error when the generator
// family is closed under the operators).
struct TensorSystem {
  int L = 0;
  FieldFamily raw;
  OrthoBasis basis;
  Eigen::MatrixXd op_lichnerowicz;  // <e_a, Lichnerowicz e_b>, symmetrized
  Eigen::MatrixXd div_pair_gram;    // <div_w e_a, div_w e_b>
  Eigen::MatrixXd div_scalar_pair;  // <div_w e_a, d s_i> over the scalar basis
  Eigen::VectorXd ricci_coef;       // <Ric, e_a>
  double ricci_norm2 = 0.0;         // integral of |Ric|^2 dm
  double curvature_integral = 0.0;  // integral of R dm
  double sym_defect = 0.0;          // max-abs asymmetry before symmetrization
  double adjoint_defect = 0.0;      // max-abs <e_a, divadj div e_b> - div_pair_gram
  double gram_defect = 0.0;         // max-abs of recomputed Gram minus identity
  double lich_leak_sup = 0.0;       // sup_a |(1 - P) Lich e_a|_dm
  double div_leak_sup = 0.0;        // sup_a |(1 - P) divadj div e_a|_dm
};

TensorSystem assemble_tensor_system(const ManifoldModel& m, const QuadratureGrid& grid,
                                    const ScalarSystem& scalars, int L,
                                    ExecPolicy policy = ExecPolicy::Serial);

// Eigen-decomposition of a symmetric operator matrix over an orthonormal
// basis.  Pairs ascend by eigenvalue; each eigenvector is sign-canonical
// (largest-magnitude entry positive, lowest index on ties); residual is
// |A v - lambda v|_2; the tag names the dominant basis member.
struct SpectralPair {
  double value = 0.0;
  Eigen::VectorXd vec;
  double residual = 0.0;
  std::string tag;
};

std::vector<SpectralPair> symmetric_eigenpairs(const Eigen::MatrixXd& a,
                                               const OrthoBasis& basis);

// First nonzero scalar eigenvalue against the weighted spectral-gap bound
// -1/(2 tau): lambda1 is the top eigenvalue of the mean-zero block, margin =
// bound - lambda1 >= 0 when the gap inequality holds.
struct GapCheck {
  double lambda1 = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  bool pass = false;
};

GapCheck spectral_gap_check(const ScalarSystem& scalars, double tau, double tol);

// Relative commutator size |AB - BA|_F / (|A|_F |B|_F); zero for exactly
// commuting matrices, small up to truncation leakage for Galerkin sections
// of commuting operators.
double commutation_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Joint eigenbasis of the Lichnerowicz matrix A and its divergence-augmented
// companion B = A + div_pair_gram.  Eigenvectors of A are clustered by
// relative gap, B is diagonalized within each cluster, and each member is
// classified: transversal when mu matches lambda (the member commutes out of
// the image sector), image-sector otherwise.  Within each joint (lambda, mu)
// group the direction of the Ricci tensor is deflated into a single marked
// member when the group carries more than half of it.
struct JointMember {
  double lambda = 0.0;       // Lichnerowicz eigenvalue (cluster value)
  double mu = 0.0;           // divergence-augmented eigenvalue
  Eigen::VectorXd vec;       // coefficients over the tensor basis
  bool transversal = false;  // mu == lambda within tolerance
  bool ric_direction = false;
  double ric_overlap = 0.0;  // |<Ric-hat, vec>| over the basis
  std::string tag;
};

std::vector<JointMember> joint_eigenbasis(const TensorSystem& sys, double cluster_rel,
                                          double match_rel);

}  // namespace grs
