#pragma once

// Measure-weighted differential operators (weighted divergence, its formal
// adjoint, the drift Laplacian, the weighted Lichnerowicz operator) plus the
// entropy report, its first variation, and the named identity-residual scans.

#include <span>
#include <string>

#include "grslab/geometry.hpp"
#include "grslab/quadrature.hpp"

namespace grs {

// ---- operator combinators ------------------------------------------------

// (div_f T)_K = g^{pq} (D_p T_{qK} - (d_p f) T_{qK}); rank drops by one.
TensorField weighted_divergence(TensorField t);
// Formal adjoint of the weighted divergence on 1-forms: -1/2 (D_i w_j + D_j w_i).
TensorField weighted_divergence_adjoint(TensorField w);
// Drift Laplacian on any rank: g^{pq} D_p D_q T - D_{grad f} T.
TensorField drift_laplacian(TensorField t);
// Curvature action on symmetric 2-tensors: (R(h))_ij = R_{piqj} h^{pq}.
TensorField curvature_action(TensorField h);
// Ric + Hess f.
TensorField bakry_emery_ricci_field();
// Ric + Hess f - g/(2 tau): zero exactly on shrinker models.
TensorField soliton_residual_field();
// g^{kl} (A_ik B_lj + B_ik A_lj).
TensorField metric_anticommutator(TensorField a, TensorField b);
// (S(#w, -))_i = S_{ij} g^{jk} w_k for symmetric S.
TensorField one_form_action(TensorField s, TensorField w);
// Full metric contraction <a, b>_g as a rank-0 field.
TensorField inner_product_field(TensorField a, TensorField b);
// g^{ij} h_ij.
TensorField trace_field(TensorField h);
// General form: drift Laplacian + 2 curvature action - (Ric+Hess f) anticommutator.
TensorField weighted_lichnerowicz(TensorField h);
// Shrinker form of the same operator: drift Laplacian + 2 curvature action - h/tau.
TensorField weighted_lichnerowicz_shrinker_form(TensorField h);

// ---- integration and scans -------------------------------------------------

// Weighted-measure integral of a rank-0 field; fixed node order, serial sum.
double integrate_dm(const ManifoldModel& m, const QuadratureGrid& grid, const TensorField& s);
// Plain volume integral of a rank-0 field.
double integrate_dv(const ManifoldModel& m, const QuadratureGrid& grid, const TensorField& s);
// sup over the listed grid nodes of the pointwise metric norm of t.
double sup_field_norm(const ManifoldModel& m, const QuadratureGrid& grid,
                      std::span<const int> nodes, const TensorField& t);

// ---- reports ---------------------------------------------------------------

struct IdentityResidual {
  std::string key;   // stable registry token used in reports
  std::string what;  // human-readable statement of the identity
  double value = 0.0;
  bool skipped = false;
  std::string reason;
};
using IdentityResidualSet = std::vector<IdentityResidual>;

struct EntropyReport {
  double entropy = 0.0;             // W(g, f, tau) over the normalized measure
  double minimizer_residual1 = 0.0; // sup |tau(-2 Lap f + |grad f|^2 - R) - f + n + W|
  double minimizer_residual2 = 0.0; // |int f dm - n/2 - W|
  bool shrinker_exact = true;       // entropy label is exact only for shrinker models
  double shrinker_residual_sup = 0.0;  // sup |Ric + Hess f - g/(2 tau)|_g over scan nodes
};

EntropyReport entropy_report(const ManifoldModel& m, const QuadratureGrid& grid,
                             std::span<const int> check);

// d/ds nu(g + s h) at s = 0: -tau * int <h, Ric + Hess f - g/(2 tau)> dm.
double entropy_first_variation(const ManifoldModel& m, const QuadratureGrid& grid,
                               const TensorField& h);

// The six structural identities of shrinker geometry (refuses approximate
// models).  The additive constant in the potential identity is fit as the
// dm-mean and reported in `what`.
IdentityResidualSet useful_identity_residuals(const ManifoldModel& m, const QuadratureGrid& grid,
                                              std::span<const int> check);

// Commutator identity residuals for the given scalar a, 1-form w, and
// symmetric 2-tensor h.  Shrinker-only entries are skipped (with reason) on
// approximate models; the two general entries hold for any metric and weight.
IdentityResidualSet commutator_residuals(const ManifoldModel& m, const QuadratureGrid& grid,
                                         std::span<const int> check, const TensorField& a,
                                         const TensorField& w, const TensorField& h);

}  // namespace grs
