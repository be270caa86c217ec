#pragma once

// Covariant tensor calculus on top of the jet substrate: covariant
// derivatives, the standard second-derivative commutator residuals, and the
// field combinators declared in fields.hpp.

#include "grslab/fields.hpp"

namespace grs {

// Covariant derivative of a fully covariant tensor; the derivative index is
// FIRST: (D T)_{i j1..jr} = d_i T_{j1..jr} - sum_a Gamma^s_{i j_a} T_{..s..}.
// `t` may carry any jet order >= order+1; the result carries exactly `order`.
JetTensor covariant_derivative_value(EvalContext& ctx, const JetTensor& t, int order);

// Raise covariant slot `slot` (0-based) with the inverse metric, acting on
// Taylor values only; all tensors must share rank layout and dimension.
std::vector<double> tensor_values(const JetTensor& t);
std::vector<double> raise_slot_values(const JetTensor& ginv, std::vector<double> vals, int dim,
                                      int rank, int slot);

// Pointwise squared norm of a fully covariant tensor in the metric at the
// same point (Taylor values only).
double metric_norm_sq_value(const JetTensor& ginv, const JetTensor& t);

// Field combinators built on the covariant derivative.
TensorField covariant_derivative(TensorField t);
TensorField differential(TensorField a);    // rank 0 -> 1
TensorField hessian(TensorField a);         // rank 0 -> 2, symmetric
TensorField lie_metric(TensorField omega);  // rank 1 -> 2: D_i w_j + D_j w_i
TensorField potential_field();              // the weight exponent as a rank-0 field
TensorField scalar_curvature_field();

// Norm of the second-derivative commutator residual of a covariant field of
// rank 1 or 2 at the context's point:
//   res_{i j K} = D_i D_j T_K - D_j D_i T_K - sum_a R_{i j K_a}{}^s T_{K,a->s}
// measured in the pointwise metric norm.
double commutator_defect(EvalContext& ctx, const TensorField& t);

// Pointwise validation helpers: largest component defect of the expected
// symmetries (metric symmetry; pair antisymmetry/exchange/first-cycle
// identities of the curvature; symmetry of the second fundamental identity
// input, i.e. of the Hessian of a scalar).
double metric_symmetry_defect(EvalContext& ctx);
double curvature_symmetry_defect(EvalContext& ctx);

}  // namespace grs
