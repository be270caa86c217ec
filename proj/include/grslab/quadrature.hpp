#pragma once

// Tensor-product quadrature on a model chart.  Polar axes with reference
// density sin^k(x) are handled with a weight-matched Gauss rule in u = cos(x)
// (weight (1-u^2)^{(k-1)/2}), so the density is integrated exactly and no
// node ever sits on a pole.  Periodic axes use the uniform midpoint rule,
// which is exact for trigonometric polynomials below the node count.

#include <vector>

#include "grslab/model.hpp"

namespace grs {

struct AxisRule {
  std::vector<double> nodes;    // coordinates on the axis, ascending
  std::vector<double> weights;  // include the axis reference density factor
};

// Gauss nodes/weights for the weight (1-u^2)^alpha on (-1,1), alpha > -1.
// Nodes are symmetrized about 0 and returned ascending.
void gauss_gegenbauer(int npts, double alpha, std::vector<double>& nodes,
                      std::vector<double>& weights);

AxisRule axis_rule(const AxisSpec& axis, int npts);

struct QuadratureGrid {
  std::vector<Point> nodes;
  std::vector<double> dv_weight;  // Riemannian volume weights
  std::vector<double> dm_weight;  // weighted-measure weights, normalized to sum to 1
  double raw_dm_defect = 0.0;     // |sum of raw weighted-measure weights - 1|
  double volume = 0.0;            // sum of dv weights
  std::vector<int> per_axis;
  int size() const { return static_cast<int>(nodes.size()); }
};

// Build the product grid and evaluate the volume and weighted-measure weights
// at every node.  Throws BuildError if the metric fails to be symmetric
// positive definite at any node.
QuadratureGrid build_grid(const ManifoldModel& m, const std::vector<int>& per_axis);

// Deterministic strided subset of grid node indices for pointwise residual
// scans: strictly inside the interior collar (plus the stencil margin on
// finite-difference models), at most max_count entries.
std::vector<int> check_nodes(const ManifoldModel& m, const QuadratureGrid& grid, int max_count);

}  // namespace grs
