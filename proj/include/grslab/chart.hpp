#pragma once

#include <vector>

namespace grs {

// One coordinate axis of a product-box chart.  `polar_density` is the exponent
// k such that the reference volume density carries a factor sin^k(x) on this
// axis; the quadrature absorbs that factor with a weight-matched Gauss rule so
// no node ever sits at a pole.
struct AxisSpec {
  double lo = 0.0;
  double hi = 1.0;
  bool periodic = false;
  int polar_density = 0;
  double length() const { return hi - lo; }
};

struct CoordinateChart {
  std::vector<AxisSpec> axes;
  double collar = 0.02;  // interior margin, fraction of axis length, non-periodic axes
  int dim() const { return static_cast<int>(axes.size()); }
};

using Point = std::vector<double>;

}  // namespace grs
