#pragma once

// Model manifold: a single product-box chart, a metric map, a potential f,
// and the scale tau, plus how curvature is obtained (closed form or finite
// differences of the metric map).  EvalContext carries per-point caches so a
// chain of operators evaluates each geometric object once per node.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "grslab/chart.hpp"
#include "grslab/errors.hpp"
#include "grslab/tensor.hpp"

namespace grs {

class TensorField;

using ScalarFn = std::function<Jet(std::span<const Jet>)>;
// Row-major dim*dim component list of the metric on the block's own coordinates.
using MetricFn = std::function<std::vector<Jet>(std::span<const Jet>)>;

enum class CurvatureSource { ClosedForm, FiniteDifference };

struct SolitonInfo {
  bool exact = false;
  double residual_bound = 0.0;  // measured sup-norm bound for approximate models
};

// Axis-aligned block of the chart carrying a constant-curvature factor metric.
// Round spheres have one block spanning all axes; products have one per factor.
struct FactorBlock {
  int offset = 0;
  int dim = 0;
  double sectional = 0.0;  // 1/r^2
  MetricFn metric;
};

struct ManifoldModel {
  std::string name;
  CoordinateChart chart;
  MetricFn metric_fn;
  ScalarFn f_fn;
  double tau = 0.5;
  CurvatureSource curvature_source = CurvatureSource::ClosedForm;
  SolitonInfo soliton;
  std::vector<FactorBlock> factors;  // empty for generic charts
  // Embedding coordinate scalars; polynomial generators for bases are built
  // from these.  Paired with per-function polynomial degree (always 1 here,
  // kept explicit for degree bookkeeping downstream).
  std::vector<ScalarFn> ambient;
  std::vector<double> fd_step;  // per-axis stencil steps, FD backend only
  int dim() const { return chart.dim(); }
};

// Per-point evaluation context with memoized geometry and field values.
// One instance per (node, thread); not shareable across threads.
class EvalContext {
 public:
  EvalContext(const ManifoldModel& m, Point x) : model_(m), x_(std::move(x)) {}

  const ManifoldModel& model() const { return model_; }
  const Point& point() const { return x_; }

  // Seeded coordinate jets at the requested truncation order.
  std::span<const Jet> coords(int order);

  // Geometry accessors return copies of memoized values; the cache internally
  // keeps the highest order evaluated so far and truncates on re-request.
  JetTensor metric(int order);       // g_ij
  JetTensor metric_inv(int order);   // g^ij
  JetTensor christoffel(int order);  // Gamma^k_{ij}, layout at(k,i,j)
  JetTensor riemann(int order);      // R_ijkl, fully lowered
  JetTensor ricci(int order);        // R_ij
  Jet scalar_curvature(int order);
  Jet potential(int order);  // f

  // Memoized field evaluation (highest order cached, truncated on re-request).
  JetTensor field(const TensorField& f, int order);

 private:
  const ManifoldModel& model_;
  Point x_;

  struct CacheSlot {
    int order = -1;
    JetTensor val;
  };
  struct ScalarSlot {
    int order = -1;
    Jet val;
  };

  std::vector<std::vector<Jet>> coord_cache_;  // indexed by order
  CacheSlot metric_, metric_inv_, gamma_, riemann_, ricci_;
  ScalarSlot scalar_r_, f_;
  std::unordered_map<uint64_t, CacheSlot> fields_;

  JetTensor eval_metric(int order);
  JetTensor eval_riemann(int order);
  Jet eval_potential(int order);
  // Taylor data of a pointwise map through 4th-order central stencils.
  void fd_synthesize(int order, bool metric_not_f, std::vector<Jet>& out);
};

// Jet-valued matrix inverse via Gaussian elimination pivoting on values.
JetTensor invert_metric(const JetTensor& g);

}  // namespace grs
