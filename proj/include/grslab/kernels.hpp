#pragma once

// Node-parallel execution kernels.  Heavy per-node work (basis evaluation,
// Gram accumulation, residual scans) is mapped over quadrature nodes either
// serially or with OpenMP.  Accumulations use a fixed blocked summation order
// so both policies produce bit-identical results; the serial policy is the
// reference implementation the parallel one is tested against.

#include <functional>
#include <span>
#include <string>

#include "grslab/model.hpp"
#include "grslab/quadrature.hpp"

namespace grs {

enum class ExecPolicy { Serial, OpenMP };

// "serial" or "openmp"; anything else throws ConfigError.
ExecPolicy parse_exec_policy(const std::string& text);

// Number of worker threads the OpenMP policy would use right now.
int exec_thread_count(ExecPolicy policy);

// Splits [0, node_count) into fixed-size blocks (the size depends only on the
// node count), calls `fn(node, ctx, out)` for every node with a per-node
// EvalContext, and adds the per-block partials into `acc` in ascending block
// order.  `fn` must ADD its node contribution into `out` (never overwrite or
// zero it); `out` is zeroed once per block.  The summation order is identical
// for both policies, so results are bit-identical.
void accumulate_over_nodes(const ManifoldModel& m, const QuadratureGrid& grid,
                           std::span<double> acc,
                           const std::function<void(int, EvalContext&, std::span<double>)>& fn,
                           ExecPolicy policy = ExecPolicy::Serial);

// Maximum of fn(node, ctx) over the listed nodes (0 if the list is empty).
// Exact max is order-independent, so both policies agree bitwise.
double max_over_nodes(const ManifoldModel& m, const QuadratureGrid& grid,
                      std::span<const int> nodes,
                      const std::function<double(int, EvalContext&)>& fn,
                      ExecPolicy policy = ExecPolicy::Serial);

}  // namespace grs
