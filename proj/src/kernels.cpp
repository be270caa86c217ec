#include "grslab/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "grslab/errors.hpp"

namespace grs {

ExecPolicy parse_exec_policy(const std::string& text) {
  if (text == "serial") return ExecPolicy::Serial;
  if (text == "openmp") return ExecPolicy::OpenMP;
  throw ConfigError("unknown execution policy '" + text + "' (expected serial or openmp)");
}

int exec_thread_count(ExecPolicy policy) {
  if (policy == ExecPolicy::Serial) return 1;
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

// Block size is a function of the node count only, never of the policy or
// thread count, so the summation tree is reproducible.
int block_size_for(int node_count) {
  int block = 256;
  while (block * 64 < node_count) block *= 2;
  return block;
}

}  // namespace

void accumulate_over_nodes(const ManifoldModel& m, const QuadratureGrid& grid,
                           std::span<double> acc,
                           const std::function<void(int, EvalContext&, std::span<double>)>& fn,
                           ExecPolicy policy) {
  const int n = static_cast<int>(grid.nodes.size());
  if (n == 0 || acc.empty()) return;
  const int block = block_size_for(n);
  const int nblocks = (n + block - 1) / block;
  const std::size_t width = acc.size();
  std::vector<double> partial(width * static_cast<std::size_t>(nblocks), 0.0);

  auto run_block = [&](int b) {
    std::span<double> out(partial.data() + width * static_cast<std::size_t>(b), width);
    const int lo = b * block;
    const int hi = std::min(n, lo + block);
    for (int i = lo; i < hi; ++i) {
      EvalContext ctx(m, grid.nodes[static_cast<std::size_t>(i)]);
      fn(i, ctx, out);
    }
  };

  if (policy == ExecPolicy::OpenMP) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (int b = 0; b < nblocks; ++b) run_block(b);
  } else {
    for (int b = 0; b < nblocks; ++b) run_block(b);
  }

  for (int b = 0; b < nblocks; ++b) {
    const double* col = partial.data() + width * static_cast<std::size_t>(b);
    for (std::size_t k = 0; k < width; ++k) acc[k] += col[k];
  }
}

double max_over_nodes(const ManifoldModel& m, const QuadratureGrid& grid,
                      std::span<const int> nodes,
                      const std::function<double(int, EvalContext&)>& fn, ExecPolicy policy) {
  const int n = static_cast<int>(nodes.size());
  if (n == 0) return 0.0;
  double best = 0.0;
  if (policy == ExecPolicy::OpenMP) {
#ifdef _OPENMP
#pragma omp parallel
    {
      double local = 0.0;
#pragma omp for schedule(dynamic, 8) nowait
      for (int k = 0; k < n; ++k) {
        EvalContext ctx(m, grid.nodes[static_cast<std::size_t>(nodes[k])]);
        local = std::max(local, fn(nodes[k], ctx));
      }
#pragma omp critical
      best = std::max(best, local);
    }
    return best;
#endif
  }
  for (int k = 0; k < n; ++k) {
    EvalContext ctx(m, grid.nodes[static_cast<std::size_t>(nodes[k])]);
    best = std::max(best, fn(nodes[k], ctx));
  }
  return best;
}

}  // namespace grs
