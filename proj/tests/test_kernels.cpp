#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "grslab/errors.hpp"
#include "grslab/fields.hpp"
#include "grslab/galerkin.hpp"
#include "grslab/kernels.hpp"
#include "grslab/models.hpp"
#include "grslab/quadrature.hpp"
#include "grslab/weighted.hpp"

using namespace grs;

TEST_CASE("execution policy names parse and reject garbage") {
  CHECK(parse_exec_policy("serial") == ExecPolicy::Serial);
  CHECK(parse_exec_policy("openmp") == ExecPolicy::OpenMP);
  CHECK_THROWS_AS(parse_exec_policy("threads"), ConfigError);
  CHECK(exec_thread_count(ExecPolicy::Serial) == 1);
  CHECK(exec_thread_count(ExecPolicy::OpenMP) >= 1);
}

TEST_CASE("both policies accumulate bit-identical sums") {
  const ManifoldModel m = build_round_sphere(2, 1.0);
  const QuadratureGrid grid = build_grid(m, {12, 24});

  // A node function whose partial sums genuinely depend on the order of
  // accumulation if the blocking were not fixed.
  auto fn = [&](int node, EvalContext& ctx, std::span<double> out) {
    const double w = grid.dm_weight[node];
    const double r = ctx.scalar_curvature(0).value();
    out[0] += w * r;
    out[1] += w * r * r * ctx.point()[0];
    out[2] += w / (1.0 + std::abs(ctx.point()[1]));
  };

  std::vector<double> serial(3, 0.0), parallel(3, 0.0);
  accumulate_over_nodes(m, grid, serial, fn, ExecPolicy::Serial);
  accumulate_over_nodes(m, grid, parallel, fn, ExecPolicy::OpenMP);
  for (int i = 0; i < 3; ++i) CHECK(serial[i] == parallel[i]);  // exact
}

TEST_CASE("assembled systems agree bitwise across policies") {
  const ManifoldModel m = build_round_sphere(2, 1.0);
  const QuadratureGrid grid = build_grid(m, {12, 24});

  const ScalarSystem ss = assemble_scalar_system(m, grid, 3, ExecPolicy::Serial);
  const ScalarSystem sp = assemble_scalar_system(m, grid, 3, ExecPolicy::OpenMP);
  CHECK((ss.op_drift - sp.op_drift).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ss.grad_gram - sp.grad_gram).cwiseAbs().maxCoeff() == 0.0);

  const TensorSystem ts = assemble_tensor_system(m, grid, ss, 1, ExecPolicy::Serial);
  const TensorSystem tp = assemble_tensor_system(m, grid, sp, 1, ExecPolicy::OpenMP);
  CHECK((ts.op_lichnerowicz - tp.op_lichnerowicz).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ts.div_pair_gram - tp.div_pair_gram).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ts.div_scalar_pair - tp.div_scalar_pair).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weighted measure is normalized and integrates polynomials exactly") {
  const ManifoldModel m = build_round_sphere(2, 1.0);
  const QuadratureGrid grid = build_grid(m, {12, 24});

  CHECK(grid.raw_dm_defect < 1e-12);
  CHECK(grid.volume == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-12));
  CHECK(integrate_dm(m, grid, constant_field(1.0)) == doctest::Approx(1.0).epsilon(1e-14));

  // Moments of the ambient height on the round sphere: <z^2> = 1/3,
  // <z^4> = 1/5, odd moments vanish.
  const TensorField z = scalar_field(m.ambient[2]);
  const double m1 = integrate_dm(m, grid, z);
  const double m2 = integrate_dm(m, grid, scalar_times(z, z));
  const double m4 = integrate_dm(m, grid, scalar_times(scalar_times(z, z), scalar_times(z, z)));
  CHECK(std::abs(m1) < 1e-14);
  CHECK(m2 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(m4 == doctest::Approx(1.0 / 5.0).epsilon(1e-12));
}

TEST_CASE("check nodes are deterministic, interior, and capped") {
  const ManifoldModel m = build_sphere_product(2, 1.0, 2, 1.0);
  const QuadratureGrid grid = build_grid(m, {8, 8, 8, 8});

  const std::vector<int> a = check_nodes(m, grid, 128);
  const std::vector<int> b = check_nodes(m, grid, 128);
  CHECK(a == b);
  CHECK(!a.empty());
  CHECK(a.size() <= 128);
  for (int idx : a) {
    CHECK(idx >= 0);
    CHECK(idx < grid.size());
  }
}

TEST_CASE("max over nodes matches a hand fold") {
  const ManifoldModel m = build_round_sphere(2, 1.0);
  const QuadratureGrid grid = build_grid(m, {12, 24});
  const std::vector<int> nodes = check_nodes(m, grid, 64);

  auto fn = [](int, EvalContext& ctx) { return std::abs(ctx.point()[1]); };
  double expect = 0.0;
  for (int idx : nodes) {
    EvalContext ctx(m, grid.nodes[idx]);
    expect = std::max(expect, fn(idx, ctx));
  }
  CHECK(max_over_nodes(m, grid, nodes, fn, ExecPolicy::Serial) == expect);
  CHECK(max_over_nodes(m, grid, nodes, fn, ExecPolicy::OpenMP) == expect);
}
