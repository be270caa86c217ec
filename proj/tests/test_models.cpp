#include <cmath>
#include <vector>

#include "doctest.h"
#include "grslab/config.hpp"
#include "grslab/errors.hpp"
#include "grslab/geometry.hpp"
#include "grslab/models.hpp"
#include "grslab/quadrature.hpp"
#include "oracles.hpp"

using namespace grs;

TEST_CASE("model grammar accepts the documented spellings") {
  CHECK(build_model("s2").dim() == 2);
  CHECK(build_model("s3").dim() == 3);
  CHECK(build_model("s4").dim() == 4);
  CHECK(build_model("s2xs2").dim() == 4);
  CHECK(build_model("ellipsoid").dim() == 2);
  CHECK(build_model("generic:ellipsoid").dim() == 2);
  CHECK(build_model("sphere:n=2,r=1.5").dim() == 2);
  CHECK(build_model("product:n1=2,r1=1,n2=2,r2=1").dim() == 4);
}

TEST_CASE("model grammar rejects malformed and unsupported specs") {
  CHECK_THROWS_AS(build_model("torus"), ConfigError);
  CHECK_THROWS_AS(build_model("sphere:n=two"), ConfigError);
  CHECK_THROWS_AS(build_model("sphere:radius=1"), ConfigError);
  CHECK_THROWS_AS(build_model("sphere:n=9,r=1"), BuildError);
  CHECK_THROWS_AS(build_model("sphere:n=2,r=-1"), BuildError);
  // 2+3 factors cannot share a normalization unless the curvatures match.
  CHECK_THROWS_AS(build_model("product:n1=2,r1=1,n2=3,r2=1"), BuildError);
  // Total dimension above four is out of scope.
  CHECK_THROWS_AS(build_model("product:n1=3,r1=2,n2=3,r2=2"), BuildError);
}

TEST_CASE("sphere fixtures carry the derived normalization") {
  struct Row {
    const char* spec;
    int n;
    double r;
  };
  for (const Row& row : {Row{"s2", 2, 1.0}, Row{"s3", 3, 1.0}, Row{"sphere:n=3,r=2", 3, 2.0}}) {
    CAPTURE(row.spec);
    const ManifoldModel m = build_model(row.spec);
    CHECK(m.soliton.exact);
    CHECK(m.tau == doctest::Approx(oracle::sphere_tau(row.n, row.r)).epsilon(1e-14));
    const QuadratureGrid grid = build_grid(m, default_resolution(m));
    const int node = check_nodes(m, grid, 4).front();
    EvalContext ctx(m, grid.nodes[node]);
    CHECK(ctx.potential(0).value() ==
          doctest::Approx(oracle::sphere_potential(row.n, row.r)).epsilon(1e-12));
    CHECK(ctx.scalar_curvature(0).value() ==
          doctest::Approx(oracle::sphere_scalar_curvature(row.n, row.r)).epsilon(1e-11));
  }
}

TEST_CASE("the product fixture matches its hand-computed normalization") {
  const ManifoldModel m = build_model("s2xs2");
  CHECK(m.soliton.exact);
  CHECK(m.tau == doctest::Approx(oracle::kS2xS2Tau).epsilon(1e-14));
  CHECK(m.factors.size() == 2);
  const QuadratureGrid grid = build_grid(m, default_resolution(m));
  const int node = check_nodes(m, grid, 4).front();
  EvalContext ctx(m, grid.nodes[node]);
  CHECK(ctx.potential(0).value() == doctest::Approx(oracle::kS2xS2F).epsilon(1e-12));
  CHECK(ctx.scalar_curvature(0).value() == doctest::Approx(oracle::kS2xS2R).epsilon(1e-11));
}

TEST_CASE("the ellipsoid is marked approximate with a positive residual bound") {
  const ManifoldModel m = build_model("ellipsoid");
  CHECK(!m.soliton.exact);
  CHECK(m.soliton.residual_bound > 0.0);
  CHECK(m.curvature_source == CurvatureSource::FiniteDifference);
}

TEST_CASE("default resolutions satisfy the degree guard for default truncation") {
  for (const char* spec : {"s2", "s3", "s4", "s2xs2", "ellipsoid"}) {
    CAPTURE(spec);
    const ManifoldModel m = build_model(spec);
    const std::vector<int> res = default_resolution(m);
    CHECK(static_cast<int>(res.size()) == m.dim());
    CHECK_NOTHROW(validate_resolution(m, res, default_truncation(m)));
  }
  const ManifoldModel s2 = build_model("s2");
  CHECK_THROWS_AS(validate_resolution(s2, {6, 24}, 2), ConfigError);   // aliasing guard
  CHECK_THROWS_AS(validate_resolution(s2, {12, 24, 4}, 1), ConfigError);  // axis count
}

TEST_CASE("fd steps follow the grid and leave closed-form models alone") {
  ManifoldModel e = build_model("ellipsoid");
  set_fd_steps(e, {12, 24});
  REQUIRE(e.fd_step.size() == 2);
  CHECK(e.fd_step[0] > 0.0);
  CHECK(e.fd_step[1] > 0.0);
  set_fd_steps(e, {24, 48});
  CHECK(e.fd_step[0] > 0.0);

  ManifoldModel s = build_model("s2");
  const std::vector<double> before = s.fd_step;
  set_fd_steps(s, {12, 24});
  CHECK(s.fd_step == before);
}

TEST_CASE("fd curvature converges to the closed form under stencil refinement") {
  const ManifoldModel closed = build_round_sphere(2, 1.0);
  ManifoldModel fd = build_round_sphere(2, 1.0);
  fd.curvature_source = CurvatureSource::FiniteDifference;
  fd.fd_step = {0.08, 0.08};

  const QuadratureGrid grid = build_grid(closed, {12, 24});
  const std::vector<int> sample = check_nodes(fd, grid, 16);
  REQUIRE(!sample.empty());

  std::vector<double> errors;
  for (double h : {0.08, 0.04}) {
    fd.fd_step = {h, h};
    double err = 0.0;
    for (int idx : sample) {
      EvalContext ref(closed, grid.nodes[idx]);
      EvalContext approx(fd, grid.nodes[idx]);
      const std::vector<double> a = tensor_values(ref.ricci(0));
      const std::vector<double> b = tensor_values(approx.ricci(0));
      for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(a[i] - b[i]));
    }
    errors.push_back(err);
  }
  REQUIRE(errors[0] > 0.0);
  REQUIRE(errors[1] > 0.0);
  const double order = std::log2(errors[0] / errors[1]);
  CHECK(order >= 1.8);
}
