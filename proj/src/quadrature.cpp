#include "grslab/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>

namespace grs {

void gauss_gegenbauer(int npts, double alpha, std::vector<double>& nodes,
                      std::vector<double>& weights) {
  if (npts < 1) throw ConfigError("quadrature rule needs at least one node");
  // Jacobi matrix of the monic orthogonal polynomials for (1-u^2)^alpha:
  // zero diagonal, b_k = 4k(k+a)^2(k+2a) / ((2k+2a)^2 (2k+2a+1)(2k+2a-1)).
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(npts, npts);
  for (int k = 1; k < npts; ++k) {
    const double a = alpha;
    const double num = 4.0 * k * (k + a) * (k + a) * (k + 2 * a);
    const double den = (2 * k + 2 * a) * (2 * k + 2 * a) * (2 * k + 2 * a + 1) * (2 * k + 2 * a - 1);
    const double b = std::sqrt(num / den);
    J(k - 1, k) = b;
    J(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const double mu0 = std::pow(2.0, 2 * alpha + 1) * std::tgamma(alpha + 1) * std::tgamma(alpha + 1) /
                     std::tgamma(2 * alpha + 2);
  nodes.resize(npts);
  weights.resize(npts);
  for (int i = 0; i < npts; ++i) {
    nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    weights[i] = mu0 * v0 * v0;
  }
  // Eigenvalues come back ascending; enforce the exact +-symmetry of the rule.
  for (int i = 0; i < npts / 2; ++i) {
    const int j = npts - 1 - i;
    const double s = 0.5 * (nodes[j] - nodes[i]);
    nodes[i] = -s;
    nodes[j] = s;
    const double w = 0.5 * (weights[i] + weights[j]);
    weights[i] = w;
    weights[j] = w;
  }
  if (npts % 2 == 1) nodes[npts / 2] = 0.0;
}

AxisRule axis_rule(const AxisSpec& axis, int npts) {
  AxisRule r;
  if (axis.periodic) {
    const double h = axis.length() / npts;
    r.nodes.resize(npts);
    r.weights.assign(npts, h);
    for (int j = 0; j < npts; ++j) r.nodes[j] = axis.lo + (j + 0.5) * h;
    return r;
  }
  std::vector<double> u, w;
  if (axis.polar_density > 0) {
    if (std::fabs(axis.lo) > 1e-12 || std::fabs(axis.hi - std::numbers::pi) > 1e-12)
      throw BuildError("polar axes must span (0, pi)");
    gauss_gegenbauer(npts, 0.5 * (axis.polar_density - 1), u, w);
    r.nodes.resize(npts);
    r.weights.resize(npts);
    for (int j = 0; j < npts; ++j) {
      r.nodes[j] = std::acos(u[npts - 1 - j]);  // ascending in the coordinate
      r.weights[j] = w[npts - 1 - j];
    }
    return r;
  }
  gauss_gegenbauer(npts, 0.0, u, w);  // plain Gauss rule, mapped affinely
  const double c = 0.5 * (axis.lo + axis.hi);
  const double s = 0.5 * axis.length();
  r.nodes.resize(npts);
  r.weights.resize(npts);
  for (int j = 0; j < npts; ++j) {
    r.nodes[j] = c + s * u[j];
    r.weights[j] = s * w[j];
  }
  return r;
}

QuadratureGrid build_grid(const ManifoldModel& m, const std::vector<int>& per_axis) {
  const int n = m.dim();
  if (static_cast<int>(per_axis.size()) != n)
    throw ConfigError("grid resolution must list one node count per chart axis");
  std::vector<AxisRule> rules;
  rules.reserve(per_axis.size());
  int total = 1;
  for (int a = 0; a < n; ++a) {
    if (per_axis[a] < 1) throw ConfigError("grid resolution entries must be positive");
    rules.push_back(axis_rule(m.chart.axes[a], per_axis[a]));
    total *= per_axis[a];
  }

  QuadratureGrid grid;
  grid.per_axis = per_axis;
  grid.nodes.resize(total);
  grid.dv_weight.resize(total);
  grid.dm_weight.resize(total);

  const double mass_scale = std::pow(4.0 * std::numbers::pi * m.tau, -0.5 * n);
  std::vector<int> idx(n, 0);
  double dv_sum = 0.0;
  double dm_sum = 0.0;
  for (int node = 0; node < total; ++node) {
    Point x(n);
    double wprod = 1.0;
    double density = 1.0;
    for (int a = 0; a < n; ++a) {
      x[a] = rules[a].nodes[idx[a]];
      wprod *= rules[a].weights[idx[a]];
      if (m.chart.axes[a].polar_density > 0)
        density *= std::pow(std::sin(x[a]), m.chart.axes[a].polar_density);
    }
    EvalContext ctx(m, x);
    const JetTensor g = ctx.metric(0);
    Eigen::MatrixXd G(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) G(i, j) = g.at(i, j).value();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    if (es.eigenvalues()(0) <= 0.0)
      throw BuildError("metric is not positive definite at a grid node of model " + m.name);
    const double det = G.determinant();
    const double dv = wprod * std::sqrt(det) / density;
    const double f = ctx.potential(0).value();
    grid.nodes[node] = std::move(x);
    grid.dv_weight[node] = dv;
    grid.dm_weight[node] = dv * mass_scale * std::exp(-f);
    dv_sum += dv;
    dm_sum += grid.dm_weight[node];
    for (int a = n - 1; a >= 0; --a) {
      if (++idx[a] < per_axis[a]) break;
      idx[a] = 0;
    }
  }
  grid.volume = dv_sum;
  grid.raw_dm_defect = std::fabs(dm_sum - 1.0);
  for (double& w : grid.dm_weight) w /= dm_sum;
  return grid;
}

std::vector<int> check_nodes(const ManifoldModel& m, const QuadratureGrid& grid, int max_count) {
  const int n = m.dim();
  std::vector<double> margin(n, 0.0);
  for (int a = 0; a < n; ++a) {
    const AxisSpec& ax = m.chart.axes[a];
    if (ax.periodic) continue;
    margin[a] = m.chart.collar * ax.length();
    if (m.curvature_source == CurvatureSource::FiniteDifference)
      margin[a] += 2.5 * m.fd_step[a];
  }
  std::vector<int> interior;
  for (int node = 0; node < grid.size(); ++node) {
    bool ok = true;
    for (int a = 0; a < n && ok; ++a) {
      const AxisSpec& ax = m.chart.axes[a];
      if (ax.periodic) continue;
      const double x = grid.nodes[node][a];
      ok = (x >= ax.lo + margin[a]) && (x <= ax.hi - margin[a]);
    }
    if (ok) interior.push_back(node);
  }
  if (max_count < 1) max_count = 1;
  const size_t stride =
      (interior.size() + static_cast<size_t>(max_count) - 1) / static_cast<size_t>(max_count);
  std::vector<int> out;
  for (size_t i = 0; i < interior.size(); i += std::max<size_t>(1, stride)) {
    out.push_back(interior[i]);
  }
  return out;
}

}  // namespace grs
