#include "grslab/models.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "grslab/quadrature.hpp"

namespace grs {

namespace {

constexpr double kPi = std::numbers::pi;

// Hyperspherical metric block of dimension d and radius r on its own
// coordinates: diag(r^2, r^2 sin^2 x0, r^2 sin^2 x0 sin^2 x1, ...).
MetricFn sphere_block_metric(int d, double r) {
  return [d, r](std::span<const Jet> x) {
    const JetSpace& s = x[0].space();
    std::vector<Jet> g(static_cast<size_t>(d * d), Jet::constant(s, 0.0));
    Jet pre = Jet::constant(s, r * r);
    for (int i = 0; i < d; ++i) {
      g[static_cast<size_t>(i * d + i)] = pre;
      if (i + 1 < d) {
        const Jet si = sin(x[static_cast<size_t>(i)]);
        pre = pre * si * si;
      }
    }
    return g;
  };
}

// Assemble the full metric from factor blocks (zero across blocks).
MetricFn block_diagonal_metric(std::vector<FactorBlock> blocks, int dim) {
  return [blocks = std::move(blocks), dim](std::span<const Jet> x) {
    const JetSpace& s = x[0].space();
    std::vector<Jet> g(static_cast<size_t>(dim * dim), Jet::constant(s, 0.0));
    for (const FactorBlock& b : blocks) {
      const std::vector<Jet> sub =
          b.metric(x.subspan(static_cast<size_t>(b.offset), static_cast<size_t>(b.dim)));
      for (int i = 0; i < b.dim; ++i) {
        for (int j = 0; j < b.dim; ++j) {
          g[static_cast<size_t>((b.offset + i) * dim + (b.offset + j))] =
              sub[static_cast<size_t>(i * b.dim + j)];
        }
      }
    }
    return g;
  };
}

// Unit-vector coordinate functions of a d-sphere block in hyperspherical
// coordinates, acting on the full coordinate list with the given offset:
//   u_0 = cos x0, u_1 = sin x0 cos x1, ..., u_d = sin x0 ... sin x{d-1}.
std::vector<ScalarFn> sphere_block_ambient(int d, int offset) {
  std::vector<ScalarFn> fns;
  for (int k = 0; k <= d; ++k) {
    fns.push_back([d, offset, k](std::span<const Jet> x) {
      Jet u = Jet::constant(x[0].space(), 1.0);
      for (int a = 0; a < k; ++a) u = u * sin(x[static_cast<size_t>(offset + a)]);
      if (k < d) u = u * cos(x[static_cast<size_t>(offset + k)]);
      return u;
    });
  }
  return fns;
}

std::vector<AxisSpec> sphere_axes(int d) {
  std::vector<AxisSpec> axes;
  for (int i = 0; i < d; ++i) {
    AxisSpec ax;
    if (i + 1 < d) {
      ax.lo = 0.0;
      ax.hi = kPi;
      ax.periodic = false;
      ax.polar_density = d - 1 - i;
    } else {
      ax.lo = 0.0;
      ax.hi = 2.0 * kPi;
      ax.periodic = true;
      ax.polar_density = 0;
    }
    axes.push_back(ax);
  }
  return axes;
}

double sphere_volume(int n, double r) {
  // Vol(S^n_r) = 2 pi^{(n+1)/2} / Gamma((n+1)/2) * r^n
  return 2.0 * std::pow(kPi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1)) * std::pow(r, n);
}

// Constant weight exponent making the weighted measure a probability measure:
// exp(-f) (4 pi tau)^{-n/2} Vol = 1.
double normalizing_constant_f(double volume, double tau, int n) {
  return std::log(volume) - 0.5 * n * std::log(4.0 * kPi * tau);
}

void probe_positive_definite(const ManifoldModel& m) {
  std::vector<int> probe(static_cast<size_t>(m.dim()), 5);
  (void)build_grid(m, probe);  // throws BuildError on failure
}

}  // namespace

ManifoldModel build_round_sphere(int n, double radius) {
  if (n < 2 || n > 4) throw BuildError("round sphere dimension must be 2, 3, or 4");
  if (!(radius > 0.0)) throw BuildError("round sphere radius must be positive");
  ManifoldModel m;
  {
    std::ostringstream name;
    name << "sphere:n=" << n << ",r=" << radius;
    m.name = name.str();
  }
  m.chart.axes = sphere_axes(n);
  FactorBlock blk;
  blk.offset = 0;
  blk.dim = n;
  blk.sectional = 1.0 / (radius * radius);
  blk.metric = sphere_block_metric(n, radius);
  m.factors = {blk};
  m.metric_fn = block_diagonal_metric(m.factors, n);
  m.tau = radius * radius / (2.0 * (n - 1));
  const double f0 = normalizing_constant_f(sphere_volume(n, radius), m.tau, n);
  m.f_fn = [f0](std::span<const Jet> x) { return Jet::constant(x[0].space(), f0); };
  m.curvature_source = CurvatureSource::ClosedForm;
  m.soliton.exact = true;
  m.ambient = sphere_block_ambient(n, 0);
  probe_positive_definite(m);
  return m;
}

ManifoldModel build_sphere_product(int n1, double r1, int n2, double r2) {
  if (n1 < 2 || n2 < 2) throw BuildError("product factors must each have dimension >= 2");
  if (n1 + n2 > 4) throw BuildError("product models support total dimension <= 4");
  if (!(r1 > 0.0) || !(r2 > 0.0)) throw BuildError("factor radii must be positive");
  const double k1 = (n1 - 1) / (r1 * r1);
  const double k2 = (n2 - 1) / (r2 * r2);
  if (std::fabs(k1 - k2) > 1e-12 * std::max(k1, k2))
    throw BuildError(
        "product factors must share the same Einstein constant (n-1)/r^2; got " +
        std::to_string(k1) + " and " + std::to_string(k2));
  const int n = n1 + n2;
  ManifoldModel m;
  {
    std::ostringstream name;
    name << "product:n1=" << n1 << ",r1=" << r1 << ",n2=" << n2 << ",r2=" << r2;
    m.name = name.str();
  }
  std::vector<AxisSpec> a1 = sphere_axes(n1);
  std::vector<AxisSpec> a2 = sphere_axes(n2);
  m.chart.axes = a1;
  m.chart.axes.insert(m.chart.axes.end(), a2.begin(), a2.end());
  FactorBlock b1{0, n1, 1.0 / (r1 * r1), sphere_block_metric(n1, r1)};
  FactorBlock b2{n1, n2, 1.0 / (r2 * r2), sphere_block_metric(n2, r2)};
  m.factors = {b1, b2};
  m.metric_fn = block_diagonal_metric(m.factors, n);
  m.tau = 1.0 / (2.0 * k1);
  const double vol = sphere_volume(n1, r1) * sphere_volume(n2, r2);
  const double f0 = normalizing_constant_f(vol, m.tau, n);
  m.f_fn = [f0](std::span<const Jet> x) { return Jet::constant(x[0].space(), f0); };
  m.curvature_source = CurvatureSource::ClosedForm;
  m.soliton.exact = true;
  m.ambient = sphere_block_ambient(n1, 0);
  std::vector<ScalarFn> amb2 = sphere_block_ambient(n2, n1);
  m.ambient.insert(m.ambient.end(), amb2.begin(), amb2.end());
  probe_positive_definite(m);
  return m;
}

ManifoldModel build_ellipsoid() {
  ManifoldModel m;
  m.name = "generic:ellipsoid";
  m.chart.axes = sphere_axes(2);
  // Surface (sin t cos p, sin t sin p, 1.2 cos t): induced metric
  // g_tt = cos^2 t + 1.44 sin^2 t, g_tp = 0, g_pp = sin^2 t.
  m.metric_fn = [](std::span<const Jet> x) {
    const JetSpace& s = x[0].space();
    const Jet ct = cos(x[0]);
    const Jet st = sin(x[0]);
    std::vector<Jet> g(4, Jet::constant(s, 0.0));
    g[0] = ct * ct + 1.44 * (st * st);
    g[3] = st * st;
    return g;
  };
  m.f_fn = [](std::span<const Jet> x) { return 0.3 * cos(x[0]); };
  m.tau = 0.5;
  m.curvature_source = CurvatureSource::FiniteDifference;
  m.soliton.exact = false;
  m.ambient = sphere_block_ambient(2, 0);
  set_fd_steps(m, default_resolution(m));
  probe_positive_definite(m);
  return m;
}

void set_fd_steps(ManifoldModel& m, const std::vector<int>& per_axis) {
  if (m.curvature_source != CurvatureSource::FiniteDifference) return;
  if (static_cast<int>(per_axis.size()) != m.dim())
    throw ConfigError("resolution must list one entry per chart axis");
  m.fd_step.resize(per_axis.size());
  for (size_t a = 0; a < per_axis.size(); ++a) {
    m.fd_step[a] = m.chart.axes[a].length() / per_axis[a];
  }
}

std::vector<int> default_resolution(const ManifoldModel& m) {
  if (m.curvature_source == CurvatureSource::FiniteDifference) {
    std::vector<int> res;
    for (const AxisSpec& ax : m.chart.axes) res.push_back(ax.periodic ? 128 : 64);
    return res;
  }
  if (m.dim() == 2) return {12, 24};
  if (m.dim() == 3) return {10, 10, 20};
  // dim 4: one sphere (three polar axes + periodic) or a product.  Eight
  // points per axis integrate every basis-assembly integrand exactly at the
  // default truncation level while keeping the grid at 8^4 = 4096 nodes.
  std::vector<int> res(m.chart.axes.size(), 8);
  return res;
}

namespace {

std::map<std::string, double> parse_kv(const std::string& body) {
  std::map<std::string, double> kv;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("model spec entries must look like key=value; got '" + item + "'");
    const std::string key = item.substr(0, eq);
    try {
      kv[key] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("model spec value for '" + key + "' is not a number");
    }
  }
  return kv;
}

double kv_get(const std::map<std::string, double>& kv, const std::string& key, double dflt) {
  auto it = kv.find(key);
  return it == kv.end() ? dflt : it->second;
}

}  // namespace

ManifoldModel build_model(const std::string& spec) {
  if (spec == "s2") return build_round_sphere(2, 1.0);
  if (spec == "s3") return build_round_sphere(3, 1.0);
  if (spec == "s4") return build_round_sphere(4, 1.0);
  if (spec == "s2xs2") return build_sphere_product(2, 1.0, 2, 1.0);
  if (spec == "ellipsoid" || spec == "generic:ellipsoid") return build_ellipsoid();
  const size_t colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string body = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "sphere") {
    const auto kv = parse_kv(body);
    return build_round_sphere(static_cast<int>(kv_get(kv, "n", 2)), kv_get(kv, "r", 1.0));
  }
  if (head == "product") {
    const auto kv = parse_kv(body);
    return build_sphere_product(static_cast<int>(kv_get(kv, "n1", 2)), kv_get(kv, "r1", 1.0),
                                static_cast<int>(kv_get(kv, "n2", 2)), kv_get(kv, "r2", 1.0));
  }
  throw ConfigError("unknown model spec '" + spec +
                    "'; expected s2, s3, s4, s2xs2, ellipsoid, sphere:..., product:..., or "
                    "generic:ellipsoid");
}

}  // namespace grs
