#include "grslab/model.hpp"

#include <cmath>
#include <map>

#include "grslab/fields.hpp"

namespace grs {

std::span<const Jet> EvalContext::coords(int order) {
  if (static_cast<int>(coord_cache_.size()) <= order) coord_cache_.resize(order + 1);
  auto& slot = coord_cache_[order];
  if (slot.empty()) {
    const JetSpace& s = JetSpace::get(model_.dim(), order);
    slot = seed_point(s, {x_.data(), x_.size()});
  }
  return {slot.data(), slot.size()};
}

namespace {

// 4th-order central stencils; offsets -2..2.
constexpr double kD1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
constexpr double kD2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};

}  // namespace

void EvalContext::fd_synthesize(int order, bool metric_not_f, std::vector<Jet>& out) {
  const int n = model_.dim();
  if (order > 2)
    throw ConfigError(
        "finite-difference backend supports derivatives of the metric and potential up to total "
        "order 2 (requested order " +
        std::to_string(order) + ")");
  const int ncomp = metric_not_f ? n * n : 1;
  const JetSpace& space = JetSpace::get(n, order);
  const JetSpace& space0 = JetSpace::get(n, 0);

  // Per-point step: shrink near non-periodic chart ends so the 5-point
  // stencil (reach 2h) stays strictly interior.  The clamp depends only on
  // the evaluation point, so repeated runs stay bit-identical.
  std::vector<double> step = model_.fd_step;
  for (int a = 0; a < n; ++a) {
    const AxisSpec& ax = model_.chart.axes[a];
    if (ax.periodic) continue;
    const double dist = std::min(x_[a] - ax.lo, ax.hi - x_[a]);
    if (!(dist > 1e-6 * ax.length()))
      throw ConfigError("finite-difference evaluation point sits on or beyond the chart boundary "
                        "at axis " +
                        std::to_string(a));
    step[a] = std::min(step[a], dist / 2.05);
  }

  std::map<int64_t, std::vector<double>> evals;
  auto value_at = [&](std::span<const int> off) -> const std::vector<double>& {
    int64_t key = 0;
    for (int a = 0; a < n; ++a) key = key * 16 + (off[a] + 4);
    auto it = evals.find(key);
    if (it != evals.end()) return it->second;
    Point y = x_;
    for (int a = 0; a < n; ++a) {
      const AxisSpec& ax = model_.chart.axes[a];
      y[a] = x_[a] + off[a] * step[a];
      if (!ax.periodic && (y[a] <= ax.lo || y[a] >= ax.hi))
        throw ConfigError("finite-difference stencil crosses the chart boundary at axis " +
                          std::to_string(a) + "; evaluate further inside the interior collar");
    }
    std::vector<Jet> pt;
    pt.reserve(n);
    for (int a = 0; a < n; ++a) pt.push_back(Jet::constant(space0, y[a]));
    std::vector<double> vals(ncomp);
    if (metric_not_f) {
      std::vector<Jet> comps = model_.metric_fn({pt.data(), pt.size()});
      for (int c = 0; c < ncomp; ++c) vals[c] = comps[c].value();
    } else {
      vals[0] = model_.f_fn({pt.data(), pt.size()}).value();
    }
    return evals.emplace(key, std::move(vals)).first->second;
  };

  out.assign(ncomp, Jet(space));
  std::vector<int> off(n, 0);

  for (int c = 0; c < ncomp; ++c) out[c].coeff(0) = value_at(off)[c];
  if (order >= 1) {
    std::vector<int> alpha(n, 0);
    for (int a = 0; a < n; ++a) {
      alpha.assign(n, 0);
      alpha[a] = 1;
      const int idx = space.index({alpha.data(), alpha.size()});
      const double h = step[a];
      for (int s = -2; s <= 2; ++s) {
        if (kD1[s + 2] == 0.0) continue;
        off.assign(n, 0);
        off[a] = s;
        const auto& v = value_at(off);
        for (int c = 0; c < ncomp; ++c) out[c].coeff(idx) += kD1[s + 2] / h * v[c];
      }
    }
  }
  if (order >= 2) {
    std::vector<int> alpha(n, 0);
    for (int a = 0; a < n; ++a) {
      // pure second derivative: Taylor coefficient is f_aa/2
      alpha.assign(n, 0);
      alpha[a] = 2;
      const int idx = space.index({alpha.data(), alpha.size()});
      const double h = step[a];
      for (int s = -2; s <= 2; ++s) {
        off.assign(n, 0);
        off[a] = s;
        const auto& v = value_at(off);
        for (int c = 0; c < ncomp; ++c) out[c].coeff(idx) += 0.5 * kD2[s + 2] / (h * h) * v[c];
      }
      for (int b = a + 1; b < n; ++b) {
        alpha.assign(n, 0);
        alpha[a] = 1;
        alpha[b] = 1;
        const int idx2 = space.index({alpha.data(), alpha.size()});
        const double hb = step[b];
        for (int sa = -2; sa <= 2; ++sa) {
          if (kD1[sa + 2] == 0.0) continue;
          for (int sb = -2; sb <= 2; ++sb) {
            if (kD1[sb + 2] == 0.0) continue;
            off.assign(n, 0);
            off[a] = sa;
            off[b] = sb;
            const auto& v = value_at(off);
            const double w = kD1[sa + 2] / h * kD1[sb + 2] / hb;
            for (int c = 0; c < ncomp; ++c) out[c].coeff(idx2) += w * v[c];
          }
        }
      }
    }
  }
}

JetTensor EvalContext::eval_metric(int order) {
  const int n = model_.dim();
  JetTensor g(JetSpace::get(n, order), n, 2);
  if (model_.curvature_source == CurvatureSource::FiniteDifference) {
    std::vector<Jet> comps;
    fd_synthesize(order, true, comps);
    for (int i = 0; i < n * n; ++i) g[i] = std::move(comps[i]);
  } else {
    std::vector<Jet> comps = model_.metric_fn(coords(order));
    for (int i = 0; i < n * n; ++i) g[i] = std::move(comps[i]);
  }
  return g;
}

Jet EvalContext::eval_potential(int order) {
  if (model_.curvature_source == CurvatureSource::FiniteDifference) {
    std::vector<Jet> comps;
    fd_synthesize(order, false, comps);
    return std::move(comps[0]);
  }
  return model_.f_fn(coords(order));
}

JetTensor EvalContext::metric(int order) {
  if (metric_.order < order) {
    metric_.val = eval_metric(order);
    metric_.order = order;
  }
  if (metric_.order > order) return metric_.val.truncated(order);
  return metric_.val;
}

JetTensor invert_metric(const JetTensor& g) {
  const int n = g.dim();
  const int order = g.order();
  const JetSpace& s = JetSpace::get(n, order);
  double scale = 0.0;
  for (int i = 0; i < n * n; ++i) scale = std::max(scale, std::abs(g[i].value()));
  if (scale == 0.0) throw SingularMetricError("metric has all-zero components at a node");

  std::vector<Jet> a(g.size(), Jet(s));
  for (int i = 0; i < g.size(); ++i) a[i] = g[i];
  JetTensor inv(s, n, 2);
  for (int i = 0; i < n; ++i) inv.at(i, i) += 1.0;

  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col].value()) > std::abs(a[piv * n + col].value())) piv = r;
    if (std::abs(a[piv * n + col].value()) < 1e-13 * scale)
      throw SingularMetricError("metric is numerically singular at a node (pivot " +
                                std::to_string(a[piv * n + col].value()) + ")");
    if (piv != col)
      for (int c = 0; c < n; ++c) {
        std::swap(a[piv * n + c], a[col * n + c]);
        std::swap(inv.at(piv, c), inv.at(col, c));
      }
    Jet d = 1.0 / a[col * n + col];
    for (int c = 0; c < n; ++c) {
      a[col * n + c] = a[col * n + c] * d;
      inv.at(col, c) = inv.at(col, c) * d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      Jet m = a[r * n + col];
      if (m.value() == 0.0) {
        bool allzero = true;
        for (double cc : m.coeffs())
          if (cc != 0.0) {
            allzero = false;
            break;
          }
        if (allzero) continue;
      }
      for (int c = 0; c < n; ++c) {
        a[r * n + c] -= m * a[col * n + c];
        inv.at(r, c) -= m * inv.at(col, c);
      }
    }
  }
  return inv;
}

JetTensor EvalContext::metric_inv(int order) {
  if (metric_inv_.order < order) {
    metric_inv_.val = invert_metric(metric(order));
    metric_inv_.order = order;
  }
  if (metric_inv_.order > order) return metric_inv_.val.truncated(order);
  return metric_inv_.val;
}

JetTensor EvalContext::christoffel(int order) {
  if (gamma_.order < order) {
    const int n = model_.dim();
    const JetTensor g1 = metric(order + 1);
    JetTensor dg(JetSpace::get(n, order), n, 3);  // dg(a,i,j) = d_a g_ij
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dg.at(a, i, j) = g1.at(i, j).partial(a);
    const JetTensor ginv = metric_inv(order);  // copy: slot may rebind below
    JetTensor gamma(JetSpace::get(n, order), n, 3);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          Jet sum(JetSpace::get(n, order));
          for (int s = 0; s < n; ++s) {
            Jet term = dg.at(i, s, j) + dg.at(j, s, i) - dg.at(s, i, j);
            sum.add_product(ginv.at(k, s), term);
          }
          gamma.at(k, i, j) = sum * 0.5;
        }
    gamma_.val = std::move(gamma);
    gamma_.order = order;
  }
  if (gamma_.order > order) return gamma_.val.truncated(order);
  return gamma_.val;
}

JetTensor EvalContext::eval_riemann(int order) {
  const int n = model_.dim();
  const JetSpace& s = JetSpace::get(n, order);
  JetTensor rm(s, n, 4);
  if (model_.curvature_source == CurvatureSource::ClosedForm && !model_.factors.empty()) {
    // Constant-curvature blocks: R_ijkl = kappa (g_ik g_jl - g_il g_jk) within
    // each factor, zero across factors.
    const JetTensor g = metric(order);
    for (const FactorBlock& fb : model_.factors) {
      for (int i = fb.offset; i < fb.offset + fb.dim; ++i)
        for (int j = fb.offset; j < fb.offset + fb.dim; ++j)
          for (int k = fb.offset; k < fb.offset + fb.dim; ++k)
            for (int l = fb.offset; l < fb.offset + fb.dim; ++l) {
              Jet v(s);
              v.add_product(g.at(i, k), g.at(j, l));
              Jet w(s);
              w.add_product(g.at(i, l), g.at(j, k));
              rm.at(i, j, k, l) = (v - w) * fb.sectional;
            }
    }
    return rm;
  }
  // Derived curvature from Christoffel jets.  With the commutator convention
  //   (\nabla_i \nabla_j - \nabla_j \nabla_i) w_k = R_ijkp g^{ps} w_s
  // one has R_ijkp = g_ps (d_j Gamma^s_ik - d_i Gamma^s_jk
  //                        + Gamma^t_ik Gamma^s_jt - Gamma^t_jk Gamma^s_it).
  const JetTensor gamma1 = christoffel(order + 1);
  const JetTensor gamma = gamma1.truncated(order);
  const JetTensor g = metric(order);
  JetTensor dgamma(s, n, 4);  // dgamma(a,k,i,j) = d_a Gamma^k_ij
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dgamma.at(a, k, i, j) = gamma1.at(k, i, j).partial(a);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int p = 0; p < n; ++p) {
          Jet up(s);  // R_ijk^s before lowering
          for (int ss = 0; ss < n; ++ss) {
            Jet term = dgamma.at(j, ss, i, k) - dgamma.at(i, ss, j, k);
            for (int t = 0; t < n; ++t) {
              term.add_product(gamma.at(t, i, k), gamma.at(ss, j, t));
              Jet neg(s);
              neg.add_product(gamma.at(t, j, k), gamma.at(ss, i, t));
              term -= neg;
            }
            up.add_product(g.at(p, ss), term);
          }
          rm.at(i, j, k, p) = std::move(up);
        }
  return rm;
}

JetTensor EvalContext::riemann(int order) {
  if (riemann_.order < order) {
    riemann_.val = eval_riemann(order);
    riemann_.order = order;
  }
  if (riemann_.order > order) return riemann_.val.truncated(order);
  return riemann_.val;
}

JetTensor EvalContext::ricci(int order) {
  if (ricci_.order < order) {
    const int n = model_.dim();
    const JetSpace& s = JetSpace::get(n, order);
    const JetTensor rm = riemann(order);
    const JetTensor ginv = metric_inv(order);
    JetTensor ric(s, n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Jet sum(s);
        for (int p = 0; p < n; ++p)
          for (int q = 0; q < n; ++q) sum.add_product(ginv.at(p, q), rm.at(p, i, q, j));
        ric.at(i, j) = std::move(sum);
      }
    ricci_.val = std::move(ric);
    ricci_.order = order;
  }
  if (ricci_.order > order) return ricci_.val.truncated(order);
  return ricci_.val;
}

Jet EvalContext::scalar_curvature(int order) {
  if (scalar_r_.order < order) {
    const int n = model_.dim();
    const JetTensor ric = ricci(order);
    const JetTensor ginv = metric_inv(order);
    Jet sum(JetSpace::get(n, order));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) sum.add_product(ginv.at(i, j), ric.at(i, j));
    scalar_r_.val = std::move(sum);
    scalar_r_.order = order;
  }
  if (scalar_r_.order > order) return scalar_r_.val.truncated(order);
  return scalar_r_.val;
}

Jet EvalContext::potential(int order) {
  if (f_.order < order) {
    f_.val = eval_potential(order);
    f_.order = order;
  }
  if (f_.order > order) return f_.val.truncated(order);
  return f_.val;
}

JetTensor EvalContext::field(const TensorField& f, int order) {
  const uint64_t id = f.id();
  auto it = fields_.find(id);
  if (it != fields_.end() && it->second.order >= order) {
    if (it->second.order == order) return it->second.val;
    return it->second.val.truncated(order);
  }
  JetTensor v = f.eval_raw(*this, order);  // may recurse and mutate fields_
  auto& slot = fields_[id];
  if (slot.order < order) {
    slot.order = order;
    slot.val = v;
  }
  return v;
}

}  // namespace grs
