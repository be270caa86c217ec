#include "grslab/weighted.hpp"

#include <cmath>
#include <utility>

namespace grs {

namespace {

int pow_int(int b, int e) {
  int r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

TensorField weighted_divergence(TensorField t) {
  const int r = t.rank();
  TensorField grad = covariant_derivative(t);
  return TensorField::make(
      r - 1, [t = std::move(t), grad = std::move(grad), r](EvalContext& ctx, int order) {
        const int n = ctx.model().dim();
        const JetTensor gv = ctx.field(grad, order);  // layout (p, q, K)
        const JetTensor tv = ctx.field(t, order);     // layout (q, K)
        const JetTensor ginv = ctx.metric_inv(order);
        const Jet f = ctx.potential(order + 1);
        std::vector<Jet> df;
        df.reserve(static_cast<size_t>(n));
        for (int p = 0; p < n; ++p) df.push_back(f.partial(p).truncated(order));
        const int ksize = pow_int(n, r - 1);
        JetTensor out(JetSpace::get(n, order), n, r - 1);
        for (int k = 0; k < ksize; ++k) {
          Jet acc(JetSpace::get(n, order));
          for (int p = 0; p < n; ++p) {
            for (int q = 0; q < n; ++q) {
              const Jet& gpq = ginv.at(p, q);
              acc.add_product(gpq, gv[(p * n + q) * ksize + k]);
              acc.sub_product(gpq * df[static_cast<size_t>(p)], tv[q * ksize + k]);
            }
          }
          out[k] = std::move(acc);
        }
        return out;
      });
}

TensorField weighted_divergence_adjoint(TensorField w) {
  TensorField grad = covariant_derivative(std::move(w));
  return TensorField::make(2, [grad = std::move(grad)](EvalContext& ctx, int order) {
    const JetTensor d = ctx.field(grad, order);
    const int n = d.dim();
    JetTensor out(JetSpace::get(n, order), n, 2);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) out.at(i, j) = -0.5 * (d.at(i, j) + d.at(j, i));
    }
    return out;
  });
}

TensorField drift_laplacian(TensorField t) {
  return weighted_divergence(covariant_derivative(std::move(t)));
}

TensorField curvature_action(TensorField h) {
  return TensorField::make(2, [h = std::move(h)](EvalContext& ctx, int order) {
    const int n = ctx.model().dim();
    const JetTensor hv = ctx.field(h, order);
    const JetTensor rm = ctx.riemann(order);
    const JetTensor ginv = ctx.metric_inv(order);
    const JetSpace& s = JetSpace::get(n, order);
    // h with both slots raised
    JetTensor hup(s, n, 2);
    {
      JetTensor tmp(s, n, 2);  // first slot raised
      for (int p = 0; p < n; ++p) {
        for (int b = 0; b < n; ++b) {
          Jet acc(s);
          for (int a = 0; a < n; ++a) acc.add_product(ginv.at(p, a), hv.at(a, b));
          tmp.at(p, b) = std::move(acc);
        }
      }
      for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
          Jet acc(s);
          for (int b = 0; b < n; ++b) acc.add_product(ginv.at(q, b), tmp.at(p, b));
          hup.at(p, q) = std::move(acc);
        }
      }
    }
    JetTensor out(s, n, 2);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        Jet acc(s);
        for (int p = 0; p < n; ++p) {
          for (int q = 0; q < n; ++q) acc.add_product(rm.at(p, i, q, j), hup.at(p, q));
        }
        out.at(i, j) = std::move(acc);
      }
    }
    return out;
  });
}

TensorField bakry_emery_ricci_field() {
  TensorField hess_f = hessian(potential_field());
  return TensorField::make(2, [hess_f = std::move(hess_f)](EvalContext& ctx, int order) {
    return ctx.ricci(order) + ctx.field(hess_f, order);
  });
}

TensorField soliton_residual_field() {
  TensorField ber = bakry_emery_ricci_field();
  return TensorField::make(2, [ber = std::move(ber)](EvalContext& ctx, int order) {
    return ctx.field(ber, order) -
           ctx.metric(order) * (1.0 / (2.0 * ctx.model().tau));
  });
}

TensorField metric_anticommutator(TensorField a, TensorField b) {
  return TensorField::make(
      2, [a = std::move(a), b = std::move(b)](EvalContext& ctx, int order) {
        const int n = ctx.model().dim();
        const JetTensor av = ctx.field(a, order);
        const JetTensor bv = ctx.field(b, order);
        const JetTensor ginv = ctx.metric_inv(order);
        const JetSpace& s = JetSpace::get(n, order);
        JetTensor out(s, n, 2);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            Jet acc(s);
            for (int k = 0; k < n; ++k) {
              for (int l = 0; l < n; ++l) {
                acc.add_product(ginv.at(k, l), av.at(i, k) * bv.at(l, j));
                acc.add_product(ginv.at(k, l), bv.at(i, k) * av.at(l, j));
              }
            }
            out.at(i, j) = std::move(acc);
          }
        }
        return out;
      });
}

TensorField one_form_action(TensorField sfield, TensorField w) {
  return TensorField::make(
      1, [sfield = std::move(sfield), w = std::move(w)](EvalContext& ctx, int order) {
        const int n = ctx.model().dim();
        const JetTensor sv = ctx.field(sfield, order);
        const JetTensor wv = ctx.field(w, order);
        const JetTensor ginv = ctx.metric_inv(order);
        const JetSpace& space = JetSpace::get(n, order);
        std::vector<Jet> wup(static_cast<size_t>(n), Jet(space));
        for (int j = 0; j < n; ++j) {
          for (int k = 0; k < n; ++k) wup[static_cast<size_t>(j)].add_product(ginv.at(j, k), wv.at(k));
        }
        JetTensor out(space, n, 1);
        for (int i = 0; i < n; ++i) {
          Jet acc(space);
          for (int j = 0; j < n; ++j) acc.add_product(sv.at(i, j), wup[static_cast<size_t>(j)]);
          out.at(i) = std::move(acc);
        }
        return out;
      });
}

TensorField inner_product_field(TensorField a, TensorField b) {
  const int r = a.rank();
  return TensorField::make(
      0, [a = std::move(a), b = std::move(b), r](EvalContext& ctx, int order) {
        const int n = ctx.model().dim();
        const JetSpace& s = JetSpace::get(n, order);
        const JetTensor av = ctx.field(a, order);
        const JetTensor bv = ctx.field(b, order);
        const JetTensor ginv = ctx.metric_inv(order);
        // raise all slots of b, one at a time
        std::vector<Jet> cur(static_cast<size_t>(bv.size()), Jet(s));
        for (int i = 0; i < bv.size(); ++i) cur[static_cast<size_t>(i)] = bv[i];
        int stride = 1;
        for (int slot = r - 1; slot >= 0; --slot) {
          std::vector<Jet> next(cur.size(), Jet(s));
          for (size_t flat = 0; flat < cur.size(); ++flat) {
            const int ia = static_cast<int>(flat / static_cast<size_t>(stride)) % n;
            const size_t base = flat - static_cast<size_t>(ia * stride);
            Jet& acc = next[flat];
            for (int j = 0; j < n; ++j) {
              acc.add_product(ginv.at(ia, j), cur[base + static_cast<size_t>(j * stride)]);
            }
          }
          cur.swap(next);
          stride *= n;
        }
        JetTensor out(s, n, 0);
        Jet acc(s);
        for (size_t i = 0; i < cur.size(); ++i) acc.add_product(av[static_cast<int>(i)], cur[i]);
        out.at() = std::move(acc);
        return out;
      });
}

TensorField trace_field(TensorField h) {
  return TensorField::make(0, [h = std::move(h)](EvalContext& ctx, int order) {
    const int n = ctx.model().dim();
    const JetSpace& s = JetSpace::get(n, order);
    const JetTensor hv = ctx.field(h, order);
    const JetTensor ginv = ctx.metric_inv(order);
    JetTensor out(s, n, 0);
    Jet acc(s);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) acc.add_product(ginv.at(i, j), hv.at(i, j));
    }
    out.at() = std::move(acc);
    return out;
  });
}

TensorField weighted_lichnerowicz(TensorField h) {
  TensorField dl = drift_laplacian(h);
  TensorField ca = curvature_action(h);
  TensorField anti = metric_anticommutator(bakry_emery_ricci_field(), h);
  return TensorField::make(
      2, [dl = std::move(dl), ca = std::move(ca), anti = std::move(anti)](EvalContext& ctx,
                                                                          int order) {
        return ctx.field(dl, order) + ctx.field(ca, order) * 2.0 - ctx.field(anti, order);
      });
}

TensorField weighted_lichnerowicz_shrinker_form(TensorField h) {
  TensorField dl = drift_laplacian(h);
  TensorField ca = curvature_action(h);
  return TensorField::make(
      2, [h, dl = std::move(dl), ca = std::move(ca)](EvalContext& ctx, int order) {
        return ctx.field(dl, order) + ctx.field(ca, order) * 2.0 -
               ctx.field(h, order) * (1.0 / ctx.model().tau);
      });
}

double integrate_dm(const ManifoldModel& m, const QuadratureGrid& grid, const TensorField& s) {
  double acc = 0.0;
  for (int node = 0; node < grid.size(); ++node) {
    EvalContext ctx(m, grid.nodes[node]);
    acc += grid.dm_weight[node] * ctx.field(s, 0).at().value();
  }
  return acc;
}

double integrate_dv(const ManifoldModel& m, const QuadratureGrid& grid, const TensorField& s) {
  double acc = 0.0;
  for (int node = 0; node < grid.size(); ++node) {
    EvalContext ctx(m, grid.nodes[node]);
    acc += grid.dv_weight[node] * ctx.field(s, 0).at().value();
  }
  return acc;
}

double sup_field_norm(const ManifoldModel& m, const QuadratureGrid& grid,
                      std::span<const int> nodes, const TensorField& t) {
  double worst = 0.0;
  for (int node : nodes) {
    EvalContext ctx(m, grid.nodes[node]);
    const JetTensor v = ctx.field(t, 0);
    const JetTensor ginv = ctx.metric_inv(0);
    worst = std::max(worst, std::sqrt(std::fabs(metric_norm_sq_value(ginv, v))));
  }
  return worst;
}

EntropyReport entropy_report(const ManifoldModel& m, const QuadratureGrid& grid,
                             std::span<const int> check) {
  EntropyReport rep;
  rep.shrinker_exact = m.soliton.exact;
  const double tau = m.tau;
  const int n = m.dim();

  const TensorField f = potential_field();
  const TensorField df = differential(f);
  const TensorField grad_sq = inner_product_field(df, df);
  const TensorField r_field = scalar_curvature_field();
  const TensorField lap_f = trace_field(hessian(f));

  double entropy = 0.0;
  double f_mean = 0.0;
  for (int node = 0; node < grid.size(); ++node) {
    EvalContext ctx(m, grid.nodes[node]);
    const double fr = ctx.field(f, 0).at().value();
    const double rr = ctx.field(r_field, 0).at().value();
    const double gg = ctx.field(grad_sq, 0).at().value();
    entropy += grid.dm_weight[node] * (tau * (rr + gg) + fr - n);
    f_mean += grid.dm_weight[node] * fr;
  }
  rep.entropy = entropy;
  rep.minimizer_residual2 = std::fabs(f_mean - 0.5 * n - entropy);

  const TensorField sres = soliton_residual_field();
  double worst1 = 0.0;
  double worst_sol = 0.0;
  for (int node : check) {
    EvalContext ctx(m, grid.nodes[node]);
    const double fr = ctx.field(f, 0).at().value();
    const double rr = ctx.field(r_field, 0).at().value();
    const double gg = ctx.field(grad_sq, 0).at().value();
    const double lf = ctx.field(lap_f, 0).at().value();
    worst1 = std::max(worst1, std::fabs(tau * (-2.0 * lf + gg - rr) - fr + n + entropy));
    const JetTensor sval = ctx.field(sres, 0);
    worst_sol = std::max(
        worst_sol, std::sqrt(std::fabs(metric_norm_sq_value(ctx.metric_inv(0), sval))));
  }
  rep.minimizer_residual1 = worst1;
  rep.shrinker_residual_sup = worst_sol;
  return rep;
}

double entropy_first_variation(const ManifoldModel& m, const QuadratureGrid& grid,
                               const TensorField& h) {
  const TensorField integrand = inner_product_field(h, soliton_residual_field());
  return -m.tau * integrate_dm(m, grid, integrand);
}

IdentityResidualSet useful_identity_residuals(const ManifoldModel& m, const QuadratureGrid& grid,
                                              std::span<const int> check) {
  if (!m.soliton.exact)
    throw ConfigError(
        "the structural shrinker identities hold only on exact shrinker models; model '" +
        m.name + "' is approximate");
  IdentityResidualSet out;
  const double tau = m.tau;

  const TensorField ric = ricci_field();
  const TensorField r_field = scalar_curvature_field();

  {
    IdentityResidual e;
    e.key = "T2.3a";
    e.what = "weighted divergence of the Ricci tensor vanishes";
    e.value = sup_field_norm(m, grid, check, weighted_divergence(ric));
    out.push_back(e);
  }
  {
    IdentityResidual e;
    e.key = "T2.3b";
    e.what = "weighted divergence of the curvature tensor vanishes";
    TensorField rm = TensorField::make(
        4, [](EvalContext& ctx, int order) { return ctx.riemann(order); });
    e.value = sup_field_norm(m, grid, check, weighted_divergence(std::move(rm)));
    out.push_back(e);
  }
  {
    IdentityResidual e;
    e.key = "T2.3c";
    e.what = "the Ricci tensor is in the kernel of the weighted Lichnerowicz operator";
    e.value = sup_field_norm(m, grid, check, weighted_lichnerowicz(ric));
    out.push_back(e);
  }
  {
    IdentityResidual e;
    e.key = "T2.3d";
    e.what = "drift Laplacian of scalar curvature equals R/tau - 2|Ric|^2";
    TensorField ric_sq = inner_product_field(ric, ric);
    TensorField res = TensorField::make(
        0, [dl = drift_laplacian(r_field), r_field, ric_sq, tau](EvalContext& ctx, int order) {
          JetTensor v = ctx.field(dl, order);
          v.at() -= ctx.field(r_field, order).at() * (1.0 / tau);
          v.at() += 2.0 * ctx.field(ric_sq, order).at();
          return v;
        });
    e.value = sup_field_norm(m, grid, check, res);
    out.push_back(e);
  }
  {
    IdentityResidual e;
    e.key = "T2.3e";
    const TensorField f = potential_field();
    const TensorField lhs = TensorField::make(
        0, [dl = drift_laplacian(f), f, tau](EvalContext& ctx, int order) {
          JetTensor v = ctx.field(dl, order);
          v.at() += ctx.field(f, order).at() * (1.0 / tau);
          return v;
        });
    const double fitted = integrate_dm(m, grid, lhs);
    TensorField res = TensorField::make(0, [lhs, fitted](EvalContext& ctx, int order) {
      JetTensor v = ctx.field(lhs, order);
      v.at() -= fitted;
      return v;
    });
    e.what = "drift Laplacian of the weight exponent is -f/tau plus a constant (fit " +
             std::to_string(fitted) + ")";
    e.value = sup_field_norm(m, grid, check, res);
    out.push_back(e);
  }
  {
    IdentityResidual e;
    e.key = "T2.3f";
    e.what = "integral identity: mean of R equals 2 tau times the mean of |Ric|^2";
    const double lhs = integrate_dm(m, grid, r_field);
    const double rhs = 2.0 * tau * integrate_dm(m, grid, inner_product_field(ric, ric));
    e.value = std::fabs(lhs - rhs);
    out.push_back(e);
  }
  return out;
}

IdentityResidualSet commutator_residuals(const ManifoldModel& m, const QuadratureGrid& grid,
                                         std::span<const int> check, const TensorField& a,
                                         const TensorField& w, const TensorField& h) {
  IdentityResidualSet out;
  const double tau = m.tau;
  const double half_inv_tau = 1.0 / (2.0 * tau);
  const bool exact = m.soliton.exact;

  auto add = [&](const std::string& key, const std::string& what, const TensorField& res,
                 bool shrinker_only) {
    IdentityResidual e;
    e.key = key;
    e.what = what;
    if (shrinker_only && !exact) {
      e.skipped = true;
      e.reason = "identity requires an exact shrinker model";
    } else {
      e.value = sup_field_norm(m, grid, check, res);
    }
    out.push_back(e);
  };

  // Shared sub-expressions (shared handles make the per-node caches effective).
  const TensorField da = differential(a);
  const TensorField lap_a = drift_laplacian(a);
  const TensorField lap_w = drift_laplacian(w);
  const TensorField div_w = weighted_divergence(w);
  const TensorField lie_w = lie_metric(w);
  const TensorField div_h = weighted_divergence(h);
  const TensorField lich_h = weighted_lichnerowicz(h);
  const TensorField ber = bakry_emery_ricci_field();

  add("T3.1", "drift Laplacian commutes with the differential up to da/(2 tau)",
      TensorField::make(1,
                        [x = drift_laplacian(da), y = differential(lap_a), da,
                         half_inv_tau](EvalContext& ctx, int order) {
                          return ctx.field(x, order) - ctx.field(y, order) -
                                 ctx.field(da, order) * half_inv_tau;
                        }),
      true);

  add("T3.2",
      "weighted divergence of the drift Laplacian of a 1-form equals the drift Laplacian of its "
      "weighted divergence plus div_f w/(2 tau)",
      TensorField::make(0,
                        [x = weighted_divergence(lap_w), y = drift_laplacian(div_w), div_w,
                         half_inv_tau](EvalContext& ctx, int order) {
                          return ctx.field(x, order) - ctx.field(y, order) -
                                 ctx.field(div_w, order) * half_inv_tau;
                        }),
      true);

  add("T3.3",
      "weighted Lichnerowicz of a metric Lie derivative plus its 1/(2 tau) multiple equals the "
      "Lie derivative along the drift Laplacian of the form",
      TensorField::make(2,
                        [x = weighted_lichnerowicz(lie_w), lie_w, y = lie_metric(lap_w),
                         half_inv_tau](EvalContext& ctx, int order) {
                          return ctx.field(x, order) + ctx.field(lie_w, order) * half_inv_tau -
                                 ctx.field(y, order);
                        }),
      true);

  add("C3.4",
      "adjoint divergence of the drift Laplacian equals the weighted Lichnerowicz of the adjoint "
      "divergence plus its 1/(2 tau) multiple",
      TensorField::make(2,
                        [x = weighted_divergence_adjoint(lap_w),
                         y = weighted_lichnerowicz(weighted_divergence_adjoint(w)),
                         z = weighted_divergence_adjoint(w), half_inv_tau](EvalContext& ctx,
                                                                           int order) {
                          return ctx.field(x, order) - ctx.field(y, order) -
                                 ctx.field(z, order) * half_inv_tau;
                        }),
      true);

  add("T3.5",
      "drift Laplacian of the weighted divergence of a 2-tensor equals the weighted divergence "
      "of its weighted Lichnerowicz plus div_f h/(2 tau)",
      TensorField::make(1,
                        [x = drift_laplacian(div_h), y = weighted_divergence(lich_h), div_h,
                         half_inv_tau](EvalContext& ctx, int order) {
                          return ctx.field(x, order) - ctx.field(y, order) -
                                 ctx.field(div_h, order) * half_inv_tau;
                        }),
      true);

  add("T3.6",
      "drift Laplacian of the double weighted divergence equals the double weighted divergence "
      "of the weighted Lichnerowicz",
      TensorField::make(0,
                        [x = drift_laplacian(weighted_divergence(div_h)),
                         y = weighted_divergence(weighted_divergence(lich_h))](EvalContext& ctx,
                                                                               int order) {
                          return ctx.field(x, order) - ctx.field(y, order);
                        }),
      true);

  add("T3.7",
      "adjoint divergence of the weighted divergence commutes with the weighted Lichnerowicz",
      TensorField::make(2,
                        [x = weighted_divergence_adjoint(weighted_divergence(lich_h)),
                         y = weighted_lichnerowicz(weighted_divergence_adjoint(div_h))](
                            EvalContext& ctx, int order) {
                          return ctx.field(x, order) - ctx.field(y, order);
                        }),
      true);

  add("T4.1",
      "weighted divergence of the metric Lie derivative equals the drift Laplacian plus the "
      "differential of the weighted divergence plus w/(2 tau)",
      TensorField::make(1,
                        [x = weighted_divergence(lie_w), lap_w, y = differential(div_w), w,
                         half_inv_tau](EvalContext& ctx, int order) {
                          return ctx.field(x, order) - ctx.field(lap_w, order) -
                                 ctx.field(y, order) - ctx.field(w, order) * half_inv_tau;
                        }),
      true);

  add("G1",
      "general form on any metric: commuting the drift Laplacian past the differential leaves "
      "the Bakry-Emery action on the gradient",
      TensorField::make(1,
                        [x = drift_laplacian(da), y = differential(lap_a),
                         z = one_form_action(ber, da)](EvalContext& ctx, int order) {
                          return ctx.field(x, order) - ctx.field(y, order) - ctx.field(z, order);
                        }),
      false);

  add("G2",
      "general form on any metric: the weighted divergence of a metric Lie derivative minus the "
      "drift Laplacian and the differential of the weighted divergence equals the Bakry-Emery "
      "action on the vector",
      TensorField::make(1,
                        [x = weighted_divergence(lie_w), lap_w, y = differential(div_w),
                         z = one_form_action(ber, w)](EvalContext& ctx, int order) {
                          return ctx.field(x, order) - ctx.field(lap_w, order) -
                                 ctx.field(y, order) - ctx.field(z, order);
                        }),
      false);

  return out;
}

}  // namespace grs
