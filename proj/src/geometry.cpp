#include "grslab/geometry.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace grs {

namespace {

// Decode a row-major flat index into per-slot indices.
inline void decode(int flat, int dim, int rank, std::array<int, 8>& idx) {
  for (int a = rank - 1; a >= 0; --a) {
    idx[a] = flat % dim;
    flat /= dim;
  }
}

inline int slot_stride(int dim, int rank, int slot) {
  int s = 1;
  for (int a = rank - 1; a > slot; --a) s *= dim;
  return s;
}

}  // namespace

JetTensor covariant_derivative_value(EvalContext& ctx, const JetTensor& t, int order) {
  const int n = ctx.model().dim();
  const JetSpace& s = JetSpace::get(n, order);
  const int r = t.rank();
  const JetTensor t1 = (t.order() == order + 1) ? t : t.truncated(order + 1);
  JetTensor out(s, n, r + 1);
  if (r == 0) {
    for (int i = 0; i < n; ++i) out.at(i) = t1.at().partial(i);
    return out;
  }
  const JetTensor gamma = ctx.christoffel(order);
  const JetTensor tt = t1.truncated(order);
  const int tsize = t.size();
  std::array<int, 8> J{};
  std::array<int, 8> stride{};
  for (int a = 0; a < r; ++a) stride[a] = slot_stride(n, r, a);
  for (int flat = 0; flat < tsize; ++flat) {
    decode(flat, n, r, J);
    for (int i = 0; i < n; ++i) {
      Jet v = t1[flat].partial(i);
      for (int a = 0; a < r; ++a) {
        const int base = flat - J[a] * stride[a];
        for (int m = 0; m < n; ++m) {
          v.sub_product(gamma.at(m, i, J[a]), tt[base + m * stride[a]]);
        }
      }
      out[i * tsize + flat] = std::move(v);
    }
  }
  return out;
}

std::vector<double> tensor_values(const JetTensor& t) {
  std::vector<double> v(static_cast<size_t>(t.size()));
  for (int i = 0; i < t.size(); ++i) v[static_cast<size_t>(i)] = t[i].value();
  return v;
}

std::vector<double> raise_slot_values(const JetTensor& ginv, std::vector<double> vals, int dim,
                                      int rank, int slot) {
  const int stride = slot_stride(dim, rank, slot);
  std::vector<double> out(vals.size());
  for (size_t flat = 0; flat < vals.size(); ++flat) {
    const int ia = static_cast<int>(flat / static_cast<size_t>(stride)) % dim;
    const size_t base = flat - static_cast<size_t>(ia * stride);
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) {
      acc += ginv.at(ia, j).value() * vals[base + static_cast<size_t>(j * stride)];
    }
    out[flat] = acc;
  }
  return out;
}

double metric_norm_sq_value(const JetTensor& ginv, const JetTensor& t) {
  const int dim = ginv.dim();
  const int r = t.rank();
  std::vector<double> lower = tensor_values(t);
  std::vector<double> upper = lower;
  for (int a = 0; a < r; ++a) upper = raise_slot_values(ginv, std::move(upper), dim, r, a);
  double acc = 0.0;
  for (size_t i = 0; i < lower.size(); ++i) acc += lower[i] * upper[i];
  return acc;
}

TensorField scalar_field(ScalarFn fn) {
  return TensorField::make(0, [fn = std::move(fn)](EvalContext& ctx, int order) {
    JetTensor out(JetSpace::get(ctx.model().dim(), order), ctx.model().dim(), 0);
    out.at() = fn(ctx.coords(order));
    return out;
  });
}

TensorField constant_field(double v) {
  return TensorField::make(0, [v](EvalContext& ctx, int order) {
    const JetSpace& s = JetSpace::get(ctx.model().dim(), order);
    JetTensor out(s, ctx.model().dim(), 0);
    out.at() = Jet::constant(s, v);
    return out;
  });
}

TensorField metric_field() {
  return TensorField::make(2, [](EvalContext& ctx, int order) { return ctx.metric(order); });
}

TensorField ricci_field() {
  return TensorField::make(2, [](EvalContext& ctx, int order) { return ctx.ricci(order); });
}

TensorField factor_metric_field(int b) {
  return TensorField::make(2, [b](EvalContext& ctx, int order) {
    const ManifoldModel& m = ctx.model();
    const FactorBlock& blk = m.factors.at(static_cast<size_t>(b));
    const std::span<const Jet> coords = ctx.coords(order);
    const std::vector<Jet> comps =
        blk.metric(coords.subspan(static_cast<size_t>(blk.offset), static_cast<size_t>(blk.dim)));
    JetTensor out(JetSpace::get(m.dim(), order), m.dim(), 2);
    for (int i = 0; i < blk.dim; ++i) {
      for (int j = 0; j < blk.dim; ++j) {
        out.at(blk.offset + i, blk.offset + j) = comps[static_cast<size_t>(i * blk.dim + j)];
      }
    }
    return out;
  });
}

TensorField scaled(TensorField t, double c) {
  const int rank = t.rank();
  return TensorField::make(rank, [t = std::move(t), c](EvalContext& ctx, int order) {
    return ctx.field(t, order) * c;
  });
}

TensorField sum(TensorField a, TensorField b) {
  const int rank = a.rank();
  return TensorField::make(rank,
                           [a = std::move(a), b = std::move(b)](EvalContext& ctx, int order) {
                             return ctx.field(a, order) + ctx.field(b, order);
                           });
}

TensorField difference(TensorField a, TensorField b) {
  const int rank = a.rank();
  return TensorField::make(rank,
                           [a = std::move(a), b = std::move(b)](EvalContext& ctx, int order) {
                             return ctx.field(a, order) - ctx.field(b, order);
                           });
}

TensorField linear_combination(std::vector<TensorField> parts, std::vector<double> coef) {
  const int rank = parts.empty() ? 0 : parts.front().rank();
  return TensorField::make(
      rank, [parts = std::move(parts), coef = std::move(coef)](EvalContext& ctx, int order) {
        JetTensor acc;
        for (size_t i = 0; i < parts.size(); ++i) {
          if (coef[i] == 0.0) continue;
          JetTensor term = ctx.field(parts[i], order) * coef[i];
          if (acc.size() == 0) {
            acc = std::move(term);
          } else {
            acc += term;
          }
        }
        if (acc.size() == 0 && !parts.empty()) {
          acc = ctx.field(parts.front(), order) * 0.0;
        }
        return acc;
      });
}

TensorField scalar_times(TensorField a, TensorField t) {
  const int rank = t.rank();
  return TensorField::make(rank,
                           [a = std::move(a), t = std::move(t)](EvalContext& ctx, int order) {
                             const Jet s = ctx.field(a, order).at();
                             JetTensor out = ctx.field(t, order);
                             for (int i = 0; i < out.size(); ++i) out[i] = s * out[i];
                             return out;
                           });
}

TensorField sym_product(TensorField w, TensorField e) {
  return TensorField::make(2, [w = std::move(w), e = std::move(e)](EvalContext& ctx, int order) {
    const JetTensor a = ctx.field(w, order);
    const JetTensor b = ctx.field(e, order);
    const int n = a.dim();
    JetTensor out(JetSpace::get(ctx.model().dim(), order), n, 2);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        out.at(i, j) = 0.5 * (a.at(i) * b.at(j) + a.at(j) * b.at(i));
      }
    }
    return out;
  });
}

TensorField covariant_derivative(TensorField t) {
  const int rank = t.rank();
  return TensorField::make(rank + 1, [t = std::move(t)](EvalContext& ctx, int order) {
    return covariant_derivative_value(ctx, ctx.field(t, order + 1), order);
  });
}

TensorField differential(TensorField a) { return covariant_derivative(std::move(a)); }

TensorField hessian(TensorField a) { return covariant_derivative(differential(std::move(a))); }

TensorField lie_metric(TensorField omega) {
  TensorField grad = covariant_derivative(std::move(omega));
  return TensorField::make(2, [grad = std::move(grad)](EvalContext& ctx, int order) {
    const JetTensor d = ctx.field(grad, order);
    const int n = d.dim();
    JetTensor out(JetSpace::get(ctx.model().dim(), order), n, 2);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) out.at(i, j) = d.at(i, j) + d.at(j, i);
    }
    return out;
  });
}

TensorField potential_field() {
  return TensorField::make(0, [](EvalContext& ctx, int order) {
    JetTensor out(JetSpace::get(ctx.model().dim(), order), ctx.model().dim(), 0);
    out.at() = ctx.potential(order);
    return out;
  });
}

TensorField scalar_curvature_field() {
  return TensorField::make(0, [](EvalContext& ctx, int order) {
    JetTensor out(JetSpace::get(ctx.model().dim(), order), ctx.model().dim(), 0);
    out.at() = ctx.scalar_curvature(order);
    return out;
  });
}

double commutator_defect(EvalContext& ctx, const TensorField& t) {
  const int n = ctx.model().dim();
  const int r = t.rank();
  const JetTensor T2 = ctx.field(t, 2);
  const JetTensor D1 = covariant_derivative_value(ctx, T2, 1);
  const JetTensor D2 = covariant_derivative_value(ctx, D1, 0);  // layout (i, j, K)
  const JetTensor rm = ctx.riemann(0);
  const JetTensor ginv = ctx.metric_inv(0);
  const JetSpace& s0 = JetSpace::get(n, 0);
  const JetTensor T0 = T2.truncated(0);

  const int tsize = T0.size();
  JetTensor res(s0, n, r + 2);
  std::array<int, 8> K{};
  std::array<int, 8> stride{};
  for (int a = 0; a < r; ++a) stride[a] = slot_stride(n, r, a);
  for (int flat = 0; flat < tsize; ++flat) {
    decode(flat, n, r, K);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double v = D2[(i * n + j) * tsize + flat].value() - D2[(j * n + i) * tsize + flat].value();
        for (int a = 0; a < r; ++a) {
          const int base = flat - K[a] * stride[a];
          for (int p = 0; p < n; ++p) {
            for (int m = 0; m < n; ++m) {
              v -= rm.at(i, j, K[a], p).value() * ginv.at(p, m).value() *
                   T0[base + m * stride[a]].value();
            }
          }
        }
        res[(i * n + j) * tsize + flat] = Jet::constant(s0, v);
      }
    }
  }
  return std::sqrt(std::fabs(metric_norm_sq_value(ginv, res)));
}

double metric_symmetry_defect(EvalContext& ctx) {
  const JetTensor g = ctx.metric(0);
  const int n = g.dim();
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      worst = std::max(worst, std::fabs(g.at(i, j).value() - g.at(j, i).value()));
    }
  }
  return worst;
}

double curvature_symmetry_defect(EvalContext& ctx) {
  const JetTensor rm = ctx.riemann(0);
  const int n = rm.dim();
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          const double r = rm.at(i, j, k, l).value();
          worst = std::max(worst, std::fabs(r + rm.at(j, i, k, l).value()));
          worst = std::max(worst, std::fabs(r + rm.at(i, j, l, k).value()));
          worst = std::max(worst, std::fabs(r - rm.at(k, l, i, j).value()));
          worst = std::max(worst, std::fabs(r + rm.at(i, k, l, j).value() +
                                            rm.at(i, l, j, k).value()));
        }
      }
    }
  }
  return worst;
}

}  // namespace grs
