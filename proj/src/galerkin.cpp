#include "grslab/galerkin.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "grslab/errors.hpp"
#include "grslab/geometry.hpp"
#include "grslab/weighted.hpp"

namespace grs {
namespace {

// Packed lower-triangle index for i >= j.
inline int tri_index(int i, int j) { return i * (i + 1) / 2 + j; }
inline int tri_size(int n) { return n * (n + 1) / 2; }

// ---------------------------------------------------------------------------
// Monomial machinery.

// Exponent vectors with the given total degree, lexicographically descending
// in the leading variable (so for degree 2 in three variables:
// (2,0,0), (1,1,0), (1,0,1), (0,2,0), (0,1,1), (0,0,2)).
void exponents_of_degree(int nvars, int degree, std::vector<int>& cur, int pos,
                         std::vector<std::vector<int>>& out) {
  if (pos == nvars - 1) {
    cur[pos] = degree;
    out.push_back(cur);
    return;
  }
  for (int e = degree; e >= 0; --e) {
    cur[pos] = e;
    exponents_of_degree(nvars, degree - e, cur, pos + 1, out);
  }
}

std::string monomial_tag(std::span<const int> expo) {
  std::string tag;
  for (size_t i = 0; i < expo.size(); ++i) {
    if (expo[i] == 0) continue;
    if (!tag.empty()) tag += "*";
    tag += "u" + std::to_string(i);
    if (expo[i] > 1) tag += "^" + std::to_string(expo[i]);
  }
  return tag.empty() ? "1" : tag;
}

// Product of powers of the shared ambient coordinate fields.  Sharing the
// handles keeps the per-node ambient evaluations memoized across the whole
// family.
TensorField monomial_field(std::vector<TensorField> amb, std::vector<int> expo) {
  return TensorField::make(0, [amb = std::move(amb), expo = std::move(expo)](
                                  EvalContext& ctx, int order) {
    Jet acc;
    bool first = true;
    for (size_t i = 0; i < expo.size(); ++i) {
      if (expo[i] == 0) continue;
      Jet p = pow(ctx.field(amb[i], order).at(), expo[i]);
      if (first) {
        acc = std::move(p);
        first = false;
      } else {
        acc = acc * p;
      }
    }
    if (first) acc = Jet::constant(ctx.coords(order)[0].space(), 1.0);
    JetTensor t(acc.space(), static_cast<int>(ctx.coords(order).size()), 0);
    t.at() = std::move(acc);
    return t;
  });
}

std::vector<TensorField> ambient_handles(const ManifoldModel& m) {
  std::vector<TensorField> amb;
  amb.reserve(m.ambient.size());
  for (const ScalarFn& fn : m.ambient) amb.push_back(scalar_field(fn));
  return amb;
}

struct MonomialEntry {
  TensorField field;
  std::string tag;
  int degree = 0;
};

// Monomials of degree lo..hi in the listed order (degree-major, lex within).
std::vector<MonomialEntry> monomials_in_range(const std::vector<TensorField>& amb, int lo,
                                              int hi) {
  const int nvars = static_cast<int>(amb.size());
  std::vector<MonomialEntry> list;
  for (int d = lo; d <= hi; ++d) {
    std::vector<std::vector<int>> expos;
    std::vector<int> cur(static_cast<size_t>(nvars), 0);
    exponents_of_degree(nvars, d, cur, 0, expos);
    for (std::vector<int>& e : expos) {
      MonomialEntry entry;
      entry.tag = monomial_tag(e);
      entry.degree = d;
      entry.field = monomial_field(amb, std::move(e));
      list.push_back(std::move(entry));
    }
  }
  return list;
}

// Ambient index ranges carrying one round factor each; a model without factor
// blocks is treated as a single block over all ambient coordinates.
std::vector<std::pair<int, int>> ambient_slices(const ManifoldModel& m) {
  std::vector<std::pair<int, int>> slices;
  if (m.factors.empty()) {
    slices.emplace_back(0, static_cast<int>(m.ambient.size()));
    return slices;
  }
  int start = 0;
  for (const FactorBlock& fb : m.factors) {
    slices.emplace_back(start, fb.dim + 1);
    start += fb.dim + 1;
  }
  return slices;
}

// ---------------------------------------------------------------------------
// Dense pointwise linear algebra on tensor values (dimension <= 4).

constexpr int kMaxDim = 4;
using Mat = std::array<double, kMaxDim * kMaxDim>;
using Vec = std::array<double, kMaxDim>;

inline void tensor_values2(const JetTensor& t, int d, Mat& out) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out[i * d + j] = t.at(i, j).value();
}

// out = ginv * a * ginv (both indices raised).
inline void raise_both(const Mat& ginv, const Mat& a, int d, Mat& out) {
  Mat tmp;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += ginv[i * d + k] * a[k * d + j];
      tmp[i * d + j] = s;
    }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += tmp[i * d + k] * ginv[j * d + k];
      out[i * d + j] = s;
    }
}

inline double dot_values2(const Mat& raised, const Mat& b, int d) {
  double s = 0.0;
  for (int i = 0; i < d * d; ++i) s += raised[i] * b[i];
  return s;
}

inline void raise_one(const Mat& ginv, const Vec& v, int d, Vec& out) {
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += ginv[i * d + k] * v[k];
    out[i] = s;
  }
}

inline double dot_values1(const Vec& raised, const Vec& b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += raised[i] * b[i];
  return s;
}

// Flat jet-coefficient indices of the first-order terms, one per chart axis
// (identical across jet orders for a fixed variable count).
std::vector<int> first_order_flats(int nvars) {
  const JetSpace& s = JetSpace::get(nvars, 1);
  std::vector<int> flats(static_cast<size_t>(nvars));
  std::vector<int> alpha(static_cast<size_t>(nvars), 0);
  for (int a = 0; a < nvars; ++a) {
    alpha[static_cast<size_t>(a)] = 1;
    flats[static_cast<size_t>(a)] = s.index(alpha);
    alpha[static_cast<size_t>(a)] = 0;
  }
  return flats;
}

// Sign convention for eigenvectors and basis members: the entry of largest
// magnitude is positive; the first such entry wins ties.
void canonicalize_sign(Eigen::VectorXd& v) {
  int arg = 0;
  double best = -1.0;
  for (int i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best + 1e-14 * std::max(best, 1.0)) {
      best = a;
      arg = i;
    }
  }
  if (v[arg] < 0.0) v = -v;
}

std::string dominant_tag(const Eigen::VectorXd& v, const OrthoBasis& basis) {
  int arg = 0;
  double best = -1.0;
  for (int i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  return basis.provenance[static_cast<size_t>(arg)];
}

// Restrict a raw-indexed coefficient matrix to its kept rows.
Eigen::MatrixXd kept_rows(const Eigen::MatrixXd& coef, const std::vector<int>& kept) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(kept.size()), coef.cols());
  for (size_t r = 0; r < kept.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = coef.row(kept[r]);
  return out;
}

Eigen::MatrixXd unpack_triangle(std::span<const double> packed, int n) {
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      out(i, j) = packed[static_cast<size_t>(tri_index(i, j))];
      out(j, i) = out(i, j);
    }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Families.

FieldFamily scalar_monomials(const ManifoldModel& m, int degree_cap) {
  if (degree_cap < 0) throw ConfigError("scalar basis degree cap must be nonnegative");
  std::vector<TensorField> amb = ambient_handles(m);
  FieldFamily fam;
  for (MonomialEntry& e : monomials_in_range(amb, 0, degree_cap)) {
    fam.fields.push_back(std::move(e.field));
    fam.provenance.push_back(e.tag);
    fam.degree.push_back(e.degree);
    fam.image_seed.push_back(0);
  }
  return fam;
}

FieldFamily tensor_generators(const ManifoldModel& m, int L) {
  if (L < 0) throw ConfigError("tensor truncation level must be nonnegative");
  std::vector<TensorField> amb = ambient_handles(m);
  FieldFamily fam;
  auto add = [&fam](TensorField f, std::string tag, int degree, bool image) {
    fam.fields.push_back(std::move(f));
    fam.provenance.push_back(std::move(tag));
    fam.degree.push_back(degree);
    fam.image_seed.push_back(image ? 1 : 0);
  };

  // 1. Hessians of monomials (image sector: hess a = -divadj(da)).
  for (MonomialEntry& e : monomials_in_range(amb, 1, L + 1)) {
    add(hessian(e.field), "hess(" + e.tag + ")", e.degree, true);
  }

  // 2. Symmetrized rotation derivatives of the metric, one per ambient
  //    coordinate pair within a factor (image sector; vanish on round
  //    factors and are dropped there as dependent).
  for (const auto& [start, len] : ambient_slices(m)) {
    for (int i = start; i < start + len; ++i)
      for (int j = i + 1; j < start + len; ++j) {
        TensorField w = difference(scalar_times(amb[static_cast<size_t>(i)],
                                                differential(amb[static_cast<size_t>(j)])),
                                   scalar_times(amb[static_cast<size_t>(j)],
                                                differential(amb[static_cast<size_t>(i)])));
        add(scaled(weighted_divergence_adjoint(w), -2.0),
            "liemetric(u" + std::to_string(i) + ",u" + std::to_string(j) + ")", 2, true);
      }
  }

  // 3. Factor metrics.
  std::vector<std::pair<TensorField, std::string>> metrics;
  if (m.factors.size() >= 2) {
    for (size_t b = 0; b < m.factors.size(); ++b)
      metrics.emplace_back(factor_metric_field(static_cast<int>(b)),
                           "metric[" + std::to_string(b) + "]");
  } else {
    metrics.emplace_back(metric_field(), "metric");
  }
  for (auto& [f, tag] : metrics) add(f, tag, 0, false);

  // 4. Monomial multiples of the factor metrics.
  for (MonomialEntry& e : monomials_in_range(amb, 1, L)) {
    for (auto& [f, tag] : metrics) add(scalar_times(e.field, f), e.tag + "*" + tag, e.degree, false);
  }

  // 5. Monomial multiples of symmetrized ambient differential pairs.
  if (L >= 1) {
    const int namb = static_cast<int>(amb.size());
    for (MonomialEntry& e : monomials_in_range(amb, 0, L - 1)) {
      for (int i = 0; i < namb; ++i)
        for (int j = i; j < namb; ++j) {
          TensorField pair = sym_product(differential(amb[static_cast<size_t>(i)]),
                                         differential(amb[static_cast<size_t>(j)]));
          std::string tag = "du" + std::to_string(i) + ".du" + std::to_string(j);
          if (e.degree == 0) {
            add(std::move(pair), "(" + tag + ")", 2, false);
          } else {
            add(scalar_times(e.field, std::move(pair)), e.tag + "*(" + tag + ")", e.degree + 2,
                false);
          }
        }
    }
  }
  return fam;
}

FieldFamily one_form_family(const ManifoldModel& m, int L) {
  if (L < 0) throw ConfigError("tensor truncation level must be nonnegative");
  std::vector<TensorField> amb = ambient_handles(m);
  const int namb = static_cast<int>(amb.size());
  FieldFamily fam;
  auto add = [&fam](TensorField f, std::string tag, int degree) {
    fam.fields.push_back(std::move(f));
    fam.provenance.push_back(std::move(tag));
    fam.degree.push_back(degree);
    fam.image_seed.push_back(0);
  };
  // Monomial multiples of coordinate differentials (nonconstant monomials;
  // the constant multiples are the degree-one members of the next group).
  for (MonomialEntry& e : monomials_in_range(amb, 1, L)) {
    for (int c = 0; c < namb; ++c)
      add(scalar_times(e.field, differential(amb[static_cast<size_t>(c)])),
          e.tag + "*du" + std::to_string(c), e.degree + 1);
  }
  // Differentials of monomials.
  for (MonomialEntry& e : monomials_in_range(amb, 1, L + 1)) {
    add(differential(e.field), "d(" + e.tag + ")", e.degree);
  }
  // Ambient rotation generators per factor.
  for (const auto& [start, len] : ambient_slices(m)) {
    for (int i = start; i < start + len; ++i)
      for (int j = i + 1; j < start + len; ++j)
        add(difference(scalar_times(amb[static_cast<size_t>(i)],
                                    differential(amb[static_cast<size_t>(j)])),
                       scalar_times(amb[static_cast<size_t>(j)],
                                    differential(amb[static_cast<size_t>(i)]))),
            "rot(u" + std::to_string(i) + ",u" + std::to_string(j) + ")", 2);
  }
  return fam;
}

// ---------------------------------------------------------------------------
// Gram-space orthonormalization.

OrthoBasis gram_orthonormalize(const Eigen::MatrixXd& gram, const FieldFamily& family,
                               double drop_tol) {
  const int n = static_cast<int>(gram.rows());
  if (gram.cols() != n || family.count() != n)
    throw BuildError("Gram matrix and field family sizes disagree");
  OrthoBasis basis;
  std::vector<Eigen::VectorXd> cols;
  std::vector<Eigen::VectorXd> gram_cols;  // gram * cols[j], cached
  // Residuals are judged against the family's scale, not the member's own
  // norm: an identically-vanishing generator has a tiny positive diagonal
  // from roundoff, and normalizing it would inject pure noise into the basis.
  const double scale = gram.diagonal().maxCoeff();
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    c[k] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (size_t j = 0; j < cols.size(); ++j) {
        const double proj = c.dot(gram_cols[j]);
        c -= proj * cols[j];
      }
    }
    const double base = gram(k, k);
    const double n2 = std::max(c.dot(gram * c), 0.0);
    if (!(base > 0.0) || n2 <= drop_tol * scale) {
      basis.dropped.push_back(family.provenance[static_cast<size_t>(k)]);
      continue;
    }
    c /= std::sqrt(n2);
    basis.kept.push_back(k);
    basis.provenance.push_back(family.provenance[static_cast<size_t>(k)]);
    basis.image_seed.push_back(family.image_seed[static_cast<size_t>(k)]);
    cols.push_back(c);
    gram_cols.push_back(gram * c);
  }
  basis.coef.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) basis.coef.col(static_cast<Eigen::Index>(j)) = cols[j];
  return basis;
}

// ---------------------------------------------------------------------------
// Scalar system.

ScalarSystem assemble_scalar_system(const ManifoldModel& m, const QuadratureGrid& grid,
                                    int degree_cap, ExecPolicy policy) {
  constexpr double kDropTol = 1e-10;
  ScalarSystem sys;
  sys.degree_cap = degree_cap;
  sys.raw = scalar_monomials(m, degree_cap);
  const int nraw = sys.raw.count();
  const int dim = m.dim();

  // Pass 1: value Gram of the raw monomials.
  std::vector<double> packed(static_cast<size_t>(tri_size(nraw)), 0.0);
  accumulate_over_nodes(
      m, grid, packed,
      [&](int node, EvalContext& ctx, std::span<double> out) {
        const double w = grid.dm_weight[static_cast<size_t>(node)];
        std::vector<double> vals(static_cast<size_t>(nraw));
        for (int r = 0; r < nraw; ++r)
          vals[static_cast<size_t>(r)] = ctx.field(sys.raw.fields[static_cast<size_t>(r)], 0).at().value();
        for (int i = 0; i < nraw; ++i)
          for (int j = 0; j <= i; ++j)
            out[static_cast<size_t>(tri_index(i, j))] +=
                w * vals[static_cast<size_t>(i)] * vals[static_cast<size_t>(j)];
      },
      policy);
  const Eigen::MatrixXd gram = unpack_triangle(packed, nraw);
  sys.basis = gram_orthonormalize(gram, sys.raw, kDropTol);
  const int z = sys.basis.count();
  if (z == 0) throw BuildError("scalar basis is empty after orthonormalization");

  // Pass 2: drift-Laplacian matrix, gradient Gram, and a Gram recheck over
  // the kept raw members.
  std::vector<TensorField> kept_fields;
  std::vector<TensorField> drift_fields;
  for (int k : sys.basis.kept) {
    kept_fields.push_back(sys.raw.fields[static_cast<size_t>(k)]);
    drift_fields.push_back(drift_laplacian(sys.raw.fields[static_cast<size_t>(k)]));
  }
  const std::vector<int> d1 = first_order_flats(dim);
  const size_t n_op = static_cast<size_t>(z) * static_cast<size_t>(z);
  const size_t n_tri = static_cast<size_t>(tri_size(z));
  std::vector<double> acc(n_op + 2 * n_tri, 0.0);
  accumulate_over_nodes(
      m, grid, acc,
      [&](int node, EvalContext& ctx, std::span<double> out) {
        const double w = grid.dm_weight[static_cast<size_t>(node)];
        Mat ginv;
        tensor_values2(ctx.metric_inv(0), dim, ginv);
        std::vector<double> vals(static_cast<size_t>(z));
        std::vector<double> dl(static_cast<size_t>(z));
        std::vector<Vec> grads(static_cast<size_t>(z));
        std::vector<Vec> raised(static_cast<size_t>(z));
        for (int r = 0; r < z; ++r) {
          const JetTensor jt = ctx.field(kept_fields[static_cast<size_t>(r)], 2);
          const Jet& jr = jt.at();
          vals[static_cast<size_t>(r)] = jr.value();
          for (int a = 0; a < dim; ++a)
            grads[static_cast<size_t>(r)][static_cast<size_t>(a)] =
                jr.coeff(d1[static_cast<size_t>(a)]);
          raise_one(ginv, grads[static_cast<size_t>(r)], dim, raised[static_cast<size_t>(r)]);
          dl[static_cast<size_t>(r)] =
              ctx.field(drift_fields[static_cast<size_t>(r)], 0).at().value();
        }
        std::span<double> op = out.subspan(0, n_op);
        std::span<double> gg = out.subspan(n_op, n_tri);
        std::span<double> vg = out.subspan(n_op + n_tri, n_tri);
        for (int i = 0; i < z; ++i) {
          for (int j = 0; j < z; ++j)
            op[static_cast<size_t>(i * z + j)] +=
                w * vals[static_cast<size_t>(i)] * dl[static_cast<size_t>(j)];
          for (int j = 0; j <= i; ++j) {
            gg[static_cast<size_t>(tri_index(i, j))] +=
                w * dot_values1(raised[static_cast<size_t>(i)], grads[static_cast<size_t>(j)], dim);
            vg[static_cast<size_t>(tri_index(i, j))] +=
                w * vals[static_cast<size_t>(i)] * vals[static_cast<size_t>(j)];
          }
        }
      },
      policy);

  const Eigen::MatrixXd ck = kept_rows(sys.basis.coef, sys.basis.kept);
  Eigen::MatrixXd op_raw(z, z);
  for (int i = 0; i < z; ++i)
    for (int j = 0; j < z; ++j) op_raw(i, j) = acc[static_cast<size_t>(i * z + j)];
  const Eigen::MatrixXd grad_raw =
      unpack_triangle(std::span<const double>(acc).subspan(n_op, n_tri), z);
  const Eigen::MatrixXd vg_raw =
      unpack_triangle(std::span<const double>(acc).subspan(n_op + n_tri, n_tri), z);

  const Eigen::MatrixXd op_unsym = ck.transpose() * op_raw * ck;
  sys.grad_gram = ck.transpose() * grad_raw * ck;
  sys.sym_defect = (op_unsym - op_unsym.transpose()).cwiseAbs().maxCoeff();
  sys.op_drift = 0.5 * (op_unsym + op_unsym.transpose());
  sys.adjoint_defect = (sys.op_drift + sys.grad_gram).cwiseAbs().maxCoeff();
  sys.gram_defect =
      (ck.transpose() * vg_raw * ck - Eigen::MatrixXd::Identity(z, z)).cwiseAbs().maxCoeff();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.op_drift);
  if (eig.info() != Eigen::Success) throw BuildError("scalar eigen-decomposition failed");
  sys.eigenvalues = eig.eigenvalues();
  sys.eigenvectors = eig.eigenvectors();
  sys.eigen_residual = 0.0;
  for (int i = 0; i < z; ++i) {
    Eigen::VectorXd v = sys.eigenvectors.col(i);
    canonicalize_sign(v);
    sys.eigenvectors.col(i) = v;
    sys.eigen_residual = std::max(
        sys.eigen_residual, (sys.op_drift * v - sys.eigenvalues[i] * v).norm());
  }
  return sys;
}

// ---------------------------------------------------------------------------
// Tensor system.

TensorSystem assemble_tensor_system(const ManifoldModel& m, const QuadratureGrid& grid,
                                    const ScalarSystem& scalars, int L, ExecPolicy policy) {
  constexpr double kDropTol = 1e-10;
  if (scalars.degree_cap < L + 2)
    throw ConfigError("scalar basis degree cap must be at least L + 2 for the divergence couplings");
  TensorSystem sys;
  sys.L = L;
  sys.raw = tensor_generators(m, L);
  const int nraw = sys.raw.count();
  const int dim = m.dim();

  // Pass 1: value Gram of the raw generators.
  std::vector<double> packed(static_cast<size_t>(tri_size(nraw)), 0.0);
  accumulate_over_nodes(
      m, grid, packed,
      [&](int node, EvalContext& ctx, std::span<double> out) {
        const double w = grid.dm_weight[static_cast<size_t>(node)];
        Mat ginv;
        tensor_values2(ctx.metric_inv(0), dim, ginv);
        std::vector<Mat> vals(static_cast<size_t>(nraw));
        std::vector<Mat> raised(static_cast<size_t>(nraw));
        for (int r = 0; r < nraw; ++r) {
          tensor_values2(ctx.field(sys.raw.fields[static_cast<size_t>(r)], 0), dim,
                         vals[static_cast<size_t>(r)]);
          raise_both(ginv, vals[static_cast<size_t>(r)], dim, raised[static_cast<size_t>(r)]);
        }
        for (int i = 0; i < nraw; ++i)
          for (int j = 0; j <= i; ++j)
            out[static_cast<size_t>(tri_index(i, j))] +=
                w * dot_values2(raised[static_cast<size_t>(i)], vals[static_cast<size_t>(j)], dim);
      },
      policy);
  const Eigen::MatrixXd gram = unpack_triangle(packed, nraw);
  sys.basis = gram_orthonormalize(gram, sys.raw, kDropTol);
  const int z = sys.basis.count();
  if (z == 0) throw BuildError("tensor basis is empty after orthonormalization");

  // Pass 2 over kept members only: operator values, divergences, their
  // adjoint compositions, and the couplings into the scalar basis.
  std::vector<TensorField> kept_fields;
  std::vector<TensorField> lich_fields;
  std::vector<TensorField> div_fields;
  std::vector<TensorField> divadj_fields;
  for (int k : sys.basis.kept) {
    const TensorField& f = sys.raw.fields[static_cast<size_t>(k)];
    kept_fields.push_back(f);
    lich_fields.push_back(weighted_lichnerowicz(f));
    TensorField dv = weighted_divergence(f);
    divadj_fields.push_back(weighted_divergence_adjoint(dv));
    div_fields.push_back(std::move(dv));
  }
  std::vector<TensorField> scalar_fields;
  for (int k : scalars.basis.kept)
    scalar_fields.push_back(scalars.raw.fields[static_cast<size_t>(k)]);
  const int zs = static_cast<int>(scalar_fields.size());
  const std::vector<int> d1 = first_order_flats(dim);

  const size_t n_tri = static_cast<size_t>(tri_size(z));
  const size_t n_full = static_cast<size_t>(z) * static_cast<size_t>(z);
  const size_t n_pg = static_cast<size_t>(z) * static_cast<size_t>(zs);
  // Layout: VG tri | LG full | LL tri | DG tri | VDD full | DDDD tri | PG | RicV | (R, |Ric|^2).
  const size_t off_vg = 0;
  const size_t off_lg = off_vg + n_tri;
  const size_t off_ll = off_lg + n_full;
  const size_t off_dg = off_ll + n_tri;
  const size_t off_vdd = off_dg + n_tri;
  const size_t off_dddd = off_vdd + n_full;
  const size_t off_pg = off_dddd + n_tri;
  const size_t off_ric = off_pg + n_pg;
  const size_t off_scalars = off_ric + static_cast<size_t>(z);
  std::vector<double> acc(off_scalars + 2, 0.0);

  accumulate_over_nodes(
      m, grid, acc,
      [&](int node, EvalContext& ctx, std::span<double> out) {
        const double w = grid.dm_weight[static_cast<size_t>(node)];
        Mat ginv;
        tensor_values2(ctx.metric_inv(0), dim, ginv);
        std::vector<Mat> v(static_cast<size_t>(z)), vr(static_cast<size_t>(z));
        std::vector<Mat> l(static_cast<size_t>(z)), lr(static_cast<size_t>(z));
        std::vector<Mat> dd(static_cast<size_t>(z)), ddr(static_cast<size_t>(z));
        std::vector<Vec> dv(static_cast<size_t>(z)), dvr(static_cast<size_t>(z));
        for (int r = 0; r < z; ++r) {
          const size_t ur = static_cast<size_t>(r);
          tensor_values2(ctx.field(kept_fields[ur], 2), dim, v[ur]);
          tensor_values2(ctx.field(lich_fields[ur], 0), dim, l[ur]);
          tensor_values2(ctx.field(divadj_fields[ur], 0), dim, dd[ur]);
          const JetTensor& dj = ctx.field(div_fields[ur], 1);
          for (int a = 0; a < dim; ++a) dv[ur][static_cast<size_t>(a)] = dj.at(a).value();
          raise_both(ginv, v[ur], dim, vr[ur]);
          raise_both(ginv, l[ur], dim, lr[ur]);
          raise_both(ginv, dd[ur], dim, ddr[ur]);
          raise_one(ginv, dv[ur], dim, dvr[ur]);
        }
        std::vector<Vec> ds(static_cast<size_t>(zs));
        for (int i = 0; i < zs; ++i) {
          const JetTensor jt = ctx.field(scalar_fields[static_cast<size_t>(i)], 1);
          const Jet& js = jt.at();
          for (int a = 0; a < dim; ++a)
            ds[static_cast<size_t>(i)][static_cast<size_t>(a)] =
                js.coeff(d1[static_cast<size_t>(a)]);
        }
        Mat ric, ricr;
        tensor_values2(ctx.ricci(0), dim, ric);
        raise_both(ginv, ric, dim, ricr);

        for (int i = 0; i < z; ++i) {
          const size_t ui = static_cast<size_t>(i);
          for (int j = 0; j <= i; ++j) {
            const size_t uj = static_cast<size_t>(j);
            const size_t t = static_cast<size_t>(tri_index(i, j));
            out[off_vg + t] += w * dot_values2(vr[ui], v[uj], dim);
            out[off_ll + t] += w * dot_values2(lr[ui], l[uj], dim);
            out[off_dg + t] += w * dot_values1(dvr[ui], dv[uj], dim);
            out[off_dddd + t] += w * dot_values2(ddr[ui], dd[uj], dim);
          }
          for (int j = 0; j < z; ++j) {
            const size_t uj = static_cast<size_t>(j);
            const size_t q = static_cast<size_t>(i * z + j);
            out[off_lg + q] += w * dot_values2(vr[ui], l[uj], dim);
            out[off_vdd + q] += w * dot_values2(vr[ui], dd[uj], dim);
          }
          for (int s = 0; s < zs; ++s)
            out[off_pg + static_cast<size_t>(i * zs + s)] +=
                w * dot_values1(dvr[ui], ds[static_cast<size_t>(s)], dim);
          out[off_ric + ui] += w * dot_values2(ricr, v[ui], dim);
        }
        out[off_scalars] += w * ctx.scalar_curvature(0).value();
        out[off_scalars + 1] += w * dot_values2(ricr, ric, dim);
      },
      policy);

  auto full_at = [&](size_t off) {
    Eigen::MatrixXd out(z, z);
    for (int i = 0; i < z; ++i)
      for (int j = 0; j < z; ++j) out(i, j) = acc[off + static_cast<size_t>(i * z + j)];
    return out;
  };
  auto tri_at = [&](size_t off) {
    return unpack_triangle(std::span<const double>(acc).subspan(off, n_tri), z);
  };

  const Eigen::MatrixXd ct = kept_rows(sys.basis.coef, sys.basis.kept);
  const Eigen::MatrixXd cs = kept_rows(scalars.basis.coef, scalars.basis.kept);

  const Eigen::MatrixXd lich_unsym = ct.transpose() * full_at(off_lg) * ct;
  sys.sym_defect = (lich_unsym - lich_unsym.transpose()).cwiseAbs().maxCoeff();
  sys.op_lichnerowicz = 0.5 * (lich_unsym + lich_unsym.transpose());
  sys.div_pair_gram = ct.transpose() * tri_at(off_dg) * ct;
  const Eigen::MatrixXd vdd = ct.transpose() * full_at(off_vdd) * ct;
  sys.adjoint_defect = (vdd - sys.div_pair_gram).cwiseAbs().maxCoeff();
  sys.gram_defect =
      (ct.transpose() * tri_at(off_vg) * ct - Eigen::MatrixXd::Identity(z, z)).cwiseAbs().maxCoeff();

  Eigen::MatrixXd pg_raw(z, zs);
  for (int i = 0; i < z; ++i)
    for (int s = 0; s < zs; ++s) pg_raw(i, s) = acc[off_pg + static_cast<size_t>(i * zs + s)];
  sys.div_scalar_pair = ct.transpose() * pg_raw * cs;

  Eigen::VectorXd ric_raw(z);
  for (int i = 0; i < z; ++i) ric_raw[i] = acc[off_ric + static_cast<size_t>(i)];
  sys.ricci_coef = ct.transpose() * ric_raw;
  sys.curvature_integral = acc[off_scalars];
  sys.ricci_norm2 = acc[off_scalars + 1];

  // Invariance diagnostics: how far the operators map each basis member
  // outside the span.  |(1-P) Op e_j|^2 = |Op e_j|^2 - sum_i <e_i, Op e_j>^2.
  const Eigen::MatrixXd ll = ct.transpose() * tri_at(off_ll) * ct;
  const Eigen::MatrixXd dddd = ct.transpose() * tri_at(off_dddd) * ct;
  sys.lich_leak_sup = 0.0;
  sys.div_leak_sup = 0.0;
  for (int j = 0; j < z; ++j) {
    const double lich_leak2 = ll(j, j) - lich_unsym.col(j).squaredNorm();
    const double div_leak2 = dddd(j, j) - vdd.col(j).squaredNorm();
    sys.lich_leak_sup = std::max(sys.lich_leak_sup, std::sqrt(std::max(lich_leak2, 0.0)));
    sys.div_leak_sup = std::max(sys.div_leak_sup, std::sqrt(std::max(div_leak2, 0.0)));
  }
  return sys;
}

// ---------------------------------------------------------------------------
// Spectra.

std::vector<SpectralPair> symmetric_eigenpairs(const Eigen::MatrixXd& a,
                                               const OrthoBasis& basis) {
  if (a.rows() != a.cols() || a.rows() != basis.count())
    throw BuildError("operator matrix does not match the basis size");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) throw BuildError("symmetric eigen-decomposition failed");
  std::vector<SpectralPair> pairs;
  for (int i = 0; i < a.rows(); ++i) {
    SpectralPair p;
    p.value = eig.eigenvalues()[i];
    p.vec = eig.eigenvectors().col(i);
    canonicalize_sign(p.vec);
    p.residual = (a * p.vec - p.value * p.vec).norm();
    p.tag = dominant_tag(p.vec, basis);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

GapCheck spectral_gap_check(const ScalarSystem& scalars, double tau, double tol) {
  const int z = scalars.basis.count();
  if (z < 2) throw BuildError("spectral gap check needs a nonconstant scalar basis");
  if (!(tau > 0.0)) throw BuildError("spectral gap check needs a positive scale parameter");
  // Basis member 0 is the constant (the first raw monomial survives with unit
  // norm under the normalized measure), so the mean-zero block is the
  // trailing principal block.
  const Eigen::MatrixXd block = scalars.op_drift.block(1, 1, z - 1, z - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
  if (eig.info() != Eigen::Success) throw BuildError("spectral gap eigen-decomposition failed");
  GapCheck gap;
  gap.lambda1 = eig.eigenvalues()[z - 2];
  gap.bound = -1.0 / (2.0 * tau);
  gap.margin = gap.bound - gap.lambda1;
  gap.pass = gap.lambda1 <= gap.bound + tol;
  return gap;
}

double commutation_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = a.norm() * b.norm();
  if (scale == 0.0) return 0.0;
  return (a * b - b * a).norm() / scale;
}

std::vector<JointMember> joint_eigenbasis(const TensorSystem& sys, double cluster_rel,
                                          double match_rel) {
  const Eigen::MatrixXd& a = sys.op_lichnerowicz;
  const Eigen::MatrixXd b = a + sys.div_pair_gram;
  const int z = static_cast<int>(a.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) throw BuildError("joint eigen-decomposition failed");
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double specrad = std::max(std::abs(lam[0]), std::abs(lam[z - 1]));
  const double scale = std::max(1.0, specrad);

  std::vector<JointMember> members;
  int lo = 0;
  while (lo < z) {
    int hi = lo + 1;
    while (hi < z && lam[hi] - lam[hi - 1] <= cluster_rel * scale) ++hi;
    const int k = hi - lo;
    const Eigen::MatrixXd vc = eig.eigenvectors().middleCols(lo, k);
    const double lam_rep = lam.segment(lo, k).mean();
    Eigen::MatrixXd small = vc.transpose() * b * vc;
    small = 0.5 * (small + small.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sub(small);
    if (sub.info() != Eigen::Success) throw BuildError("joint eigen-decomposition failed");
    for (int i = 0; i < k; ++i) {
      JointMember jm;
      jm.lambda = lam_rep;
      jm.mu = sub.eigenvalues()[i];
      jm.vec = vc * sub.eigenvectors().col(i);
      members.push_back(std::move(jm));
    }
    lo = hi;
  }

  // Deflate the Ricci direction within each joint (lambda, mu) group that
  // carries most of it, rotating the group so one marked member holds the
  // whole projection.
  const double rnorm = sys.ricci_coef.norm();
  Eigen::VectorXd rhat;
  if (rnorm > 0.0) rhat = sys.ricci_coef / rnorm;
  size_t g0 = 0;
  while (g0 < members.size()) {
    size_t g1 = g0 + 1;
    while (g1 < members.size() && members[g1].lambda == members[g0].lambda &&
           std::abs(members[g1].mu - members[g0].mu) <= match_rel * scale)
      ++g1;
    if (rnorm > 0.0) {
      const int k = static_cast<int>(g1 - g0);
      Eigen::VectorXd wv(k);
      for (int i = 0; i < k; ++i) wv[i] = rhat.dot(members[g0 + static_cast<size_t>(i)].vec);
      const double s2 = wv.squaredNorm();
      if (s2 > 0.25) {
        const double mu_rep =
            std::accumulate(members.begin() + static_cast<long>(g0),
                            members.begin() + static_cast<long>(g1), 0.0,
                            [](double acc, const JointMember& jm) { return acc + jm.mu; }) /
            static_cast<double>(k);
        Eigen::VectorXd u = wv / std::sqrt(s2);
        Eigen::MatrixXd vg(z, k);
        for (int i = 0; i < k; ++i) vg.col(i) = members[g0 + static_cast<size_t>(i)].vec;
        // Orthogonal rotation with first column u (a Householder reflection).
        Eigen::MatrixXd q = Eigen::MatrixXd::Identity(k, k);
        Eigen::VectorXd diff = u - Eigen::VectorXd::Unit(k, 0);
        const double dn = diff.norm();
        if (dn > 1e-14) q -= (2.0 / (dn * dn)) * (diff * diff.transpose());
        const Eigen::MatrixXd rotated = vg * q;
        for (int i = 0; i < k; ++i) {
          JointMember& jm = members[g0 + static_cast<size_t>(i)];
          jm.vec = rotated.col(i);
          jm.mu = mu_rep;
          jm.ric_direction = (i == 0);
        }
      }
    }
    g0 = g1;
  }

  for (JointMember& jm : members) {
    canonicalize_sign(jm.vec);
    jm.transversal = std::abs(jm.mu - jm.lambda) <= match_rel * scale;
    jm.ric_overlap = (rnorm > 0.0) ? std::abs(rhat.dot(jm.vec)) : 0.0;
    jm.tag = dominant_tag(jm.vec, sys.basis);
  }
  return members;
}

}  // namespace grs
