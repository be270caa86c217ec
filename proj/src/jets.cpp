#include "grslab/jets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace grs {

namespace {

uint64_t pack_exponents(std::span<const int> alpha) {
  uint64_t key = 0;
  for (size_t i = 0; i < alpha.size(); ++i) key |= static_cast<uint64_t>(alpha[i] & 0xff) << (8 * i);
  return key;
}

// All multi-indices of the given total degree, lexicographically descending in
// the first axis.  Called degree by degree so graded order is global.
void emit_degree(int nvars, int degree, std::vector<int>& cur, int axis,
                 std::vector<std::vector<int>>& out) {
  if (axis == nvars - 1) {
    cur[axis] = degree;
    out.push_back(cur);
    return;
  }
  for (int e = degree; e >= 0; --e) {
    cur[axis] = e;
    emit_degree(nvars, degree - e, cur, axis + 1, out);
  }
}

}  // namespace

JetSpace::JetSpace(int nvars, int order) : nvars_(nvars), order_(order) {
  std::vector<int> cur(nvars, 0);
  for (int d = 0; d <= order; ++d) emit_degree(nvars, d, cur, 0, exps_);

  std::vector<std::pair<uint64_t, int32_t>> keyed;
  keyed.reserve(exps_.size());
  for (size_t i = 0; i < exps_.size(); ++i)
    keyed.emplace_back(pack_exponents({exps_[i].data(), exps_[i].size()}), static_cast<int32_t>(i));
  std::sort(keyed.begin(), keyed.end());
  keys_.reserve(keyed.size());
  key_pos_.reserve(keyed.size());
  for (auto& [k, p] : keyed) {
    keys_.push_back(k);
    key_pos_.push_back(p);
  }

  auto degree_of = [&](int flat) {
    int d = 0;
    for (int v : exps_[flat]) d += v;
    return d;
  };

  const int m = size();
  for (int a = 0; a < m; ++a) {
    const int da = degree_of(a);
    for (int b = 0; b < m; ++b) {
      if (da + degree_of(b) > order) continue;
      std::vector<int> sum(nvars);
      for (int v = 0; v < nvars; ++v) sum[v] = exps_[a][v] + exps_[b][v];
      prod_.push_back({static_cast<int32_t>(a), static_cast<int32_t>(b),
                       static_cast<int32_t>(index({sum.data(), sum.size()}))});
    }
  }
  std::sort(prod_.begin(), prod_.end(), [](const ProductTriple& x, const ProductTriple& y) {
    if (x.out != y.out) return x.out < y.out;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  partial_.resize(nvars);
  for (int axis = 0; axis < nvars; ++axis) {
    for (int flat = 0; flat < m; ++flat) {
      if (exps_[flat][axis] == 0) continue;
      std::vector<int> beta = exps_[flat];
      beta[axis] -= 1;
      if (degree_of(flat) - 1 > order - 1) continue;
      partial_[axis].push_back({static_cast<int32_t>(flat),
                                static_cast<int32_t>(index({beta.data(), beta.size()})),
                                static_cast<double>(beta[axis] + 1)});
    }
  }
}

int JetSpace::index(std::span<const int> alpha) const {
  const uint64_t key = pack_exponents(alpha);
  auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  assert(it != keys_.end() && *it == key);
  return key_pos_[static_cast<size_t>(it - keys_.begin())];
}

const JetSpace& JetSpace::get(int nvars, int order) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<JetSpace>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(nvars, order);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::unique_ptr<JetSpace>(new JetSpace(nvars, order))).first;
  return *it->second;
}

Jet Jet::variable(const JetSpace& s, int axis, double x0) {
  Jet j(s);
  j.c_[0] = x0;
  if (s.order() >= 1) {
    std::vector<int> e(s.nvars(), 0);
    e[axis] = 1;
    j.c_[s.index({e.data(), e.size()})] = 1.0;
  }
  return j;
}

double Jet::derivative(std::span<const int> alpha) const {
  double fact = 1.0;
  for (int a : alpha)
    for (int k = 2; k <= a; ++k) fact *= k;
  return c_[space_->index(alpha)] * fact;
}

Jet Jet::truncated(int new_order) const {
  assert(new_order <= space_->order());
  const JetSpace& s = JetSpace::get(space_->nvars(), new_order);
  Jet j(s);
  std::copy(c_.begin(), c_.begin() + s.size(), j.c_.begin());
  return j;
}

Jet Jet::partial(int axis) const {
  assert(space_->order() >= 1);
  const JetSpace& s = JetSpace::get(space_->nvars(), space_->order() - 1);
  Jet j(s);
  for (const auto& e : space_->partial_table(axis)) j.c_[e.dst] = c_[e.src] * e.factor;
  return j;
}

Jet& Jet::operator+=(const Jet& o) {
  assert(space_ == o.space_);
  for (size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  assert(space_ == o.space_);
  for (size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Jet& Jet::operator*=(double v) {
  for (double& x : c_) x *= v;
  return *this;
}

Jet operator-(double b, const Jet& a) {
  Jet r = a;
  for (double& x : r.c_) x = -x;
  r.c_[0] += b;
  return r;
}

Jet operator-(const Jet& a) {
  Jet r = a;
  for (double& x : r.c_) x = -x;
  return r;
}

void Jet::add_product(const Jet& a, const Jet& b) {
  assert(space_ == a.space_ && space_ == b.space_);
  const double* pa = a.c_.data();
  const double* pb = b.c_.data();
  double* pc = c_.data();
  for (const auto& t : space_->product_table()) pc[t.out] += pa[t.a] * pb[t.b];
}

void Jet::sub_product(const Jet& a, const Jet& b) {
  assert(space_ == a.space_ && space_ == b.space_);
  const double* pa = a.c_.data();
  const double* pb = b.c_.data();
  double* pc = c_.data();
  for (const auto& t : space_->product_table()) pc[t.out] -= pa[t.a] * pb[t.b];
}

Jet operator*(const Jet& a, const Jet& b) {
  Jet r(*a.space_);
  r.add_product(a, b);
  return r;
}

Jet compose_univariate(const Jet& u, std::span<const double> scaled_derivs) {
  const JetSpace& s = u.space();
  const int K = s.order();
  assert(static_cast<int>(scaled_derivs.size()) >= K + 1);
  Jet nil = u;
  nil.coeff(0) = 0.0;
  // Horner in the nilpotent part.
  Jet r = Jet::constant(s, scaled_derivs[K]);
  for (int k = K - 1; k >= 0; --k) {
    Jet next(s);
    next.add_product(r, nil);
    next += scaled_derivs[k];
    r = std::move(next);
  }
  return r;
}

Jet sin(const Jet& u) {
  const int K = u.space().order();
  const double s0 = std::sin(u.value()), c0 = std::cos(u.value());
  std::vector<double> d(K + 1);
  double fact = 1.0;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) fact *= k;
    const double cyc[4] = {s0, c0, -s0, -c0};
    d[k] = cyc[k % 4] / fact;
  }
  return compose_univariate(u, d);
}

Jet cos(const Jet& u) {
  const int K = u.space().order();
  const double s0 = std::sin(u.value()), c0 = std::cos(u.value());
  std::vector<double> d(K + 1);
  double fact = 1.0;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) fact *= k;
    const double cyc[4] = {c0, -s0, -c0, s0};
    d[k] = cyc[k % 4] / fact;
  }
  return compose_univariate(u, d);
}

Jet exp(const Jet& u) {
  const int K = u.space().order();
  const double e0 = std::exp(u.value());
  std::vector<double> d(K + 1);
  double fact = 1.0;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) fact *= k;
    d[k] = e0 / fact;
  }
  return compose_univariate(u, d);
}

Jet log(const Jet& u) {
  const int K = u.space().order();
  const double u0 = u.value();
  if (u0 <= 0.0) throw std::domain_error("jet log: non-positive base value");
  std::vector<double> d(K + 1);
  d[0] = std::log(u0);
  double p = 1.0;
  for (int k = 1; k <= K; ++k) {
    p *= u0;
    d[k] = ((k % 2) ? 1.0 : -1.0) / (k * p);
  }
  return compose_univariate(u, d);
}

Jet sqrt(const Jet& u) {
  const int K = u.space().order();
  const double u0 = u.value();
  if (u0 <= 0.0) throw std::domain_error("jet sqrt: non-positive base value");
  std::vector<double> d(K + 1);
  // binom(1/2, k) * u0^(1/2 - k)
  double coef = 1.0, upow = std::sqrt(u0);
  for (int k = 0; k <= K; ++k) {
    d[k] = coef * upow;
    coef *= (0.5 - k) / (k + 1);
    upow /= u0;
  }
  return compose_univariate(u, d);
}

Jet operator/(const Jet& a, const Jet& b) { return a * (1.0 / b); }

Jet operator/(double a, const Jet& b) {
  const int K = b.space().order();
  const double b0 = b.value();
  if (b0 == 0.0) throw std::domain_error("jet division by zero value");
  std::vector<double> d(K + 1);
  double p = 1.0 / b0;
  for (int k = 0; k <= K; ++k) {
    d[k] = ((k % 2) ? -1.0 : 1.0) * p;
    p /= b0;
  }
  Jet r = compose_univariate(b, d);
  return r * a;
}

Jet pow(const Jet& u, int k) {
  assert(k >= 0);
  Jet r = Jet::constant(u.space(), 1.0);
  for (int i = 0; i < k; ++i) r = r * u;
  return r;
}

std::vector<Jet> seed_point(const JetSpace& s, std::span<const double> x) {
  assert(static_cast<int>(x.size()) == s.nvars());
  std::vector<Jet> pt;
  pt.reserve(x.size());
  for (size_t i = 0; i < x.size(); ++i) pt.push_back(Jet::variable(s, static_cast<int>(i), x[i]));
  return pt;
}

}  // namespace grs
