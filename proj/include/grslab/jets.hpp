#pragma once

// Truncated multivariate Taylor arithmetic ("jets").
//
// A Jet holds the Taylor coefficients c_alpha = d^alpha f / alpha! of a smooth
// function at a base point, for all multi-indices |alpha| <= order.  Arithmetic
// on jets propagates derivatives exactly (to rounding), which is what lets the
// closed-form geometry backends meet 1e-8 identity tolerances on expressions
// involving up to sixth derivatives.
//
// Coefficient indexing is graded (degree-major, lexicographic within a degree)
// and is generated identically for every order, so the coefficients of a
// lower-order jet are a prefix of a higher-order one.  Truncation is a prefix
// copy and the same flat index refers to the same multi-index in every space
// with the same variable count.

#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

namespace grs {

class JetSpace {
 public:
  // Shared immutable table set for (nvars, order); cached per process.
  static const JetSpace& get(int nvars, int order);

  int nvars() const { return nvars_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(exps_.size()); }

  // Flat index of a multi-index (asserts |alpha| <= order).
  int index(std::span<const int> alpha) const;
  std::span<const int> exponents(int flat) const {
    return {exps_[flat].data(), static_cast<size_t>(nvars_)};
  }

  struct ProductTriple {
    int32_t a, b, out;
  };
  std::span<const ProductTriple> product_table() const { return {prod_.data(), prod_.size()}; }

  struct PartialEntry {
    int32_t src, dst;
    double factor;
  };
  std::span<const PartialEntry> partial_table(int axis) const {
    return {partial_[axis].data(), partial_[axis].size()};
  }

 private:
  JetSpace(int nvars, int order);
  int nvars_, order_;
  std::vector<std::vector<int>> exps_;
  std::vector<uint64_t> keys_;  // packed exponents, sorted with positions
  std::vector<int32_t> key_pos_;
  std::vector<ProductTriple> prod_;
  std::vector<std::vector<PartialEntry>> partial_;
};

class Jet {
 public:
  Jet() : space_(nullptr) {}
  explicit Jet(const JetSpace& s) : space_(&s), c_(s.size(), 0.0) {}

  static Jet constant(const JetSpace& s, double v) {
    Jet j(s);
    j.c_[0] = v;
    return j;
  }
  // Coordinate seed: value x0, unit first derivative along `axis`.
  static Jet variable(const JetSpace& s, int axis, double x0);

  const JetSpace& space() const { return *space_; }
  bool valid() const { return space_ != nullptr; }
  double value() const { return c_[0]; }
  double coeff(int flat) const { return c_[flat]; }
  double& coeff(int flat) { return c_[flat]; }
  std::span<const double> coeffs() const { return {c_.data(), c_.size()}; }

  // d^alpha f (with the alpha! factored back in).
  double derivative(std::span<const int> alpha) const;

  Jet truncated(int new_order) const;
  // Taylor coefficients of d/dx_axis, one order lower.
  Jet partial(int axis) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator+=(double v) {
    c_[0] += v;
    return *this;
  }
  Jet& operator-=(double v) {
    c_[0] -= v;
    return *this;
  }
  Jet& operator*=(double v);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double b) { return a += b; }
  friend Jet operator+(double b, Jet a) { return a += b; }
  friend Jet operator-(Jet a, double b) { return a -= b; }
  friend Jet operator-(double b, const Jet& a);
  friend Jet operator-(const Jet& a);
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator*(Jet a, double b) { return a *= b; }
  friend Jet operator*(double b, Jet a) { return a *= b; }
  friend Jet operator/(const Jet& a, const Jet& b);
  friend Jet operator/(double a, const Jet& b);
  friend Jet operator/(Jet a, double b) { return a *= (1.0 / b); }

  // out += a*b without allocating.
  void add_product(const Jet& a, const Jet& b);
  void sub_product(const Jet& a, const Jet& b);

 private:
  const JetSpace* space_;
  std::vector<double> c_;
};

Jet sin(const Jet& u);
Jet cos(const Jet& u);
Jet exp(const Jet& u);
Jet log(const Jet& u);
Jet sqrt(const Jet& u);
Jet pow(const Jet& u, int k);

// Composition with a univariate f given by f^(k)(u.value())/k!, k = 0..order.
Jet compose_univariate(const Jet& u, std::span<const double> scaled_derivs);

// Coordinate jets for a base point (one variable per chart axis).
std::vector<Jet> seed_point(const JetSpace& s, std::span<const double> x);

}  // namespace grs
