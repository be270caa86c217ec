#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "grslab/jets.hpp"

using grs::Jet;
using grs::JetSpace;

namespace {

Jet var(const JetSpace& s, int axis, double x0) { return Jet::variable(s, axis, x0); }

double deriv(const Jet& j, std::initializer_list<int> alpha) {
  return j.derivative(std::span<const int>(alpha.begin(), alpha.size()));
}

}  // namespace

TEST_CASE("multivariate jet derivatives match closed-form partials") {
  const JetSpace& s = JetSpace::get(2, 3);
  const double x0 = 0.3, y0 = -0.2;
  const Jet x = var(s, 0, x0), y = var(s, 1, y0);

  // f(x, y) = sin(x) exp(y) + x^2 y
  const Jet f = sin(x) * exp(y) + x * x * y;

  const double sx = std::sin(x0), cx = std::cos(x0), ey = std::exp(y0);
  CHECK(deriv(f, {0, 0}) == doctest::Approx(sx * ey + x0 * x0 * y0).epsilon(1e-14));
  CHECK(deriv(f, {1, 0}) == doctest::Approx(cx * ey + 2 * x0 * y0).epsilon(1e-14));
  CHECK(deriv(f, {0, 1}) == doctest::Approx(sx * ey + x0 * x0).epsilon(1e-14));
  CHECK(deriv(f, {2, 0}) == doctest::Approx(-sx * ey + 2 * y0).epsilon(1e-14));
  CHECK(deriv(f, {1, 1}) == doctest::Approx(cx * ey + 2 * x0).epsilon(1e-14));
  CHECK(deriv(f, {0, 2}) == doctest::Approx(sx * ey).epsilon(1e-14));
  CHECK(deriv(f, {2, 1}) == doctest::Approx(-sx * ey).epsilon(1e-13));
  CHECK(deriv(f, {3, 0}) == doctest::Approx(-cx * ey).epsilon(1e-13));
  CHECK(deriv(f, {0, 3}) == doctest::Approx(sx * ey).epsilon(1e-13));
}

TEST_CASE("quotient and square root propagate derivatives") {
  const JetSpace& s = JetSpace::get(1, 3);

  SUBCASE("tangent as sine over cosine") {
    const double u0 = 0.5;
    const Jet u = var(s, 0, u0);
    const Jet t = sin(u) / cos(u);
    const double tan0 = std::tan(u0);
    const double sec2 = 1.0 + tan0 * tan0;
    CHECK(deriv(t, {0}) == doctest::Approx(tan0).epsilon(1e-14));
    CHECK(deriv(t, {1}) == doctest::Approx(sec2).epsilon(1e-14));
    CHECK(deriv(t, {2}) == doctest::Approx(2.0 * sec2 * tan0).epsilon(1e-13));
    CHECK(deriv(t, {3}) == doctest::Approx(2.0 * sec2 * (sec2 + 2.0 * tan0 * tan0)).epsilon(1e-13));
  }

  SUBCASE("sqrt(1 + u^2)") {
    const double u0 = 0.7;
    const Jet u = var(s, 0, u0);
    const Jet g = sqrt(1.0 + u * u);
    const double r = std::sqrt(1.0 + u0 * u0);
    CHECK(deriv(g, {1}) == doctest::Approx(u0 / r).epsilon(1e-14));
    CHECK(deriv(g, {2}) == doctest::Approx(1.0 / (r * r * r)).epsilon(1e-13));
  }
}

TEST_CASE("log inverts exp coefficient by coefficient") {
  const JetSpace& s = JetSpace::get(2, 3);
  const Jet u = 0.4 + var(s, 0, 0.1) + 0.5 * var(s, 1, -0.3);
  const Jet back = log(exp(u));
  for (int flat = 0; flat < s.size(); ++flat)
    CHECK(back.coeff(flat) == doctest::Approx(u.coeff(flat)).epsilon(1e-13));
}

TEST_CASE("integer power agrees with repeated product") {
  const JetSpace& s = JetSpace::get(2, 3);
  const Jet u = 1.2 + var(s, 0, 0.2) - 2.0 * var(s, 1, 0.15);
  const Jet a = pow(u, 3);
  const Jet b = u * u * u;
  for (int flat = 0; flat < s.size(); ++flat)
    CHECK(a.coeff(flat) == doctest::Approx(b.coeff(flat)).epsilon(1e-13));
}

TEST_CASE("flat indexing is a bijection on multi-indices") {
  const JetSpace& s = JetSpace::get(3, 4);
  REQUIRE(s.nvars() == 3);
  // (3 + 4 choose 4) multi-indices of degree <= 4 in three variables.
  CHECK(s.size() == 35);
  for (int flat = 0; flat < s.size(); ++flat) {
    CHECK(s.index(s.exponents(flat)) == flat);
  }
  // The constant coefficient sits first and the gradient block follows.
  const std::array<int, 3> zero{0, 0, 0};
  CHECK(s.index(std::span<const int>(zero.data(), 3)) == 0);
  for (int axis = 0; axis < 3; ++axis) {
    std::array<int, 3> e{0, 0, 0};
    e[axis] = 1;
    const int flat = s.index(std::span<const int>(e.data(), 3));
    CHECK(flat >= 1);
    CHECK(flat <= 3);
  }
}

TEST_CASE("constants and variables seed the expected coefficients") {
  const JetSpace& s = JetSpace::get(2, 2);
  const Jet c = Jet::constant(s, 2.5);
  CHECK(c.value() == 2.5);
  for (int flat = 1; flat < s.size(); ++flat) CHECK(c.coeff(flat) == 0.0);

  const Jet x = var(s, 1, -1.25);
  CHECK(x.value() == -1.25);
  CHECK(deriv(x, {0, 1}) == 1.0);
  CHECK(deriv(x, {1, 0}) == 0.0);
  CHECK(deriv(x, {0, 2}) == 0.0);
}
