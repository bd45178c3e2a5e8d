#include <doctest.h>

#include <cmath>
#include <limits>

#include "hopm/nelder_mead.hpp"

using namespace hopm;

TEST_CASE("minimizes the Rosenbrock valley") {
  auto f = [](std::span<const double> x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  NelderMeadOptions o;
  o.f_tol = 1e-14;
  o.x_tol = 1e-12;
  const auto r = nelder_mead(f, {-1.2, 1.0}, o);
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("quadratic bowl in four dimensions") {
  auto f = [](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (i + 1.0) * std::pow(x[i] - 0.5 * i, 2);
    return s;
  };
  const auto r = nelder_mead(f, {3.0, -2.0, 1.0, 7.0});
  CHECK(r.converged);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.x[i] == doctest::Approx(0.5 * i).epsilon(1e-3));
}

TEST_CASE("non-finite values act as walls") {
  auto f = [](std::span<const double> x) {
    if (x[0] <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return x[0] - std::log(x[0]);
  };
  const auto r = nelder_mead(f, {3.0});
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
}
