#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mblflow/stats.hpp"

using namespace mblflow::stats;

TEST_CASE("wilson interval") {
  // 50 of 100 at z = 1.96: 0.5 +- 0.0961 (closed form).
  const auto ci = wilson(50, 100);
  CHECK(ci.lo == doctest::Approx(0.40383).epsilon(1e-4));
  CHECK(ci.hi == doctest::Approx(0.59617).epsilon(1e-4));
  const auto zero = wilson(0, 40);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi > 0.0);
  const auto all = wilson(40, 40);
  CHECK(all.hi == doctest::Approx(1.0));
  CHECK(all.lo < 1.0);
}

TEST_CASE("quantiles") {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(median(v) == 2.5);
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile(v, 0.9) == doctest::Approx(3.7));
}

TEST_CASE("mean with interval") {
  const std::vector<double> v{1.0, 2.0, 3.0};
  const auto m = mean_with_ci(v);
  CHECK(m.mean == 2.0);
  CHECK(m.stderr_ == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(mean_with_ci(std::vector<double>{5.0}).ci.width() == 0.0);
}

TEST_CASE("least squares") {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = least_squares(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  const std::vector<double> x0{1, 2, 4}, y0{0.5, 1.0, 2.0};
  const auto o = least_squares_origin(x0, y0);
  CHECK(o.slope == doctest::Approx(0.5));
  CHECK(o.r2 == doctest::Approx(1.0));
}
