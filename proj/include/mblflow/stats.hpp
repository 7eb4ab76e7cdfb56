#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace mblflow::stats {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] double width() const { return hi - lo; }
};

/// Wilson score interval for a binomial proportion at normal quantile z (default 95%).
Interval wilson(std::size_t hits, std::size_t trials, double z = 1.959963984540054);

/// Linear-interpolation quantile (type 7), q in [0, 1]. Copies and sorts.
double quantile(std::span<const double> values, double q);
double median(std::span<const double> values);

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  Interval ci;  // mean +- 1.96 stderr
};
MeanEstimate mean_with_ci(std::span<const double> values);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
/// Ordinary least squares y = slope x + intercept; requires >= 2 distinct x.
LineFit least_squares(std::span<const double> x, std::span<const double> y);

/// Least squares through the origin y = slope x, with uncentered R^2 = 1 - SS_res / sum y^2.
LineFit least_squares_origin(std::span<const double> x, std::span<const double> y);

}  // namespace mblflow::stats
