#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

namespace mblflow {

/// L_k = (15/8)^k, used real-valued.
inline double length_scale(int k) { return std::pow(15.0 / 8.0, k); }

/// d_m = exp(L_{m+m0}^{1/2}) clamped to the chain length n.
inline double separation_distance(int m, int m0, int n) {
  const double dm = std::exp(std::sqrt(length_scale(m + m0)));
  return std::min(dm, static_cast<double>(n));
}

/// Volume class m with vol in [L_{m-1}, L_m), m >= 1.
inline int volume_class(double volume) {
  int m = 1;
  while (volume >= length_scale(m)) ++m;
  return m;
}

/// Collar of a small block formed at scale i: width L_i - 1, rounded up.
inline int collar_width(int scale) { return static_cast<int>(std::ceil(length_scale(scale) - 1.0 - 1e-12)); }

/// Second collar of width (15/14) L_{i-1}, rounded up; one site at scale 1.
inline int outer_collar_width(int scale) {
  if (scale <= 1) return 1;
  return static_cast<int>(std::ceil(15.0 / 14.0 * length_scale(scale - 1) - 1e-12));
}

struct FlowParams {
  std::optional<double> gamma;    // defaults to the disorder's gamma
  std::optional<double> epsilon;  // defaults to gamma^(1/20)
  int m0 = 0;                     // separation offset
  int max_steps = 40;
  double offdiag_tol = 1e-12;     // relative to ||H||_F
  double denom_floor = 1e-13;
  double drift_tol = 1e-9;        // spectrum drift, relative to ||H||_2
  double orthogonality_tol = 1e-8;
  bool check_spectrum = true;
  int max_sites = 14;
};

}  // namespace mblflow
