#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mblflow/model.hpp"
#include "mblflow/types.hpp"

namespace mblflow {

/// Full eigensystem, energies ascending. Each eigenvector is normalized with its
/// largest-magnitude component positive (first such component on ties).
struct Spectrum {
  Vector energies;
  OperatorMatrix vectors;
};

Spectrum diagonalize(const OperatorMatrix& H);
/// Sorted eigenvalues only.
Vector eigenvalues(const OperatorMatrix& H);

/// Spectral norm of a symmetric matrix from its sorted eigenvalues.
double spectral_radius(const Vector& sorted_energies);

double min_level_spacing(const Vector& sorted_energies);
double min_level_spacing(const Spectrum& s);

/// Empirical P(min gap < delta) curve with a log-log slope fit.
struct LevelStatsReport {
  std::vector<double> delta_grid;
  std::vector<std::size_t> hits;
  std::vector<double> empirical_prob;
  std::vector<double> ci_lo;
  std::vector<double> ci_hi;
  std::size_t n_realizations = 0;
  bool fit_ok = false;  // false when fewer than two grid points reach min_hits
  std::size_t fit_points = 0;
  double fitted_nu = 0.0;
  double nu_ci_lo = 0.0;  // percentile bootstrap over realizations
  double nu_ci_hi = 0.0;
};

struct LevelStatsOptions {
  std::size_t min_hits = 5;
  std::size_t bootstrap_samples = 400;
  std::uint64_t bootstrap_seed = 0x5eed;
  int workers = 1;
  int max_sites = kDefaultMaxSites;
};

/// Builds the report from per-realization minimum gaps (already measured).
LevelStatsReport level_stats_from_gaps(std::span<const double> min_gaps, std::span<const double> delta_grid,
                                       const LevelStatsOptions& opt = {});

/// Requires >= 100 realizations and positive, increasing delta values.
LevelStatsReport estimate_level_statistics(std::span<const Disorder> realizations,
                                           std::span<const double> delta_grid,
                                           const LevelStatsOptions& opt = {});

/// CSV with columns delta,prob,ci_lo,ci_hi.
std::string level_stats_csv(const LevelStatsReport& r);
nlohmann::json level_fit_json(const LevelStatsReport& r);

/// max over level pairs of |D_ab(lambda d) - lambda D_ab(d)| / (|lambda D_ab(d)| + floor),
/// floor = relative_floor * lambda * ||H(d)||_2.
double radial_scaling_check(const Disorder& d, double lambda, double relative_floor = 1e-3);

struct RadialDerivative {
  double fd_derivative = 0.0;  // central difference of D_ab along the coupling radius
  double analytic = 0.0;       // D_ab / r
  double radius = 0.0;
};

/// Central finite difference of D_ab = E_alpha - E_beta (sorted indices) along the radial direction
/// of the coupling vector. Throws LevelCrossingError when either level is degenerate or the
/// eigenvector of a level changes identity inside the stencil.
RadialDerivative radial_derivative_check(const Disorder& d, int alpha, int beta, double step);

}  // namespace mblflow
