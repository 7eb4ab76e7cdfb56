#include "mblflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mblflow/errors.hpp"
#include "mblflow/parallel.hpp"
#include "mblflow/stats.hpp"

namespace mblflow {

namespace {

void fix_signs(OperatorMatrix& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

void require_square(const OperatorMatrix& H) {
  if (H.rows() != H.cols() || H.rows() == 0) throw DimensionError("expected a nonempty square matrix");
}

}  // namespace

Spectrum diagonalize(const OperatorMatrix& H) {
  require_square(H);
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(H, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw SolverError("diagonalize: eigensolver did not converge");
  Spectrum s{solver.eigenvalues(), solver.eigenvectors()};
  fix_signs(s.vectors);
  return s;
}

Vector eigenvalues(const OperatorMatrix& H) {
  require_square(H);
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(H, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw SolverError("eigenvalues: eigensolver did not converge");
  return solver.eigenvalues();
}

double spectral_radius(const Vector& sorted_energies) {
  if (sorted_energies.size() == 0) return 0.0;
  return std::max(std::abs(sorted_energies(0)), std::abs(sorted_energies(sorted_energies.size() - 1)));
}

double min_level_spacing(const Vector& sorted_energies) {
  if (sorted_energies.size() < 2) throw DimensionError("min_level_spacing: need at least two levels");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a + 1 < sorted_energies.size(); ++a) {
    best = std::min(best, sorted_energies(a + 1) - sorted_energies(a));
  }
  return best;
}

double min_level_spacing(const Spectrum& s) { return min_level_spacing(s.energies); }

namespace {

struct CurveFit {
  bool ok = false;
  std::size_t points = 0;
  double slope = 0.0;
};

CurveFit fit_curve(std::span<const double> sorted_gaps, std::span<const double> delta_grid,
                   std::size_t min_hits, std::vector<std::size_t>* hits_out) {
  std::vector<double> lx, ly;
  const double total = static_cast<double>(sorted_gaps.size());
  for (double delta : delta_grid) {
    const auto hits = static_cast<std::size_t>(
        std::lower_bound(sorted_gaps.begin(), sorted_gaps.end(), delta) - sorted_gaps.begin());
    if (hits_out) hits_out->push_back(hits);
    if (hits >= min_hits) {
      lx.push_back(std::log(delta));
      ly.push_back(std::log(static_cast<double>(hits) / total));
    }
  }
  CurveFit fit;
  fit.points = lx.size();
  if (lx.size() >= 2) {
    fit.ok = true;
    fit.slope = stats::least_squares(lx, ly).slope;
  }
  return fit;
}

}  // namespace

LevelStatsReport level_stats_from_gaps(std::span<const double> min_gaps, std::span<const double> delta_grid,
                                       const LevelStatsOptions& opt) {
  if (min_gaps.empty()) throw Error("level statistics: empty ensemble");
  for (std::size_t i = 0; i < delta_grid.size(); ++i) {
    if (!(delta_grid[i] > 0.0)) throw ConfigError("level statistics: delta values must be positive");
    if (i > 0 && !(delta_grid[i] > delta_grid[i - 1])) {
      throw ConfigError("level statistics: delta grid must be increasing");
    }
  }
  std::vector<double> sorted(min_gaps.begin(), min_gaps.end());
  std::sort(sorted.begin(), sorted.end());

  LevelStatsReport r;
  r.delta_grid.assign(delta_grid.begin(), delta_grid.end());
  r.n_realizations = sorted.size();
  const CurveFit fit = fit_curve(sorted, delta_grid, opt.min_hits, &r.hits);
  for (std::size_t hits : r.hits) {
    r.empirical_prob.push_back(static_cast<double>(hits) / static_cast<double>(sorted.size()));
    const auto ci = stats::wilson(hits, sorted.size());
    r.ci_lo.push_back(ci.lo);
    r.ci_hi.push_back(ci.hi);
  }
  r.fit_ok = fit.ok;
  r.fit_points = fit.points;
  if (!fit.ok) return r;
  r.fitted_nu = fit.slope;

  std::mt19937_64 rng(opt.bootstrap_seed);
  std::vector<double> slopes;
  std::vector<double> resample(sorted.size());
  for (std::size_t b = 0; b < opt.bootstrap_samples; ++b) {
    for (double& g : resample) g = sorted[static_cast<std::size_t>(rng() % sorted.size())];
    std::sort(resample.begin(), resample.end());
    const CurveFit bf = fit_curve(resample, delta_grid, opt.min_hits, nullptr);
    if (bf.ok) slopes.push_back(bf.slope);
  }
  if (slopes.empty()) {
    r.nu_ci_lo = r.nu_ci_hi = r.fitted_nu;
  } else {
    r.nu_ci_lo = stats::quantile(slopes, 0.025);
    r.nu_ci_hi = stats::quantile(slopes, 0.975);
  }
  return r;
}

LevelStatsReport estimate_level_statistics(std::span<const Disorder> realizations,
                                           std::span<const double> delta_grid, const LevelStatsOptions& opt) {
  if (realizations.size() < 100) throw ConfigError("level statistics: need at least 100 realizations");
  std::vector<double> gaps(realizations.size());
  parallel_for(realizations.size(), opt.workers, [&](std::size_t i) {
    gaps[i] = min_level_spacing(eigenvalues(build_hamiltonian(realizations[i], opt.max_sites)));
  });
  return level_stats_from_gaps(gaps, delta_grid, opt);
}

std::string level_stats_csv(const LevelStatsReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "delta,prob,ci_lo,ci_hi\n";
  for (std::size_t i = 0; i < r.delta_grid.size(); ++i) {
    os << r.delta_grid[i] << ',' << r.empirical_prob[i] << ',' << r.ci_lo[i] << ',' << r.ci_hi[i] << '\n';
  }
  return os.str();
}

nlohmann::json level_fit_json(const LevelStatsReport& r) {
  return nlohmann::json{{"n_realizations", r.n_realizations},
                        {"fit_ok", r.fit_ok},
                        {"fit_points", r.fit_points},
                        {"fitted_nu", r.fitted_nu},
                        {"nu_ci_lo", r.nu_ci_lo},
                        {"nu_ci_hi", r.nu_ci_hi},
                        {"hits", r.hits}};
}

double radial_scaling_check(const Disorder& d, double lambda, double relative_floor) {
  if (!(lambda > 0.0)) throw ConfigError("radial_scaling_check: lambda must be positive");
  const Vector base = eigenvalues(build_hamiltonian(d));
  const Vector scaled = eigenvalues(build_hamiltonian(d.scaled(lambda)));
  const double floor = relative_floor * lambda * spectral_radius(base);
  double worst = 0.0;
  const Eigen::Index dim = base.size();
  for (Eigen::Index a = 0; a < dim; ++a) {
    for (Eigen::Index b = a + 1; b < dim; ++b) {
      const double expect = lambda * (base(a) - base(b));
      const double got = scaled(a) - scaled(b);
      worst = std::max(worst, std::abs(got - expect) / (std::abs(expect) + floor));
    }
  }
  return worst;
}

RadialDerivative radial_derivative_check(const Disorder& d, int alpha, int beta, double step) {
  const Eigen::Index dim = Eigen::Index{1} << d.n;
  if (alpha == beta || alpha < 0 || beta < 0 || alpha >= dim || beta >= dim) {
    throw DimensionError("radial_derivative_check: need distinct level indices in range");
  }
  const double r = d.coupling_radius();
  if (!(step > 0.0) || !(step < 0.5 * r)) throw ConfigError("radial_derivative_check: step must be in (0, r/2)");

  const Spectrum mid = diagonalize(build_hamiltonian(d));
  const double scale = spectral_radius(mid.energies);
  const double degeneracy = 1e-12 * scale;
  auto isolated = [&](int level) {
    const double below = level > 0 ? mid.energies(level) - mid.energies(level - 1) : INFINITY;
    const double above = level + 1 < dim ? mid.energies(level + 1) - mid.energies(level) : INFINITY;
    return std::min(below, above) > degeneracy;
  };
  if (!isolated(alpha) || !isolated(beta)) {
    throw LevelCrossingError("radial_derivative_check: level pair is degenerate");
  }

  auto gap_at = [&](double lambda) {
    const Spectrum s = diagonalize(build_hamiltonian(d.scaled(lambda)));
    for (int level : {alpha, beta}) {
      const double overlap = std::abs(s.vectors.col(level).dot(mid.vectors.col(level)));
      if (overlap < 0.99) {
        throw LevelCrossingError("radial_derivative_check: level " + std::to_string(level) +
                                 " changes identity inside the stencil");
      }
    }
    return s.energies(alpha) - s.energies(beta);
  };
  const double dl = step / r;
  RadialDerivative out;
  out.radius = r;
  out.fd_derivative = (gap_at(1.0 + dl) - gap_at(1.0 - dl)) / (2.0 * step);
  out.analytic = (mid.energies(alpha) - mid.energies(beta)) / r;
  return out;
}

}  // namespace mblflow
