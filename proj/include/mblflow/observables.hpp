#pragma once

#include <bit>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mblflow/flow.hpp"
#include "mblflow/oracle.hpp"
#include "mblflow/spin_config.hpp"
#include "mblflow/stats.hpp"
#include "mblflow/types.hpp"

namespace mblflow {

enum class Axis { kX, kY, kZ };

struct PauliFactor {
  int offset = 0;  // relative to the anchor site
  Axis axis = Axis::kZ;
};

/// Product of Pauli factors on distinct sites around an anchor. The real-symmetric
/// representation requires an even number of S^y factors.
struct LocalOperatorSpec {
  std::vector<PauliFactor> factors{{0, Axis::kZ}};
  int radius = 0;

  /// Throws ConfigError for empty specs, offsets beyond the radius, repeated sites, or odd S^y count.
  void validate() const;

  static LocalOperatorSpec single_z() { return {}; }
  /// "z:0,x:1" style: comma-separated axis:offset factors.
  static LocalOperatorSpec parse(const std::string& text);
  [[nodiscard]] std::string to_text() const;
};

nlohmann::json to_json(const LocalOperatorSpec& spec);
LocalOperatorSpec operator_spec_from_json(const nlohmann::json& j);

/// Signed permutation O|b> = sign(b) |b ^ flip>, the matrix form of a real Pauli string.
struct PauliString {
  BasisIndex flip = 0;
  BasisIndex sign_mask = 0;  // sites carrying S^z or S^y
  int global_sign = 1;       // (-1)^(#y / 2)
  int n = 0;

  [[nodiscard]] double sign(BasisIndex b) const {
    return (std::popcount(b & sign_mask) & 1) ? -global_sign : global_sign;
  }
  [[nodiscard]] Vector apply(const Vector& v) const;
  [[nodiscard]] OperatorMatrix to_matrix() const;
};

/// Operator spec placed at anchor `site` on an n-site chain; throws DimensionError if a factor leaves the chain.
PauliString instantiate(const LocalOperatorSpec& spec, int site, int n);
/// S^z on one site.
PauliString sz(int site, int n);

double expectation(const OperatorMatrix& R, const OperatorMatrix& O, Eigen::Index alpha);
double expectation(const OperatorMatrix& R, const PauliString& O, Eigen::Index alpha);

double connected_correlation(const OperatorMatrix& R, const OperatorMatrix& Oi, const OperatorMatrix& Oj,
                             Eigen::Index alpha);
double connected_correlation(const OperatorMatrix& R, const PauliString& Oi, const PauliString& Oj,
                             Eigen::Index alpha);

struct Weighting {
  enum class Kind { kUniform, kGibbs } kind = Kind::kUniform;
  double beta = 0.0;

  static Weighting uniform() { return {}; }
  static Weighting gibbs(double beta) { return {Kind::kGibbs, beta}; }
};

/// Normalized state weights; Gibbs weights use a max-shift so exp never overflows.
std::vector<double> state_weights(const Weighting& w, std::span<const double> energies);
double state_average(std::span<const double> values, const Weighting& w, std::span<const double> energies = {});

/// Eigenbasis of one realization: column alpha of `vectors` has energy energies(alpha).
struct EigenSystem {
  int n = 0;
  Vector energies;
  OperatorMatrix vectors;
};

EigenSystem eigensystem_from_flow(const FlowState& state);
EigenSystem eigensystem_from_oracle(const Spectrum& s, int n);

/// Pairs flow states with oracle states: sort both by energy, then resolve near-degenerate
/// clusters (relative gap < rel_tol of ||H||_2) by maximal overlap. Cluster members are marked
/// excluded from state-by-state comparisons.
struct StateMatching {
  std::vector<Eigen::Index> oracle_of;  // oracle column for each flow column
  std::vector<bool> excluded;           // per flow column
};
StateMatching match_states(const EigenSystem& flow, const Spectrum& oracle, double rel_tol = 1e-10);

/// Av_alpha |<S^z_site>_alpha| for one realization.
double averaged_abs_sz(const EigenSystem& sys, int site, const Weighting& w);

struct ScoreEstimate {
  double mean = 0.0;
  stats::Interval ci;
  std::size_t n_realizations = 0;
};

/// Disorder mean of Av_alpha |<S^z_site>_alpha|; site < 0 selects the center n/2.
ScoreEstimate localization_score(std::span<const EigenSystem> ensemble, int site, const Weighting& w,
                                 std::size_t min_realizations = 100);
ScoreEstimate score_from_values(std::span<const double> per_realization);

/// Centered pair for distance r: i = (n - 1 - r) / 2, j = i + r.
std::pair<int, int> centered_pair(int n, int r);

/// For one realization and each distance r in [0, n), max_alpha and Av_alpha of |<O_i;O_j>_alpha|.
struct RealizationCorrelations {
  std::vector<double> max_abs;
  std::vector<double> avg_abs;
};
RealizationCorrelations realization_correlations(const EigenSystem& sys, const LocalOperatorSpec& spec,
                                                 const Weighting& w);

struct CorrelationProfile {
  std::vector<int> distance;
  std::vector<double> median_max;
  std::vector<double> q90_max;
  std::vector<double> median_avg;
  std::vector<double> q90_avg;
  std::size_t n_realizations = 0;
};

CorrelationProfile profile_from_realizations(std::span<const RealizationCorrelations> per_realization);
CorrelationProfile correlation_profile(std::span<const EigenSystem> ensemble, const LocalOperatorSpec& spec,
                                       const Weighting& w, std::size_t min_realizations = 100);

/// Rows distance,median_max,q90_max,median_avg,q90_avg,n_realizations.
std::string correlation_profile_csv(const CorrelationProfile& p);

}  // namespace mblflow
