#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mblflow/flow.hpp"
#include "mblflow/geometry.hpp"
#include "mblflow/model.hpp"
#include "mblflow/observables.hpp"
#include "mblflow/oracle.hpp"

namespace mblflow {

inline constexpr const char* kVersion = MBLFLOW_VERSION;

enum class EigenSource { kFlow, kOracle };
enum class ReportFormat { kCsv, kJson };

std::string to_string(EigenSource s);
std::string to_string(ReportFormat f);

struct RunConfig {
  int n = 8;
  std::vector<double> gammas{0.05};
  std::optional<double> epsilon;
  CouplingLaw law = CouplingLaw::kUniform;
  std::size_t realizations = 100;
  std::uint64_t master_seed = 1;
  Weighting weighting;
  std::vector<double> delta_grid;  // empty: no level statistics
  LocalOperatorSpec observable;
  FlowParams flow;
  std::string out_dir = "mblflow_out";
  int workers = 1;
  EigenSource source = EigenSource::kFlow;
  int site = -1;  // localization site, < 0 for the center
  ReportFormat format = ReportFormat::kCsv;
  int connectivity_step = 1;

  // Pipeline switches. Without eigenstates nothing dense is built, so step-1 geometry runs
  // at any chain length.
  bool eigenstates = true;
  bool correlations = true;
  bool connectivity = true;

  /// Throws ConfigError.
  void validate() const;
  [[nodiscard]] ModelParams model(double gamma) const;
};

/// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
/// One key; the CLI applies flag overrides through this too.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);
/// Echo that parse_config reads back to an equal configuration.
std::string config_text(const RunConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);

/// splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15). For a fixed master the map is a
/// bijection of the index, so streams never collide.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

struct RealizationRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  bool ok = false;
  std::string error;
  bool converged = false;
  int steps = 0;
  double final_offdiag = 0.0;
  std::vector<double> site_abs_sz;  // Av_alpha |<S^z_i>_alpha| per site
  double score = 0.0;               // the entry at the localization site
  std::size_t n_resonant_sites = 0;
  std::size_t n_small_blocks = 0;
  std::size_t n_large_sites = 0;
  double min_spacing = 0.0;  // NaN when eigenstates are off
  RealizationCorrelations correlations;
  BlockSet blocks;
};

/// Runs one realization of the pipeline; errors propagate.
RealizationRecord run_realization(const RunConfig& cfg, double gamma, std::size_t index);

struct Stratum {
  std::string name;  // all | converged | nonconverged
  std::size_t count = 0;
  std::optional<ScoreEstimate> score;
};

struct GammaAggregate {
  double gamma = 0.0;
  double epsilon = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  std::size_t n_converged = 0;
  std::vector<Stratum> strata;
  std::size_t resonant_site_hits = 0;
  std::size_t site_samples = 0;
  stats::Interval resonant_fraction_ci;
  std::optional<CorrelationProfile> profile;
  std::vector<ConnectivityEstimate> connectivity;
  std::optional<LevelStatsReport> levels;
  std::vector<RealizationRecord> records;
};

struct EnsembleReport {
  RunConfig config;
  std::vector<GammaAggregate> per_gamma;
  double wall_seconds = 0.0;

  [[nodiscard]] std::size_t total() const;
  [[nodiscard]] std::size_t failures() const;
  /// More than 1% of realizations errored.
  [[nodiscard]] bool excessive_failures() const;
};

/// Realizations run in parallel; aggregates are merged in index order, so every number is
/// independent of the worker count and of completion order.
EnsembleReport run_ensemble(const RunConfig& cfg);

/// Aggregates only (no wall time, no per-realization records): the payload compared across
/// worker counts and repeated runs.
nlohmann::json aggregates_json(const EnsembleReport& r);

/// Rows index,seed,gamma,ok,converged,steps,final_offdiag,score,n_resonant_sites,n_small_blocks,
/// n_large_sites,min_spacing,error.
std::string realizations_csv(const GammaAggregate& g);
/// Rows gamma,stratum,count,mean,ci_lo,ci_hi.
std::string localization_csv(const EnsembleReport& r);

/// Writes every artifact plus manifest.json and run.cfg under `out_dir`; returns the paths.
/// Contents are assembled in memory first, so an empty ensemble writes nothing.
std::vector<std::string> emit_report(const EnsembleReport& r, ReportFormat format, const std::string& out_dir);

}  // namespace mblflow
