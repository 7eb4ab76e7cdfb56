// mblflow command-line driver.
//   mblflow ensemble --n 8 --gamma 0.01,0.05 --realizations 200 --out results
//   mblflow flow-trace --n 6 --gamma 0.02 --seed 7

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mblflow/errors.hpp"
#include "mblflow/harness.hpp"

namespace {

using namespace mblflow;

constexpr int kExitConfig = 1;
constexpr int kExitFailures = 2;

// Flag name -> config key. Every override goes through apply_config_entry so flags and
// config files share one validator.
struct FlagKey {
  const char* flag;
  const char* key;
  const char* help;
};
const std::vector<FlagKey> kFlagKeys = {
    {"n", "n", "chain length"},
    {"gamma", "gamma", "transverse coupling, comma list for a sweep"},
    {"epsilon", "epsilon", "resonance cutoff or 'default' (gamma^(1/20))"},
    {"realizations", "realizations", "disorder draws per gamma"},
    {"seed", "seed", "master seed"},
    {"beta", "beta", "Gibbs weighting at inverse temperature beta"},
    {"out", "out", "output directory"},
    {"workers", "workers", "parallel workers"},
    {"max-steps", "max_steps", "flow step cap"},
    {"format", "format", "csv or json"},
    {"source", "source", "eigenvectors from flow or oracle"},
    {"site", "site", "localization site, -1 for the center"},
    {"delta-grid", "delta_grid", "increasing gap thresholds for level statistics"},
    {"observable", "observable", "local operator, e.g. z:0 or z:0,x:1"},
    {"law", "law", "coupling law: uniform or triangular"},
};

struct Flags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::size_t index = 0;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "flat key = value config file");
  for (const auto& k : kFlagKeys) cmd->add_option(std::string("--") + k.flag, f.values[k.flag], k.help);
}

RunConfig resolve(CLI::App* cmd, const Flags& f, RunConfig base) {
  RunConfig cfg = f.config_path.empty() ? std::move(base) : load_config(f.config_path, std::move(base));
  for (const auto& k : kFlagKeys) {
    if (cmd->count(std::string("--") + k.flag) > 0) apply_config_entry(cfg, k.key, f.values.at(k.flag));
  }
  cfg.validate();
  return cfg;
}

int finish(const EnsembleReport& report, const RunConfig& cfg) {
  for (const auto& g : report.per_gamma) {
    for (const auto& r : g.records) {
      if (!r.ok) std::cerr << "realization " << r.index << " (gamma " << g.gamma << ") failed: " << r.error << '\n';
    }
  }
  for (const auto& path : emit_report(report, cfg.format, cfg.out_dir)) std::cout << "wrote " << path << '\n';
  if (report.excessive_failures()) {
    std::cerr << report.failures() << " of " << report.total() << " realizations failed\n";
    return kExitFailures;
  }
  return 0;
}

void print_summary(const EnsembleReport& report) {
  for (const auto& g : report.per_gamma) {
    std::cout << "gamma " << g.gamma << ": " << g.n_ok << " ok, " << g.n_failed << " failed, " << g.n_converged
              << " converged\n";
    for (const auto& s : g.strata) {
      if (s.score) std::cout << "  score[" << s.name << "] " << s.score->mean << " (n=" << s.count << ")\n";
    }
    if (g.levels && g.levels->fit_ok) {
      std::cout << "  nu " << g.levels->fitted_nu << " [" << g.levels->nu_ci_lo << ", " << g.levels->nu_ci_hi << "]\n";
    }
  }
}

// Slope of log median max_alpha |<O_i;O_j>| over distances 2..6 (clipped to the chain).
void print_decay(const EnsembleReport& report) {
  for (const auto& g : report.per_gamma) {
    if (!g.profile) continue;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < g.profile->distance.size(); ++i) {
      const int r = g.profile->distance[i];
      const double m = g.profile->median_max[i];
      if (r >= 2 && r <= 6 && m > 0.0) {
        x.push_back(r);
        y.push_back(std::log(m));
      }
    }
    if (x.size() >= 2) std::cout << "gamma " << g.gamma << ": decay slope " << stats::least_squares(x, y).slope << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scale-by-scale diagonalization of a disordered spin chain"};
  app.require_subcommand(1);

  Flags run_f, ens_f, lvl_f, corr_f, trace_f;
  auto* run = app.add_subcommand("run", "single realization with its full flow trace");
  add_common(run, run_f);
  run->add_option("--index", run_f.index, "realization index under the master seed");
  auto* ens = app.add_subcommand("ensemble", "ensemble aggregates over every gamma");
  add_common(ens, ens_f);
  auto* lvl = app.add_subcommand("level-stats", "minimum level spacing statistics");
  add_common(lvl, lvl_f);
  auto* corr = app.add_subcommand("corr-decay", "connected correlation profile and decay slope");
  add_common(corr, corr_f);
  auto* trace = app.add_subcommand("flow-trace", "print the flow trace CSV of one realization");
  add_common(trace, trace_f);
  trace->add_option("--index", trace_f.index, "realization index under the master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed() || trace->parsed()) {
      auto* cmd = run->parsed() ? run : trace;
      const Flags& f = run->parsed() ? run_f : trace_f;
      const RunConfig cfg = resolve(cmd, f, {});
      const double gamma = cfg.gammas.front();
      const std::uint64_t seed = derive_seed(cfg.master_seed, f.index);
      const Disorder d = sample_disorder(seed, cfg.model(gamma));
      FlowParams fp = cfg.flow;
      fp.epsilon = cfg.epsilon;
      const FlowState st = run_flow(d, fp);
      const std::string csv = flow_trace_csv(st);
      if (trace->parsed()) {
        std::cout << csv;
        return 0;
      }
      RunConfig one = cfg;
      one.realizations = 1;
      const RealizationRecord rec = run_realization(one, gamma, f.index);
      nlohmann::json summary{{"index", f.index},        {"seed", seed},
                             {"gamma", gamma},          {"epsilon", st.epsilon},
                             {"converged", st.converged}, {"steps", st.step},
                             {"resonant_sites", st.resonant_sites},
                             {"small_blocks", rec.n_small_blocks},
                             {"large_sites", rec.n_large_sites},
                             {"site_abs_sz", rec.site_abs_sz},
                             {"min_spacing", rec.min_spacing}};
      nlohmann::json out{{"disorder", to_json(d)}, {"summary", summary}, {"config", to_json(cfg)}};
      std::filesystem::create_directories(cfg.out_dir);
      const std::string trace_path = cfg.out_dir + "/flow_trace.csv";
      const std::string json_path = cfg.out_dir + "/realization.json";
      std::ofstream(trace_path) << csv;
      std::ofstream(json_path) << out.dump(2) << '\n';
      std::cout << csv << "wrote " << trace_path << "\nwrote " << json_path << '\n';
      return 0;
    }

    if (ens->parsed()) {
      const RunConfig cfg = resolve(ens, ens_f, {});
      const EnsembleReport report = run_ensemble(cfg);
      print_summary(report);
      return finish(report, cfg);
    }

    if (lvl->parsed()) {
      RunConfig base;
      base.source = EigenSource::kOracle;
      base.correlations = false;
      base.connectivity = false;
      base.realizations = 2000;
      for (int i = 0; i <= 8; ++i) base.delta_grid.push_back(std::pow(10.0, -6.0 + 0.25 * i));
      const RunConfig cfg = resolve(lvl, lvl_f, base);
      if (cfg.delta_grid.empty()) throw ConfigError("level-stats needs a delta grid");
      const EnsembleReport report = run_ensemble(cfg);
      print_summary(report);
      return finish(report, cfg);
    }

    if (corr->parsed()) {
      RunConfig base;
      base.connectivity = false;
      const RunConfig cfg = resolve(corr, corr_f, base);
      const EnsembleReport report = run_ensemble(cfg);
      print_decay(report);
      return finish(report, cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
