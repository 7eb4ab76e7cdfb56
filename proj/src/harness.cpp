#include "mblflow/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mblflow/errors.hpp"
#include "mblflow/parallel.hpp"

namespace mblflow {

namespace fs = std::filesystem;

namespace {

constexpr int kGeometryOnlyMaxSites = 4096;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used, 0);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (double x : xs) {
    if (!s.empty()) s += ',';
    s += fmt(x);
  }
  return s;
}

void write_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

nlohmann::json interval_json(const stats::Interval& ci) { return {ci.lo, ci.hi}; }

nlohmann::json profile_json(const CorrelationProfile& p) {
  return {{"distance", p.distance},          {"median_max", p.median_max}, {"q90_max", p.q90_max},
          {"median_avg", p.median_avg},      {"q90_avg", p.q90_avg},       {"n_realizations", p.n_realizations}};
}

nlohmann::json connectivity_json(const ConnectivityEstimate& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : c.table) rows.push_back({e.x, e.y, e.hits, e.prob, e.ci_lo, e.ci_hi});
  return {{"kind", to_string(c.kind)}, {"k", c.k}, {"n", c.n}, {"n_realizations", c.n_realizations},
          {"columns", {"x", "y", "hits", "prob", "ci_lo", "ci_hi"}}, {"rows", rows}};
}

nlohmann::json levels_json(const LevelStatsReport& l) {
  nlohmann::json j = level_fit_json(l);
  j["delta"] = l.delta_grid;
  j["hits"] = l.hits;
  j["prob"] = l.empirical_prob;
  j["ci_lo"] = l.ci_lo;
  j["ci_hi"] = l.ci_hi;
  return j;
}

std::string gamma_dir(const GammaAggregate& g) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "gamma_%g", g.gamma);
  return buf;
}

GammaAggregate aggregate(const RunConfig& cfg, double gamma, std::vector<RealizationRecord> records) {
  GammaAggregate g;
  g.gamma = gamma;
  g.epsilon = cfg.epsilon.value_or(default_epsilon(gamma));

  std::vector<double> all, conv, nonconv, gaps;
  std::vector<RealizationCorrelations> corr;
  std::vector<BlockSet> blocks;
  for (const auto& r : records) {
    if (!r.ok) {
      ++g.n_failed;
      continue;
    }
    ++g.n_ok;
    g.resonant_site_hits += r.n_resonant_sites;
    g.site_samples += static_cast<std::size_t>(cfg.n);
    if (cfg.eigenstates) {
      all.push_back(r.score);
      (r.converged ? conv : nonconv).push_back(r.score);
      gaps.push_back(r.min_spacing);
      if (cfg.correlations) corr.push_back(r.correlations);
    }
    if (r.converged) ++g.n_converged;
    if (cfg.connectivity) blocks.push_back(r.blocks);
  }

  auto stratum = [](const char* name, const std::vector<double>& v) {
    Stratum s{name, v.size(), std::nullopt};
    if (!v.empty()) s.score = score_from_values(v);
    return s;
  };
  if (cfg.eigenstates) {
    g.strata = {stratum("all", all), stratum("converged", conv), stratum("nonconverged", nonconv)};
  }
  if (g.site_samples > 0) g.resonant_fraction_ci = stats::wilson(g.resonant_site_hits, g.site_samples);
  if (!corr.empty()) g.profile = profile_from_realizations(corr);
  if (!blocks.empty()) {
    for (auto kind : {ConnectivityKind::kP, ConnectivityKind::kQ, ConnectivityKind::kR}) {
      g.connectivity.push_back(estimate_connectivity(blocks, kind, cfg.connectivity_step, 1));
    }
  }
  if (cfg.eigenstates && !cfg.delta_grid.empty() && !gaps.empty()) {
    LevelStatsOptions opt;
    opt.bootstrap_seed = derive_seed(cfg.master_seed, std::numeric_limits<std::uint64_t>::max());
    g.levels = level_stats_from_gaps(gaps, cfg.delta_grid, opt);
  }
  g.records = std::move(records);
  return g;
}

}  // namespace

std::string to_string(EigenSource s) { return s == EigenSource::kFlow ? "flow" : "oracle"; }
std::string to_string(ReportFormat f) { return f == ReportFormat::kCsv ? "csv" : "json"; }

void RunConfig::validate() const {
  if (n < 1) throw ConfigError("n must be >= 1");
  if (eigenstates && n > flow.max_sites) {
    throw ConfigError("n = " + std::to_string(n) + " exceeds the dense cap of " + std::to_string(flow.max_sites));
  }
  if (n > kGeometryOnlyMaxSites) throw ConfigError("n is too large");
  if (gammas.empty()) throw ConfigError("at least one gamma is required");
  for (double g : gammas) {
    if (!(g >= 0.0 && g < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  }
  if (epsilon && !(*epsilon > 0.0 && *epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (realizations < 1) throw ConfigError("realizations must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (site >= n) throw ConfigError("site outside the chain");
  if (connectivity_step < 1) throw ConfigError("connectivity_step must be >= 1");
  if (!std::isfinite(weighting.beta)) throw ConfigError("beta must be finite");
  for (std::size_t i = 0; i < delta_grid.size(); ++i) {
    if (!(delta_grid[i] > 0.0)) throw ConfigError("delta_grid entries must be positive");
    if (i > 0 && !(delta_grid[i] > delta_grid[i - 1])) throw ConfigError("delta_grid must be increasing");
  }
  if (flow.max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (out_dir.empty()) throw ConfigError("out must be a directory path");
  observable.validate();
}

ModelParams RunConfig::model(double gamma) const {
  ModelParams p;
  p.n = n;
  p.gamma = gamma;
  p.epsilon = epsilon;
  p.law = law;
  p.max_sites = eigenstates ? flow.max_sites : kGeometryOnlyMaxSites;
  return p;
}

void apply_config_entry(RunConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  if (key == "n") {
    cfg.n = static_cast<int>(to_int(key, v));
  } else if (key == "gamma") {
    cfg.gammas = to_list(key, v);
  } else if (key == "epsilon") {
    if (v.empty() || v == "default") {
      cfg.epsilon.reset();
    } else {
      cfg.epsilon = to_double(key, v);
    }
  } else if (key == "law") {
    cfg.law = coupling_law_from_string(v);
  } else if (key == "realizations") {
    const long long r = to_int(key, v);
    if (r < 1) throw ConfigError("realizations must be >= 1");
    cfg.realizations = static_cast<std::size_t>(r);
  } else if (key == "seed") {
    cfg.master_seed = to_u64(key, v);
  } else if (key == "weighting") {
    if (v == "uniform") {
      cfg.weighting = Weighting::uniform();
    } else if (v == "gibbs") {
      cfg.weighting.kind = Weighting::Kind::kGibbs;
    } else {
      throw ConfigError("weighting must be uniform or gibbs");
    }
  } else if (key == "beta") {
    cfg.weighting = Weighting::gibbs(to_double(key, v));
  } else if (key == "delta_grid") {
    cfg.delta_grid = to_list(key, v);
  } else if (key == "observable") {
    cfg.observable = LocalOperatorSpec::parse(v);
  } else if (key == "max_steps") {
    cfg.flow.max_steps = static_cast<int>(to_int(key, v));
  } else if (key == "m0") {
    cfg.flow.m0 = static_cast<int>(to_int(key, v));
  } else if (key == "offdiag_tol") {
    cfg.flow.offdiag_tol = to_double(key, v);
  } else if (key == "drift_tol") {
    cfg.flow.drift_tol = to_double(key, v);
  } else if (key == "check_spectrum") {
    cfg.flow.check_spectrum = to_bool(key, v);
  } else if (key == "max_sites") {
    cfg.flow.max_sites = static_cast<int>(to_int(key, v));
  } else if (key == "out") {
    cfg.out_dir = v;
  } else if (key == "workers") {
    cfg.workers = static_cast<int>(to_int(key, v));
  } else if (key == "source") {
    if (v == "flow") {
      cfg.source = EigenSource::kFlow;
    } else if (v == "oracle") {
      cfg.source = EigenSource::kOracle;
    } else {
      throw ConfigError("source must be flow or oracle");
    }
  } else if (key == "site") {
    cfg.site = static_cast<int>(to_int(key, v));
  } else if (key == "format") {
    if (v == "csv") {
      cfg.format = ReportFormat::kCsv;
    } else if (v == "json") {
      cfg.format = ReportFormat::kJson;
    } else {
      throw ConfigError("format must be csv or json");
    }
  } else if (key == "connectivity_step") {
    cfg.connectivity_step = static_cast<int>(to_int(key, v));
  } else if (key == "eigenstates") {
    cfg.eigenstates = to_bool(key, v);
  } else if (key == "correlations") {
    cfg.correlations = to_bool(key, v);
  } else if (key == "connectivity") {
    cfg.connectivity = to_bool(key, v);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      apply_config_entry(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string config_text(const RunConfig& c) {
  std::ostringstream os;
  os << "n = " << c.n << '\n';
  os << "gamma = " << join(c.gammas) << '\n';
  os << "epsilon = " << (c.epsilon ? fmt(*c.epsilon) : "default") << '\n';
  os << "law = " << to_string(c.law) << '\n';
  os << "realizations = " << c.realizations << '\n';
  os << "seed = " << c.master_seed << '\n';
  os << "weighting = " << (c.weighting.kind == Weighting::Kind::kGibbs ? "gibbs" : "uniform") << '\n';
  if (c.weighting.kind == Weighting::Kind::kGibbs) os << "beta = " << fmt(c.weighting.beta) << '\n';
  os << "delta_grid = " << join(c.delta_grid) << '\n';
  os << "observable = " << c.observable.to_text() << '\n';
  os << "max_steps = " << c.flow.max_steps << '\n';
  os << "m0 = " << c.flow.m0 << '\n';
  os << "offdiag_tol = " << fmt(c.flow.offdiag_tol) << '\n';
  os << "drift_tol = " << fmt(c.flow.drift_tol) << '\n';
  os << "check_spectrum = " << (c.flow.check_spectrum ? "true" : "false") << '\n';
  os << "max_sites = " << c.flow.max_sites << '\n';
  os << "out = " << c.out_dir << '\n';
  os << "workers = " << c.workers << '\n';
  os << "source = " << to_string(c.source) << '\n';
  os << "site = " << c.site << '\n';
  os << "format = " << to_string(c.format) << '\n';
  os << "connectivity_step = " << c.connectivity_step << '\n';
  os << "eigenstates = " << (c.eigenstates ? "true" : "false") << '\n';
  os << "correlations = " << (c.correlations ? "true" : "false") << '\n';
  os << "connectivity = " << (c.connectivity ? "true" : "false") << '\n';
  return os.str();
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["n"] = c.n;
  j["gamma"] = c.gammas;
  j["epsilon"] = c.epsilon ? nlohmann::json(*c.epsilon) : nlohmann::json(nullptr);
  j["law"] = to_string(c.law);
  j["realizations"] = c.realizations;
  j["seed"] = c.master_seed;
  j["weighting"] = c.weighting.kind == Weighting::Kind::kGibbs ? "gibbs" : "uniform";
  j["beta"] = c.weighting.beta;
  j["delta_grid"] = c.delta_grid;
  j["observable"] = to_json(c.observable);
  j["max_steps"] = c.flow.max_steps;
  j["m0"] = c.flow.m0;
  j["offdiag_tol"] = c.flow.offdiag_tol;
  j["drift_tol"] = c.flow.drift_tol;
  j["check_spectrum"] = c.flow.check_spectrum;
  j["max_sites"] = c.flow.max_sites;
  j["out"] = c.out_dir;
  j["workers"] = c.workers;
  j["source"] = to_string(c.source);
  j["site"] = c.site;
  j["format"] = to_string(c.format);
  j["connectivity_step"] = c.connectivity_step;
  j["eigenstates"] = c.eigenstates;
  j["correlations"] = c.correlations;
  j["connectivity"] = c.connectivity;
  return j;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  std::uint64_t z = master_seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RealizationRecord run_realization(const RunConfig& cfg, double gamma, std::size_t index) {
  RealizationRecord rec;
  rec.index = index;
  rec.seed = derive_seed(cfg.master_seed, index);
  rec.gamma = gamma;
  rec.min_spacing = std::nan("");

  const ModelParams mp = cfg.model(gamma);
  const Disorder d = sample_disorder(rec.seed, mp);
  const double eps = mp.resolved_epsilon();
  const auto resonant = detect_resonant_sites(d, eps);
  rec.n_resonant_sites = resonant.size();

  if (!cfg.eigenstates) {
    rec.blocks = build_blocks_step1(resonant, d.n, cfg.flow.m0);
    rec.n_small_blocks = rec.blocks.small.size();
    rec.n_large_sites = rec.blocks.large.size();
    rec.ok = true;
    return rec;
  }

  EigenSystem sys;
  if (cfg.source == EigenSource::kFlow) {
    FlowParams fp = cfg.flow;
    fp.gamma = gamma;
    fp.epsilon = eps;
    FlowState st = run_flow(d, fp);
    rec.converged = st.converged;
    rec.steps = st.step;
    rec.final_offdiag = st.trace.back().offdiag_norm;
    rec.blocks = std::move(st.blocks);
    if (rec.blocks.n == 0) rec.blocks.n = d.n;
    sys = eigensystem_from_flow(st);
  } else {
    const Spectrum sp = diagonalize(build_hamiltonian(d, cfg.flow.max_sites));
    rec.converged = true;
    rec.blocks = build_blocks_step1(resonant, d.n, cfg.flow.m0);
    sys = eigensystem_from_oracle(sp, d.n);
  }
  rec.n_small_blocks = rec.blocks.small.size();
  rec.n_large_sites = rec.blocks.large.size();

  Vector sorted = sys.energies;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  rec.min_spacing = min_level_spacing(sorted);

  rec.site_abs_sz.reserve(static_cast<std::size_t>(d.n));
  for (int i = 0; i < d.n; ++i) rec.site_abs_sz.push_back(averaged_abs_sz(sys, i, cfg.weighting));
  rec.score = rec.site_abs_sz[static_cast<std::size_t>(cfg.site < 0 ? d.n / 2 : cfg.site)];
  if (cfg.correlations) rec.correlations = realization_correlations(sys, cfg.observable, cfg.weighting);
  rec.ok = true;
  return rec;
}

std::size_t EnsembleReport::total() const {
  std::size_t t = 0;
  for (const auto& g : per_gamma) t += g.n_ok + g.n_failed;
  return t;
}

std::size_t EnsembleReport::failures() const {
  std::size_t f = 0;
  for (const auto& g : per_gamma) f += g.n_failed;
  return f;
}

bool EnsembleReport::excessive_failures() const { return failures() * 100 > total(); }

EnsembleReport run_ensemble(const RunConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  EnsembleReport report;
  report.config = cfg;
  for (double gamma : cfg.gammas) {
    std::vector<RealizationRecord> records(cfg.realizations);
    parallel_for(cfg.realizations, cfg.workers, [&](std::size_t i) {
      try {
        records[i] = run_realization(cfg, gamma, i);
      } catch (const std::exception& e) {
        RealizationRecord failed;
        failed.index = i;
        failed.seed = derive_seed(cfg.master_seed, i);
        failed.gamma = gamma;
        failed.error = e.what();
        failed.min_spacing = std::nan("");
        records[i] = std::move(failed);
      }
    });
    report.per_gamma.push_back(aggregate(cfg, gamma, std::move(records)));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

nlohmann::json aggregates_json(const EnsembleReport& r) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& g : r.per_gamma) {
    nlohmann::json j;
    j["gamma"] = g.gamma;
    j["epsilon"] = g.epsilon;
    j["n_ok"] = g.n_ok;
    j["n_failed"] = g.n_failed;
    j["n_converged"] = g.n_converged;
    nlohmann::json strata = nlohmann::json::array();
    for (const auto& s : g.strata) {
      nlohmann::json sj{{"name", s.name}, {"count", s.count}};
      if (s.score) {
        sj["mean"] = s.score->mean;
        sj["ci"] = interval_json(s.score->ci);
      }
      strata.push_back(sj);
    }
    j["localization"] = strata;
    j["resonant_sites"] = {{"hits", g.resonant_site_hits},
                           {"samples", g.site_samples},
                           {"ci", interval_json(g.resonant_fraction_ci)}};
    if (g.profile) j["correlation_profile"] = profile_json(*g.profile);
    nlohmann::json conn = nlohmann::json::array();
    for (const auto& c : g.connectivity) conn.push_back(connectivity_json(c));
    j["connectivity"] = conn;
    if (g.levels) j["level_stats"] = levels_json(*g.levels);
    out.push_back(j);
  }
  return out;
}

std::string realizations_csv(const GammaAggregate& g) {
  std::ostringstream os;
  os << "index,seed,gamma,ok,converged,steps,final_offdiag,score,n_resonant_sites,n_small_blocks,n_large_sites,"
        "min_spacing,error\n";
  for (const auto& r : g.records) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << r.index << ',' << r.seed << ',' << fmt(r.gamma) << ',' << r.ok << ',' << r.converged << ',' << r.steps
       << ',' << fmt(r.final_offdiag) << ',' << fmt(r.score) << ',' << r.n_resonant_sites << ','
       << r.n_small_blocks << ',' << r.n_large_sites << ',' << fmt(r.min_spacing) << ',' << err << '\n';
  }
  return os.str();
}

std::string localization_csv(const EnsembleReport& r) {
  std::ostringstream os;
  os << "gamma,stratum,count,mean,ci_lo,ci_hi\n";
  for (const auto& g : r.per_gamma) {
    for (const auto& s : g.strata) {
      os << fmt(g.gamma) << ',' << s.name << ',' << s.count << ',';
      if (s.score) {
        os << fmt(s.score->mean) << ',' << fmt(s.score->ci.lo) << ',' << fmt(s.score->ci.hi) << '\n';
      } else {
        os << ",,\n";
      }
    }
  }
  return os.str();
}

std::vector<std::string> emit_report(const EnsembleReport& r, ReportFormat format, const std::string& out_dir) {
  std::size_t ok = 0;
  for (const auto& g : r.per_gamma) ok += g.n_ok;
  if (r.per_gamma.empty() || ok == 0) throw Error("emit_report: empty ensemble, nothing written");

  std::vector<std::pair<std::string, std::string>> files;
  if (format == ReportFormat::kCsv) {
    if (r.config.eigenstates) files.emplace_back("localization.csv", localization_csv(r));
    for (const auto& g : r.per_gamma) {
      const std::string dir = gamma_dir(g) + "/";
      files.emplace_back(dir + "realizations.csv", realizations_csv(g));
      if (g.profile) files.emplace_back(dir + "corr_profile.csv", correlation_profile_csv(*g.profile));
      if (!g.connectivity.empty()) {
        std::string csv;
        for (std::size_t i = 0; i < g.connectivity.size(); ++i) csv += connectivity_csv(g.connectivity[i], i == 0);
        files.emplace_back(dir + "connectivity.csv", csv);
      }
      if (g.levels) {
        files.emplace_back(dir + "level_stats.csv", level_stats_csv(*g.levels));
        files.emplace_back(dir + "level_fit.json", level_fit_json(*g.levels).dump(2) + "\n");
      }
    }
  } else {
    nlohmann::json j;
    j["aggregates"] = aggregates_json(r);
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& g : r.per_gamma) {
      for (const auto& rec : g.records) {
        recs.push_back({{"index", rec.index},
                        {"seed", rec.seed},
                        {"gamma", rec.gamma},
                        {"ok", rec.ok},
                        {"error", rec.error},
                        {"converged", rec.converged},
                        {"steps", rec.steps},
                        {"final_offdiag", rec.final_offdiag},
                        {"site_abs_sz", rec.site_abs_sz},
                        {"n_resonant_sites", rec.n_resonant_sites},
                        {"n_small_blocks", rec.n_small_blocks},
                        {"n_large_sites", rec.n_large_sites},
                        {"min_spacing", std::isnan(rec.min_spacing) ? nlohmann::json(nullptr)
                                                                    : nlohmann::json(rec.min_spacing)}});
      }
    }
    j["realizations"] = recs;
    files.emplace_back("report.json", j.dump(1) + "\n");
  }
  files.emplace_back("run.cfg", config_text(r.config));

  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["master_seed"] = r.config.master_seed;
  manifest["seed_derivation"] = "splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15)";
  manifest["config"] = to_json(r.config);
  manifest["wall_seconds"] = r.wall_seconds;
  manifest["realizations_total"] = r.total();
  manifest["realizations_failed"] = r.failures();
  nlohmann::json names = nlohmann::json::array();
  for (const auto& f : files) names.push_back(f.first);
  manifest["files"] = names;
  files.emplace_back("manifest.json", manifest.dump(2) + "\n");

  std::vector<std::string> written;
  const fs::path root(out_dir);
  for (const auto& [rel, content] : files) {
    const fs::path path = root / rel;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    write_file(path, content);
    written.push_back(path.string());
  }
  return written;
}

}  // namespace mblflow
