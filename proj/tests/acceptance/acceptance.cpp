// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance [criterion numbers...]   (no arguments runs all nine)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mblflow/errors.hpp"
#include "mblflow/flow.hpp"
#include "mblflow/geometry.hpp"
#include "mblflow/harness.hpp"
#include "mblflow/model.hpp"
#include "mblflow/observables.hpp"
#include "mblflow/oracle.hpp"
#include "mblflow/stats.hpp"

using namespace mblflow;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      if (!pass) detail << "; ";
      pass = false;
      detail << why;
    }
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

Disorder draw(std::uint64_t master, std::size_t index, int n, double gamma) {
  ModelParams mp;
  mp.n = n;
  mp.gamma = gamma;
  return sample_disorder(derive_seed(master, index), mp);
}

// 1. Every step keeps the sorted spectrum and R_cum orthogonal.
Outcome spectrum_invariance() {
  Outcome o;
  double drift = 0.0, orth = 0.0;
  for (double gamma : {0.01, 0.05}) {
    for (std::size_t i = 0; i < 50; ++i) {
      const FlowState st = run_flow(draw(101, i, 8, gamma));
      for (const auto& rec : st.trace) {
        drift = std::max(drift, rec.spectrum_drift);
        orth = std::max(orth, rec.orthogonality);
      }
    }
  }
  o.require(drift <= 1e-9, "drift " + fmt(drift));
  o.require(orth <= 1e-10, "orthogonality " + fmt(orth));
  o.detail << (o.pass ? "" : " | ") << "max drift " << fmt(drift) << ", max |R^T R - I| " << fmt(orth);
  return o;
}

// 2. Converged flow against the dense eigensolver.
Outcome oracle_equivalence() {
  Outcome o;
  double ev = 0.0, ov = 1.0, ex = 0.0, co = 0.0;
  std::size_t excluded = 0, unconverged = 0;
  for (int n : {4, 6, 8}) {
    for (std::size_t i = 0; i < 100; ++i) {
      const Disorder d = draw(202, i, n, 0.02);
      const FlowState st = run_flow(d);
      if (!st.converged) {
        ++unconverged;
        continue;
      }
      const Spectrum sp = diagonalize(build_hamiltonian(d));
      const EigenSystem fs = eigensystem_from_flow(st);
      const double scale = spectral_radius(sp.energies);
      std::vector<double> diag(fs.energies.data(), fs.energies.data() + fs.energies.size());
      std::sort(diag.begin(), diag.end());
      for (Eigen::Index a = 0; a < sp.energies.size(); ++a) {
        ev = std::max(ev, std::abs(diag[static_cast<std::size_t>(a)] - sp.energies(a)) / scale);
      }
      const StateMatching m = match_states(fs, sp);
      for (Eigen::Index a = 0; a < fs.vectors.cols(); ++a) {
        const auto k = static_cast<std::size_t>(a);
        if (m.excluded[k]) {
          ++excluded;
          continue;
        }
        const Eigen::Index b = m.oracle_of[k];
        ov = std::min(ov, std::abs(fs.vectors.col(a).dot(sp.vectors.col(b))));
        for (int x = 0; x < n; ++x) {
          ex = std::max(ex, std::abs(expectation(fs.vectors, sz(x, n), a) - expectation(sp.vectors, sz(x, n), b)));
          for (int y = x + 1; y < n; ++y) {
            co = std::max(co, std::abs(connected_correlation(fs.vectors, sz(x, n), sz(y, n), a) -
                                       connected_correlation(sp.vectors, sz(x, n), sz(y, n), b)));
          }
        }
      }
    }
  }
  o.require(unconverged == 0, std::to_string(unconverged) + " flows did not converge");
  o.require(ev <= 1e-8, "eigenvalue deviation " + fmt(ev));
  o.require(ov >= 0.999, "min overlap " + fmt(ov));
  o.require(ex <= 1e-6, "expectation deviation " + fmt(ex));
  o.require(co <= 1e-6, "correlation deviation " + fmt(co));
  o.detail << (o.pass ? "" : " | ") << "eig " << fmt(ev) << ", overlap >= " << fmt(ov) << ", <Sz> " << fmt(ex)
           << ", corr " << fmt(co) << ", excluded states " << excluded;
  return o;
}

// 3. Identities that hold to rounding.
Outcome exact_identities() {
  Outcome o;
  bool zero_ok = true;
  for (std::size_t i = 0; i < 20; ++i) {
    const Disorder d = draw(303, i, 6, 0.0);
    FlowParams fp;
    fp.epsilon = 0.2;
    const FlowState st = run_flow(d, fp);
    const EigenSystem es = eigensystem_from_flow(st);
    const Eigen::Index dim = es.vectors.cols();
    zero_ok = zero_ok && st.R_cum == OperatorMatrix::Identity(dim, dim);
    zero_ok = zero_ok && averaged_abs_sz(es, 3, Weighting::uniform()) == 1.0;
    const auto rc = realization_correlations(es, LocalOperatorSpec::single_z(), Weighting::uniform());
    for (double c : rc.max_abs) zero_ok = zero_ok && c == 0.0;
  }
  o.require(zero_ok, "gamma = 0 identities broken");

  double radial = 0.0, deriv = 0.0;
  std::size_t crossings = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const Disorder d = draw(304, i, 6, 0.05);
    radial = std::max(radial, radial_scaling_check(d, 1.7));
    for (auto [a, b] : {std::pair{63, 0}, std::pair{32, 0}, std::pair{40, 17}}) {
      try {
        const auto rd = radial_derivative_check(d, a, b, 1e-3 * d.coupling_radius());
        deriv = std::max(deriv, std::abs(rd.fd_derivative - rd.analytic) / std::abs(rd.analytic));
      } catch (const LevelCrossingError&) {
        ++crossings;
      }
    }
  }
  o.require(radial <= 1e-10, "radial deviation " + fmt(radial));
  o.require(deriv <= 1e-6, "derivative deviation " + fmt(deriv));
  o.require(crossings == 0, std::to_string(crossings) + " level pairs degenerate");
  o.detail << (o.pass ? "" : " | ") << "gamma=0 exact, radial " << fmt(radial) << ", derivative " << fmt(deriv);
  return o;
}

// 4. Localization score against gamma on matched seeds.
Outcome localization_trend() {
  Outcome o;
  RunConfig c;
  c.n = 8;
  c.gammas = {1e-3, 1e-2, 5e-2};
  c.realizations = 200;
  c.master_seed = 404;
  c.correlations = false;
  c.connectivity = false;
  const EnsembleReport r = run_ensemble(c);
  o.require(r.failures() == 0, std::to_string(r.failures()) + " realizations failed");
  std::vector<double> s;
  for (const auto& g : r.per_gamma) s.push_back(g.strata.at(0).score.value().mean);
  o.require(s[0] >= s[1] && s[1] >= s[2], "not monotone");
  o.require(s[0] >= 0.95, "score(1e-3) below 0.95");
  o.detail << (o.pass ? "" : " | ") << "score " << fmt(s[0]) << " >= " << fmt(s[1]) << " >= " << fmt(s[2]);
  return o;
}

// 5. Slope of log median max_alpha |<Sz_i;Sz_j>| over distances 2..6.
Outcome correlation_decay() {
  Outcome o;
  RunConfig c;
  c.n = 10;
  c.gammas = {0.05, 0.02};
  c.realizations = 200;
  c.master_seed = 505;
  c.source = EigenSource::kOracle;
  c.connectivity = false;
  const EnsembleReport r = run_ensemble(c);
  o.require(r.failures() == 0, std::to_string(r.failures()) + " realizations failed");
  std::vector<double> slope;
  for (const auto& g : r.per_gamma) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < g.profile->distance.size(); ++i) {
      const int dist = g.profile->distance[i];
      if (dist < 2 || dist > 6) continue;
      x.push_back(dist);
      y.push_back(std::log(g.profile->median_max[i]));
    }
    const bool finite = std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
    o.require(finite && x.size() == 5, "profile not resolved at gamma " + fmt(g.gamma));
    slope.push_back(finite ? stats::least_squares(x, y).slope : NAN);
  }
  o.require(slope[0] < 0.0, "slope at 0.05 not negative");
  o.require(slope[1] < slope[0], "slope at 0.02 not steeper");
  o.detail << (o.pass ? "" : " | ") << "slope(0.05) " << fmt(slope[0]) << ", slope(0.02) " << fmt(slope[1]);
  return o;
}

// 6. Single-site resonance frequency against eps.
Outcome resonance_scaling() {
  Outcome o;
  const std::vector<double> eps{0.05, 0.1, 0.2};
  std::vector<double> freq;
  constexpr int kSites = 10;
  constexpr std::size_t kDraws = 10000;  // 1e5 site samples per eps
  for (double e : eps) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < kDraws; ++i) hits += detect_resonant_sites(draw(606, i, kSites, 0.01), e).size();
    const std::size_t trials = kDraws * kSites;
    const double f = static_cast<double>(hits) / static_cast<double>(trials);
    const double bound = 2.0 * e * (1.0 + 3.0 * stats::wilson(hits, trials).width());
    o.require(f <= bound, "eps " + fmt(e) + ": " + fmt(f) + " > " + fmt(bound));
    freq.push_back(f);
  }
  const double r2 = stats::least_squares_origin(eps, freq).r2;
  o.require(r2 >= 0.99, "R^2 " + fmt(r2));
  o.detail << (o.pass ? "" : " | ") << "freq " << fmt(freq[0]) << ", " << fmt(freq[1]) << ", " << fmt(freq[2])
           << " (bound 2 eps), R^2 " << fmt(r2);
  return o;
}

// 7. Step-1 same-block probability against |x - y|.
Outcome connectivity_decay() {
  Outcome o;
  constexpr int n = 12;
  constexpr double eps = 0.2;
  std::vector<BlockSet> ens;
  for (std::size_t i = 0; i < 20000; ++i) {
    const Disorder d = draw(707, i, n, 0.01);
    ens.push_back(build_blocks_step1(detect_resonant_sites(d, eps), n));
  }
  const auto P = estimate_connectivity(ens, ConnectivityKind::kP, 1);
  constexpr int x0 = 4;
  double prev = INFINITY;
  std::ostringstream pts;
  for (int dist = 0; dist <= 3; ++dist) {
    const auto& e = P.at(x0, x0 + dist);
    const double bound = std::pow(2.0 * eps, dist + 1) + 3.0 * (e.ci_hi - e.ci_lo);
    o.require(e.prob < prev, "not decreasing at distance " + std::to_string(dist));
    o.require(e.prob <= bound, "distance " + std::to_string(dist) + ": " + fmt(e.prob) + " > " + fmt(bound));
    pts << (dist ? ", " : "") << fmt(e.prob);
    prev = e.prob;
  }
  o.detail << (o.pass ? "" : " | ") << "P(d=0..3) " << pts.str() << " over " << ens.size() << " realizations";
  return o;
}

// 8. Minimum-gap statistics at two chain lengths.
Outcome level_statistics() {
  Outcome o;
  std::vector<LevelStatsReport> rep;
  for (int n : {6, 8}) {
    RunConfig c;
    c.n = n;
    c.gammas = {0.05};
    c.realizations = 2000;
    c.master_seed = 808;
    c.source = EigenSource::kOracle;
    c.correlations = false;
    c.connectivity = false;
    for (int i = 0; i <= 8; ++i) c.delta_grid.push_back(std::pow(10.0, -6.0 + 0.25 * i));
    const EnsembleReport r = run_ensemble(c);
    o.require(r.failures() == 0, std::to_string(r.failures()) + " realizations failed");
    const LevelStatsReport& L = r.per_gamma.at(0).levels.value();
    o.require(std::is_sorted(L.empirical_prob.begin(), L.empirical_prob.end()), "P not monotone at n " + std::to_string(n));
    o.require(L.fit_ok, "no fit at n " + std::to_string(n));
    o.require(L.fitted_nu > 0.0 && L.nu_ci_lo > 0.0, "nu CI reaches 0 at n " + std::to_string(n));
    rep.push_back(L);
  }
  const auto& a = rep[0];
  const auto& b = rep[1];
  o.require(a.fitted_nu >= b.nu_ci_lo && a.fitted_nu <= b.nu_ci_hi, "nu(6) outside CI(8)");
  o.require(b.fitted_nu >= a.nu_ci_lo && b.fitted_nu <= a.nu_ci_hi, "nu(8) outside CI(6)");
  o.detail << (o.pass ? "" : " | ") << "nu(6) " << fmt(a.fitted_nu) << " [" << fmt(a.nu_ci_lo) << ", "
           << fmt(a.nu_ci_hi) << "], nu(8) " << fmt(b.fitted_nu) << " [" << fmt(b.nu_ci_lo) << ", " << fmt(b.nu_ci_hi)
           << "]";
  return o;
}

// 9. Aggregates independent of worker count and repetition.
Outcome determinism() {
  Outcome o;
  RunConfig c;
  c.n = 6;
  c.gammas = {0.02, 0.05};
  c.realizations = 120;
  c.master_seed = 909;
  c.delta_grid = {1e-4, 1e-3, 1e-2, 1e-1};
  auto snapshot = [&](int workers) {
    c.workers = workers;
    const EnsembleReport r = run_ensemble(c);
    std::string s = aggregates_json(r).dump();
    for (const auto& g : r.per_gamma) s += realizations_csv(g);
    return s;
  };
  const std::string one = snapshot(1);
  const std::string eight = snapshot(8);
  const std::string again = snapshot(1);
  o.require(one == eight, "workers 1 and 8 differ");
  o.require(one == again, "repeated run differs");
  o.detail << (o.pass ? "" : " | ") << "workers {1, 8} and a repeat agree byte for byte (" << one.size() << " bytes)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"spectrum invariance", spectrum_invariance}, {"oracle equivalence", oracle_equivalence},
      {"exact identities", exact_identities},       {"localization trend", localization_trend},
      {"correlation decay", correlation_decay},     {"resonance scaling", resonance_scaling},
      {"connectivity decay", connectivity_decay},   {"level statistics", level_statistics},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += out.pass ? 0 : 1;
    std::printf("%s [%d] %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first, out.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
