#include "mblflow/observables.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "mblflow/errors.hpp"

namespace mblflow {

namespace {

char axis_char(Axis a) {
  switch (a) {
    case Axis::kX: return 'x';
    case Axis::kY: return 'y';
    case Axis::kZ: return 'z';
  }
  return '?';
}

Axis axis_from_char(char c) {
  switch (c) {
    case 'x': case 'X': return Axis::kX;
    case 'y': case 'Y': return Axis::kY;
    case 'z': case 'Z': return Axis::kZ;
    default: throw ConfigError(std::string("unknown Pauli axis '") + c + "'");
  }
}

void check_state(const OperatorMatrix& R, Eigen::Index alpha) {
  if (alpha < 0 || alpha >= R.cols()) throw DimensionError("state index out of range");
}

}  // namespace

void LocalOperatorSpec::validate() const {
  if (factors.empty()) throw ConfigError("operator spec: no factors");
  if (radius < 0) throw ConfigError("operator spec: negative radius");
  int ny = 0;
  std::vector<int> offsets;
  for (const auto& f : factors) {
    if (std::abs(f.offset) > radius) throw ConfigError("operator spec: factor outside the declared radius");
    if (std::find(offsets.begin(), offsets.end(), f.offset) != offsets.end()) {
      throw ConfigError("operator spec: repeated site");
    }
    offsets.push_back(f.offset);
    if (f.axis == Axis::kY) ++ny;
  }
  if (ny % 2 != 0) throw ConfigError("operator spec: odd number of S^y factors has no real representation");
}

LocalOperatorSpec LocalOperatorSpec::parse(const std::string& text) {
  LocalOperatorSpec spec;
  spec.factors.clear();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon != 1) throw ConfigError("operator spec: expected axis:offset, got '" + item + "'");
    PauliFactor f;
    f.axis = axis_from_char(item[0]);
    try {
      f.offset = std::stoi(item.substr(2));
    } catch (const std::exception&) {
      throw ConfigError("operator spec: bad offset in '" + item + "'");
    }
    spec.radius = std::max(spec.radius, std::abs(f.offset));
    spec.factors.push_back(f);
  }
  spec.validate();
  return spec;
}

std::string LocalOperatorSpec::to_text() const {
  std::string out;
  for (const auto& f : factors) {
    if (!out.empty()) out += ',';
    out += axis_char(f.axis);
    out += ':' + std::to_string(f.offset);
  }
  return out;
}

nlohmann::json to_json(const LocalOperatorSpec& spec) {
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& f : spec.factors) factors.push_back({{"offset", f.offset}, {"axis", std::string(1, axis_char(f.axis))}});
  return {{"radius", spec.radius}, {"factors", factors}};
}

LocalOperatorSpec operator_spec_from_json(const nlohmann::json& j) {
  LocalOperatorSpec spec;
  spec.factors.clear();
  try {
    spec.radius = j.at("radius").get<int>();
    for (const auto& f : j.at("factors")) {
      const auto axis = f.at("axis").get<std::string>();
      if (axis.size() != 1) throw ConfigError("operator spec: axis must be one character");
      spec.factors.push_back({f.at("offset").get<int>(), axis_from_char(axis[0])});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("operator spec JSON: ") + e.what());
  }
  spec.validate();
  return spec;
}

Vector PauliString::apply(const Vector& v) const {
  Vector out(v.size());
  for (Eigen::Index b = 0; b < v.size(); ++b) {
    const auto bits = static_cast<BasisIndex>(b);
    out(static_cast<Eigen::Index>(bits ^ flip)) = sign(bits) * v(b);
  }
  return out;
}

OperatorMatrix PauliString::to_matrix() const {
  const Eigen::Index dim = Eigen::Index{1} << n;
  OperatorMatrix M = OperatorMatrix::Zero(dim, dim);
  for (Eigen::Index b = 0; b < dim; ++b) {
    const auto bits = static_cast<BasisIndex>(b);
    M(static_cast<Eigen::Index>(bits ^ flip), b) = sign(bits);
  }
  return M;
}

PauliString instantiate(const LocalOperatorSpec& spec, int site, int n) {
  spec.validate();
  PauliString p;
  p.n = n;
  int ny = 0;
  for (const auto& f : spec.factors) {
    const int s = site + f.offset;
    if (s < 0 || s >= n) throw DimensionError("operator factor outside the chain");
    const BasisIndex b = BasisIndex{1} << s;
    if (f.axis != Axis::kZ) p.flip |= b;
    if (f.axis != Axis::kX) p.sign_mask |= b;
    if (f.axis == Axis::kY) ++ny;
  }
  p.global_sign = (ny / 2) % 2 == 0 ? 1 : -1;
  return p;
}

PauliString sz(int site, int n) { return instantiate(LocalOperatorSpec::single_z(), site, n); }

double expectation(const OperatorMatrix& R, const OperatorMatrix& O, Eigen::Index alpha) {
  check_state(R, alpha);
  if (O.rows() != R.rows() || O.cols() != R.rows()) throw DimensionError("expectation: operator shape mismatch");
  const auto v = R.col(alpha);
  return v.dot(O * v);
}

double expectation(const OperatorMatrix& R, const PauliString& O, Eigen::Index alpha) {
  check_state(R, alpha);
  const Vector v = R.col(alpha);
  return v.dot(O.apply(v));
}

double connected_correlation(const OperatorMatrix& R, const OperatorMatrix& Oi, const OperatorMatrix& Oj,
                             Eigen::Index alpha) {
  check_state(R, alpha);
  const auto v = R.col(alpha);
  const Vector a = Oi * v;
  const Vector b = Oj * v;
  // O_i symmetric: <v, O_i O_j v> = <O_i v, O_j v>.
  return a.dot(b) - v.dot(a) * v.dot(b);
}

namespace {

// Both operators diagonal: with p_st the weight of basis states where O_i has parity s and
// O_j parity t, <O_i;O_j> = 4 g_i g_j (p00 p11 - p01 p10) / (sum p)^2. The products are as
// small as the correlation itself, so nothing cancels against O(1) terms and the result stays
// accurate far below the 1e-13 floor of a.b - (v.a)(v.b).
template <class Col>
double diagonal_connected(const Col& v, const PauliString& Oi, const PauliString& Oj) {
  double p[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  for (Eigen::Index b = 0; b < v.size(); ++b) {
    const auto bits = static_cast<BasisIndex>(b);
    p[std::popcount(bits & Oi.sign_mask) & 1][std::popcount(bits & Oj.sign_mask) & 1] += v(b) * v(b);
  }
  const double total = p[0][0] + p[0][1] + p[1][0] + p[1][1];
  return 4.0 * Oi.global_sign * Oj.global_sign * (p[0][0] * p[1][1] - p[0][1] * p[1][0]) / (total * total);
}

}  // namespace

double connected_correlation(const OperatorMatrix& R, const PauliString& Oi, const PauliString& Oj,
                             Eigen::Index alpha) {
  check_state(R, alpha);
  if (Oi.flip == 0 && Oj.flip == 0) return diagonal_connected(R.col(alpha), Oi, Oj);
  const Vector v = R.col(alpha);
  const Vector a = Oi.apply(v);
  const Vector b = Oj.apply(v);
  return a.dot(b) - v.dot(a) * v.dot(b);
}

std::vector<double> state_weights(const Weighting& w, std::span<const double> energies) {
  const std::size_t count = energies.size();
  if (count == 0) throw DimensionError("state_weights: no states");
  std::vector<double> out(count, 1.0 / static_cast<double>(count));
  if (w.kind == Weighting::Kind::kUniform || w.beta == 0.0) return out;
  // Shift by the largest exponent so every term is <= 1.
  double top = -INFINITY;
  for (double e : energies) top = std::max(top, -w.beta * e);
  double z = 0.0;
  for (std::size_t a = 0; a < count; ++a) {
    out[a] = std::exp(-w.beta * energies[a] - top);
    z += out[a];
  }
  for (double& x : out) x /= z;
  return out;
}

double state_average(std::span<const double> values, const Weighting& w, std::span<const double> energies) {
  if (values.empty()) throw DimensionError("state_average: no values");
  if (w.kind == Weighting::Kind::kGibbs && energies.size() != values.size()) {
    throw DimensionError("state_average: Gibbs weighting needs one energy per value");
  }
  std::vector<double> placeholder;
  if (energies.empty()) {
    placeholder.assign(values.size(), 0.0);
    energies = placeholder;
  }
  const auto weights = state_weights(w, energies);
  double s = 0.0;
  for (std::size_t a = 0; a < values.size(); ++a) s += weights[a] * values[a];
  return s;
}

EigenSystem eigensystem_from_flow(const FlowState& state) {
  EigenSystem sys;
  sys.n = std::countr_zero(static_cast<std::uint64_t>(state.H_eff.rows()));
  sys.energies = state.H_eff.diagonal();
  sys.vectors = state.R_cum;
  return sys;
}

EigenSystem eigensystem_from_oracle(const Spectrum& s, int n) { return {n, s.energies, s.vectors}; }

StateMatching match_states(const EigenSystem& flow, const Spectrum& oracle, double rel_tol) {
  const Eigen::Index dim = oracle.energies.size();
  if (flow.energies.size() != dim) throw DimensionError("match_states: dimension mismatch");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return flow.energies(a) < flow.energies(b); });
  const double tol = rel_tol * std::max(spectral_radius(oracle.energies), 1e-300);

  StateMatching m;
  m.oracle_of.assign(static_cast<std::size_t>(dim), 0);
  m.excluded.assign(static_cast<std::size_t>(dim), false);
  Eigen::Index start = 0;
  while (start < dim) {
    Eigen::Index end = start + 1;
    while (end < dim && oracle.energies(end) - oracle.energies(end - 1) < tol) ++end;
    if (end - start == 1) {
      m.oracle_of[static_cast<std::size_t>(order[static_cast<std::size_t>(start)])] = start;
    } else {
      std::vector<bool> taken(static_cast<std::size_t>(end - start), false);
      for (Eigen::Index r = start; r < end; ++r) {
        const Eigen::Index f = order[static_cast<std::size_t>(r)];
        Eigen::Index best = -1;
        double best_overlap = -1.0;
        for (Eigen::Index o = start; o < end; ++o) {
          if (taken[static_cast<std::size_t>(o - start)]) continue;
          const double ov = std::abs(flow.vectors.col(f).dot(oracle.vectors.col(o)));
          if (ov > best_overlap) {
            best_overlap = ov;
            best = o;
          }
        }
        taken[static_cast<std::size_t>(best - start)] = true;
        m.oracle_of[static_cast<std::size_t>(f)] = best;
        m.excluded[static_cast<std::size_t>(f)] = true;
      }
    }
    start = end;
  }
  return m;
}

double averaged_abs_sz(const EigenSystem& sys, int site, const Weighting& w) {
  const PauliString op = sz(site, sys.n);
  std::vector<double> values(static_cast<std::size_t>(sys.vectors.cols()));
  for (Eigen::Index a = 0; a < sys.vectors.cols(); ++a) {
    values[static_cast<std::size_t>(a)] = std::abs(expectation(sys.vectors, op, a));
  }
  const std::vector<double> energies(sys.energies.data(), sys.energies.data() + sys.energies.size());
  return state_average(values, w, energies);
}

ScoreEstimate score_from_values(std::span<const double> per_realization) {
  const auto est = stats::mean_with_ci(per_realization);
  return {est.mean, est.ci, per_realization.size()};
}

ScoreEstimate localization_score(std::span<const EigenSystem> ensemble, int site, const Weighting& w,
                                 std::size_t min_realizations) {
  if (ensemble.size() < min_realizations) throw ConfigError("localization_score: too few realizations");
  std::vector<double> values;
  values.reserve(ensemble.size());
  for (const auto& sys : ensemble) values.push_back(averaged_abs_sz(sys, site < 0 ? sys.n / 2 : site, w));
  return score_from_values(values);
}

std::pair<int, int> centered_pair(int n, int r) {
  if (r < 0 || r >= n) throw DimensionError("centered_pair: distance out of range");
  const int i = (n - 1 - r) / 2;
  return {i, i + r};
}

RealizationCorrelations realization_correlations(const EigenSystem& sys, const LocalOperatorSpec& spec,
                                                 const Weighting& w) {
  const int n = sys.n;
  const Eigen::Index dim = sys.vectors.cols();
  const std::vector<double> energies(sys.energies.data(), sys.energies.data() + sys.energies.size());
  const auto weights = state_weights(w, energies);

  // O_x v_alpha for every anchor that keeps the operator inside the chain; diagonal operators skip it.
  std::vector<std::optional<PauliString>> ops(static_cast<std::size_t>(n));
  std::vector<std::vector<Vector>> applied(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    try {
      ops[static_cast<std::size_t>(x)] = instantiate(spec, x, n);
    } catch (const DimensionError&) {
      continue;
    }
    if (ops[static_cast<std::size_t>(x)]->flip == 0) continue;
    auto& slot = applied[static_cast<std::size_t>(x)];
    slot.reserve(static_cast<std::size_t>(dim));
    for (Eigen::Index a = 0; a < dim; ++a) slot.push_back(ops[static_cast<std::size_t>(x)]->apply(sys.vectors.col(a)));
  }

  RealizationCorrelations out;
  for (int r = 0; r < n; ++r) {
    const auto [i, j] = centered_pair(n, r);
    double mx = 0.0, avg = 0.0;
    const auto& oi = ops[static_cast<std::size_t>(i)];
    const auto& oj = ops[static_cast<std::size_t>(j)];
    if (oi && oj) {
      const bool diagonal = oi->flip == 0;
      const auto& ai = applied[static_cast<std::size_t>(i)];
      const auto& aj = applied[static_cast<std::size_t>(j)];
      for (Eigen::Index a = 0; a < dim; ++a) {
        const auto v = sys.vectors.col(a);
        const auto k = static_cast<std::size_t>(a);
        const double c = diagonal ? std::abs(diagonal_connected(v, *oi, *oj))
                                  : std::abs(ai[k].dot(aj[k]) - v.dot(ai[k]) * v.dot(aj[k]));
        mx = std::max(mx, c);
        avg += weights[static_cast<std::size_t>(a)] * c;
      }
    } else {
      mx = avg = std::nan("");
    }
    out.max_abs.push_back(mx);
    out.avg_abs.push_back(avg);
  }
  return out;
}

CorrelationProfile profile_from_realizations(std::span<const RealizationCorrelations> per_realization) {
  CorrelationProfile p;
  p.n_realizations = per_realization.size();
  if (per_realization.empty()) return p;
  const std::size_t nd = per_realization.front().max_abs.size();
  for (std::size_t r = 0; r < nd; ++r) {
    std::vector<double> mx, av;
    for (const auto& rc : per_realization) {
      if (std::isnan(rc.max_abs[r])) continue;
      mx.push_back(rc.max_abs[r]);
      av.push_back(rc.avg_abs[r]);
    }
    if (mx.empty()) continue;
    p.distance.push_back(static_cast<int>(r));
    p.median_max.push_back(stats::median(mx));
    p.q90_max.push_back(stats::quantile(mx, 0.9));
    p.median_avg.push_back(stats::median(av));
    p.q90_avg.push_back(stats::quantile(av, 0.9));
  }
  return p;
}

CorrelationProfile correlation_profile(std::span<const EigenSystem> ensemble, const LocalOperatorSpec& spec,
                                       const Weighting& w, std::size_t min_realizations) {
  if (ensemble.size() < min_realizations) throw ConfigError("correlation_profile: too few realizations");
  std::vector<RealizationCorrelations> per;
  per.reserve(ensemble.size());
  for (const auto& sys : ensemble) per.push_back(realization_correlations(sys, spec, w));
  return profile_from_realizations(per);
}

std::string correlation_profile_csv(const CorrelationProfile& p) {
  std::ostringstream os;
  os.precision(17);
  os << "distance,median_max,q90_max,median_avg,q90_avg,n_realizations\n";
  for (std::size_t i = 0; i < p.distance.size(); ++i) {
    os << p.distance[i] << ',' << p.median_max[i] << ',' << p.q90_max[i] << ',' << p.median_avg[i] << ','
       << p.q90_avg[i] << ',' << p.n_realizations << '\n';
  }
  return os.str();
}

}  // namespace mblflow
