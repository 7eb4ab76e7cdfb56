#include "mblflow/model.hpp"

#include <cmath>
#include <random>

#include "mblflow/errors.hpp"

namespace mblflow {

double density_bound(CouplingLaw law) {
  switch (law) {
    case CouplingLaw::kUniform:
      return 0.5;
    case CouplingLaw::kTriangular:
      return 1.0;
  }
  return 0.5;
}

std::string to_string(CouplingLaw law) {
  return law == CouplingLaw::kUniform ? "uniform" : "triangular";
}

CouplingLaw coupling_law_from_string(const std::string& name) {
  if (name == "uniform") return CouplingLaw::kUniform;
  if (name == "triangular") return CouplingLaw::kTriangular;
  throw ConfigError("unknown coupling law '" + name + "'");
}

void Disorder::validate_shape() const {
  const auto un = static_cast<std::size_t>(n);
  if (n < 1) throw DimensionError("Disorder: n must be >= 1");
  if (h.size() != un || Gamma.size() != un || J.size() != un + 1) {
    throw DimensionError("Disorder: expected |h| = |Gamma| = n and |J| = n + 1");
  }
}

void Disorder::validate_bounds() const {
  validate_shape();
  auto check = [](const std::vector<double>& v, const char* name) {
    for (double x : v) {
      if (!(std::abs(x) <= 1.0)) throw ConfigError(std::string("Disorder: ") + name + " entry outside [-1, 1]");
    }
  };
  check(h, "h");
  check(Gamma, "Gamma");
  check(J, "J");
  if (!(gamma >= 0.0)) throw ConfigError("Disorder: gamma must be >= 0");
}

Disorder Disorder::scaled(double lambda) const {
  Disorder out = *this;
  for (double& x : out.h) x *= lambda;
  for (double& x : out.J) x *= lambda;
  out.gamma *= lambda;
  return out;
}

double Disorder::coupling_radius() const {
  double s = 0.0;
  for (double x : h) s += x * x;
  for (double x : J) s += x * x;
  for (double g : Gamma) s += (gamma * g) * (gamma * g);
  return std::sqrt(s);
}

double default_epsilon(double gamma) { return std::pow(gamma, 1.0 / 20.0); }

double ModelParams::resolved_epsilon() const { return epsilon ? *epsilon : default_epsilon(gamma); }

void ModelParams::validate() const {
  if (n < 1) throw ConfigError("n must be >= 1");
  if (n > max_sites) throw ConfigError("n exceeds the configured cap of " + std::to_string(max_sites));
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  const double eps = resolved_epsilon();
  if (!(eps >= 0.0 && eps < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (gamma > 0.0 && eps == 0.0) throw ConfigError("epsilon must be positive");
}

double diagonal_energy(BasisIndex bits, const Disorder& d) {
  double e = 0.0;
  for (int i = 0; i < d.n; ++i) e += d.h[static_cast<std::size_t>(i)] * spin_of(bits, i);
  // Bonds -1 and n-1 couple to the frozen +1 boundary spins.
  e += d.bond(-1) * spin_of(bits, 0);
  for (int b = 0; b + 1 < d.n; ++b) e += d.bond(b) * spin_of(bits, b) * spin_of(bits, b + 1);
  e += d.bond(d.n - 1) * spin_of(bits, d.n - 1);
  return e;
}

double diagonal_energy(const SpinConfig& sigma, const Disorder& d) {
  if (sigma.n() != d.n) throw DimensionError("diagonal_energy: configuration and disorder sizes differ");
  return diagonal_energy(sigma.bits(), d);
}

double flip_energy_diff(const SpinConfig& sigma, int i, const Disorder& d) {
  if (i < 0 || i >= d.n) throw DimensionError("flip_energy_diff: site out of range");
  if (sigma.n() != d.n) throw DimensionError("flip_energy_diff: configuration and disorder sizes differ");
  const double local = d.h[static_cast<std::size_t>(i)] + d.bond(i) * sigma.spin(i + 1) +
                       d.bond(i - 1) * sigma.spin(i - 1);
  return 2.0 * sigma.spin(i) * local;
}

OperatorMatrix build_hamiltonian(const Disorder& d, int max_sites) {
  d.validate_shape();
  if (d.n > max_sites) {
    throw CapacityError("build_hamiltonian: n = " + std::to_string(d.n) + " exceeds cap " +
                        std::to_string(max_sites));
  }
  const Eigen::Index dim = Eigen::Index{1} << d.n;
  OperatorMatrix H = OperatorMatrix::Zero(dim, dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    const auto bits = static_cast<BasisIndex>(s);
    H(s, s) = diagonal_energy(bits, d);
    for (int i = 0; i < d.n; ++i) {
      H(static_cast<Eigen::Index>(bits ^ (BasisIndex{1} << i)), s) = d.transverse(i);
    }
  }
  return H;
}

namespace {

// 53-bit mantissa mapping; independent of the standard library's distribution algorithms.
double unit_interval(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double draw(std::mt19937_64& rng, CouplingLaw law) {
  switch (law) {
    case CouplingLaw::kUniform:
      return 2.0 * unit_interval(rng) - 1.0;
    case CouplingLaw::kTriangular:
      return unit_interval(rng) + unit_interval(rng) - 1.0;
  }
  return 0.0;
}

}  // namespace

Disorder sample_disorder(std::uint64_t seed, const ModelParams& p) {
  p.validate();
  std::mt19937_64 rng(seed);
  Disorder d;
  d.n = p.n;
  d.gamma = p.gamma;
  const auto un = static_cast<std::size_t>(p.n);
  d.h.resize(un);
  d.Gamma.resize(un);
  d.J.resize(un + 1);
  for (double& x : d.h) x = draw(rng, p.law);
  for (double& x : d.Gamma) x = draw(rng, p.law);
  for (double& x : d.J) x = draw(rng, p.law);
  return d;
}

nlohmann::json to_json(const Disorder& d) {
  return nlohmann::json{{"n", d.n}, {"gamma", d.gamma}, {"h", d.h}, {"Gamma", d.Gamma}, {"J", d.J}};
}

Disorder disorder_from_json(const nlohmann::json& j) {
  Disorder d;
  try {
    d.n = j.at("n").get<int>();
    d.gamma = j.at("gamma").get<double>();
    d.h = j.at("h").get<std::vector<double>>();
    d.Gamma = j.at("Gamma").get<std::vector<double>>();
    d.J = j.at("J").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("disorder JSON: ") + e.what());
  }
  d.validate_bounds();
  return d;
}

}  // namespace mblflow
