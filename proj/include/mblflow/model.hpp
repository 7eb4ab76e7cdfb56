#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mblflow/spin_config.hpp"
#include "mblflow/types.hpp"

namespace mblflow {

/// Default cap on chain length for dense 2^n x 2^n storage.
inline constexpr int kDefaultMaxSites = 14;

enum class CouplingLaw {
  kUniform,     // uniform on [-1, 1], density 1/2
  kTriangular,  // sum of two uniforms on [-1/2, 1/2], density bounded by 1
};

double density_bound(CouplingLaw law);
std::string to_string(CouplingLaw law);
CouplingLaw coupling_law_from_string(const std::string& name);

/// One realization of the random couplings of
///   H = sum_i h_i S^z_i + sum_i gamma Gamma_i S^x_i + sum_{i=-1}^{n-1} J_i S^z_i S^z_{i+1}
/// with plus boundary conditions (spins at -1 and n frozen to +1).
struct Disorder {
  int n = 0;
  double gamma = 0.0;
  std::vector<double> h;      // n on-site fields
  std::vector<double> Gamma;  // n transverse-field shapes, gamma_i = gamma * Gamma_i
  std::vector<double> J;      // n + 1 bonds; J[b + 1] is the bond between sites b and b + 1

  /// Bond J_b for b in [-1, n - 1].
  [[nodiscard]] double bond(int b) const { return J[static_cast<std::size_t>(b + 1)]; }
  [[nodiscard]] double transverse(int i) const { return gamma * Gamma[static_cast<std::size_t>(i)]; }

  /// Throws DimensionError on inconsistent vector lengths.
  void validate_shape() const;
  /// Throws ConfigError unless every h, Gamma, J entry lies in [-1, 1] and gamma >= 0.
  void validate_bounds() const;

  /// All couplings (h, J, gamma Gamma) multiplied by lambda; Gamma is left as is.
  [[nodiscard]] Disorder scaled(double lambda) const;

  /// Euclidean norm of the coupling vector (h, J, gamma Gamma).
  [[nodiscard]] double coupling_radius() const;
};

struct ModelParams {
  int n = 8;
  double gamma = 0.05;
  std::optional<double> epsilon;  // resonance cutoff; defaults to gamma^(1/20)
  CouplingLaw law = CouplingLaw::kUniform;
  int max_sites = kDefaultMaxSites;

  [[nodiscard]] double resolved_epsilon() const;
  void validate() const;
};

/// gamma^(1/20), the default resonance cutoff.
double default_epsilon(double gamma);

double diagonal_energy(BasisIndex bits, const Disorder& d);
double diagonal_energy(const SpinConfig& sigma, const Disorder& d);

/// E(sigma) - E(sigma^(i)) = 2 sigma_i (h_i + J_i sigma_{i+1} + J_{i-1} sigma_{i-1}).
double flip_energy_diff(const SpinConfig& sigma, int i, const Disorder& d);

OperatorMatrix build_hamiltonian(const Disorder& d, int max_sites = kDefaultMaxSites);

/// Deterministic in seed. Draw order: h_0..h_{n-1}, Gamma_0..Gamma_{n-1}, J_{-1}..J_{n-1},
/// each from the configured law using a 64-bit Mersenne twister.
Disorder sample_disorder(std::uint64_t seed, const ModelParams& p);

nlohmann::json to_json(const Disorder& d);
Disorder disorder_from_json(const nlohmann::json& j);

}  // namespace mblflow
