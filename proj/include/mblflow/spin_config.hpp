#pragma once

#include <cstdint>

#include "mblflow/errors.hpp"

namespace mblflow {

/// Basis index of a 2^n dimensional state space. Bit i holds b_i with sigma_i = 1 - 2 b_i,
/// so index 0 is the all-up configuration.
using BasisIndex = std::uint32_t;

/// Classical Ising configuration on n sites, doubling as a basis index.
class SpinConfig {
 public:
  SpinConfig(BasisIndex bits, int n) : bits_(bits), n_(n) {
    if (n < 1 || n > 31) throw DimensionError("SpinConfig: site count must be in [1, 31]");
    if (n < 31 && (bits >> n) != 0) throw DimensionError("SpinConfig: bits beyond site count");
  }

  static SpinConfig all_up(int n) { return SpinConfig(0, n); }

  [[nodiscard]] BasisIndex bits() const { return bits_; }
  [[nodiscard]] int n() const { return n_; }

  /// sigma_i in {-1, +1}; sites outside [0, n) are frozen at +1.
  [[nodiscard]] int spin(int i) const {
    if (i < 0 || i >= n_) return 1;
    return ((bits_ >> i) & 1U) ? -1 : 1;
  }

  [[nodiscard]] SpinConfig flipped(int i) const {
    if (i < 0 || i >= n_) throw DimensionError("SpinConfig::flipped: site out of range");
    return SpinConfig(bits_ ^ (BasisIndex{1} << i), n_);
  }

  friend bool operator==(const SpinConfig&, const SpinConfig&) = default;

 private:
  BasisIndex bits_;
  int n_;
};

/// sigma_i of a raw basis index (no range check; out-of-chain sites read as +1 only
/// through SpinConfig::spin).
inline int spin_of(BasisIndex bits, int i) { return ((bits >> i) & 1U) ? -1 : 1; }

}  // namespace mblflow
