#include "mblflow/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "mblflow/errors.hpp"
#include "mblflow/oracle.hpp"

namespace mblflow {

namespace {

constexpr BasisIndex bit(int i) { return BasisIndex{1} << i; }

OperatorMatrix symmetrized(const OperatorMatrix& M) { return 0.5 * (M + M.transpose()); }

double orthogonality_error(const OperatorMatrix& R) {
  return (R.transpose() * R - OperatorMatrix::Identity(R.rows(), R.cols())).cwiseAbs().maxCoeff();
}

// Scatters the low bits of `pattern` into the set bits of `mask`.
BasisIndex deposit(BasisIndex pattern, BasisIndex mask) {
  BasisIndex out = 0;
  for (BasisIndex m = mask; m != 0; m &= m - 1) {
    if (pattern & 1U) out |= m & (~m + 1);
    pattern >>= 1;
  }
  return out;
}

SiteInterval flip_hull(BasisIndex flips) {
  return {std::countr_zero(flips), 31 - std::countl_zero(flips)};
}

}  // namespace

std::vector<int> detect_resonant_sites(const Disorder& d, double eps) {
  d.validate_shape();
  std::vector<int> out;
  for (int i = 0; i < d.n; ++i) {
    const std::vector<int> left = i == 0 ? std::vector<int>{1} : std::vector<int>{1, -1};
    const std::vector<int> right = i == d.n - 1 ? std::vector<int>{1} : std::vector<int>{1, -1};
    bool resonant = false;
    for (int sm : left) {
      for (int sp : right) {
        const double diff = 2.0 * (d.h[static_cast<std::size_t>(i)] + d.bond(i) * sp + d.bond(i - 1) * sm);
        if (std::abs(diff) < eps) resonant = true;
      }
    }
    if (resonant) out.push_back(i);
  }
  return out;
}

OperatorMatrix first_step_generator(const OperatorMatrix& H, std::span<const int> resonant_sites,
                                    const Disorder& d, double eps) {
  const Eigen::Index dim = Eigen::Index{1} << d.n;
  if (H.rows() != dim || H.cols() != dim) throw DimensionError("first_step_generator: H does not match disorder");
  std::vector<bool> resonant(static_cast<std::size_t>(d.n), false);
  for (int s : resonant_sites) resonant.at(static_cast<std::size_t>(s)) = true;
  OperatorMatrix A = OperatorMatrix::Zero(dim, dim);
  for (int i = 0; i < d.n; ++i) {
    if (resonant[static_cast<std::size_t>(i)] || d.transverse(i) == 0.0) continue;
    for (Eigen::Index s = 0; s < dim; ++s) {
      const auto t = static_cast<Eigen::Index>(static_cast<BasisIndex>(s) ^ bit(i));
      const double denom = H(s, s) - H(t, t);
      if (denom == 0.0 || std::abs(denom) < eps * (1.0 - 1e-12)) {
        throw FlowError("first_step_generator: small denominator at a nonresonant site");
      }
      A(s, t) = H(s, t) / denom;
    }
  }
  return A;
}

OperatorMatrix exp_rotation(const OperatorMatrix& A, double orthogonality_tol) {
  if (A.rows() != A.cols()) throw DimensionError("exp_rotation: A must be square");
  const double asym = (A + A.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12) throw FlowError("exp_rotation: generator is not antisymmetric");
  if (A.isZero(0.0)) return OperatorMatrix::Identity(A.rows(), A.cols());
  OperatorMatrix omega = (-A).exp();
  const double err = orthogonality_error(omega);
  if (!(err <= orthogonality_tol)) {
    throw FlowError("exp_rotation: loss of orthogonality " + std::to_string(err));
  }
  return omega;
}

OperatorMatrix conjugate(const OperatorMatrix& H, const OperatorMatrix& A, double orthogonality_tol) {
  if (H.rows() != A.rows() || H.cols() != A.cols()) throw DimensionError("conjugate: shape mismatch");
  const OperatorMatrix omega = exp_rotation(A, orthogonality_tol);
  return symmetrized(omega.transpose() * H * omega);
}

double band_of(double amplitude, double gamma) {
  if (amplitude == 0.0) return std::numeric_limits<double>::infinity();
  return std::log(std::abs(amplitude)) / std::log(gamma);
}

double offdiag_norm(const OperatorMatrix& H) {
  // Summed directly: total minus diagonal cancels catastrophically once H is nearly diagonal.
  double s = 0.0;
  for (Eigen::Index c = 0; c < H.cols(); ++c)
    for (Eigen::Index r = 0; r < H.rows(); ++r)
      if (r != c) s += H(r, c) * H(r, c);
  return std::sqrt(s);
}

TransitionSet select_step_transitions(const FlowState& state, int k, const FlowParams& p) {
  if (k < 2) throw ConfigError("select_step_transitions: step 1 uses the single-flip generator");
  const OperatorMatrix& H = state.H_eff;
  const Eigen::Index dim = H.rows();
  const double gamma = state.gamma;
  const double eps = state.epsilon;
  const double band_hi = length_scale(k);
  const double entry_floor = 0.5 * p.offdiag_tol * state.h_norm / static_cast<double>(dim);
  BasisIndex large_mask = 0;
  for (int s : state.blocks.large) large_mask |= bit(s);

  TransitionSet ts;
  for (Eigen::Index c = 1; c < dim; ++c) {
    for (Eigen::Index r = 0; r < c; ++r) {
      const double amp = H(r, c);
      if (std::abs(amp) <= entry_floor) continue;
      const auto from = static_cast<BasisIndex>(r);
      const auto to = static_cast<BasisIndex>(c);
      if (((from ^ to) & large_mask) != 0) continue;
      const double m = band_of(amp, gamma);
      if (!(m < band_hi)) continue;
      const double denom = H(r, r) - H(c, c);
      Transition t{from, to, amp, denom, m};
      const bool cond_floor = std::abs(denom) < p.denom_floor;
      const bool cond_one = std::abs(denom) < std::pow(eps, m);
      const bool cond_two = !cond_floor && std::abs(amp / denom) > std::pow(gamma / eps, m);
      if (cond_floor || cond_one || cond_two) {
        ts.resonant.push_back(t);
      } else {
        ts.perturbative.push_back(t);
      }
    }
  }
  return ts;
}

OperatorMatrix step_generator(const FlowState& state, const TransitionSet& ts) {
  const Eigen::Index dim = state.H_eff.rows();
  OperatorMatrix A = OperatorMatrix::Zero(dim, dim);
  for (const auto& t : ts.perturbative) {
    if (t.denominator == 0.0) throw FlowError("step_generator: zero denominator on a perturbative transition");
    const double a = t.amplitude / t.denominator;
    A(t.from, t.to) = a;
    A(t.to, t.from) = -a;
  }
  return A;
}

BlockRotation small_block_rotation(const OperatorMatrix& H, std::span<const std::vector<int>> regions) {
  const Eigen::Index dim = H.rows();
  const int n = std::countr_zero(static_cast<std::uint64_t>(dim));
  BasisIndex used = 0;
  for (const auto& region : regions) {
    for (int s : region) {
      if (s < 0 || s >= n) throw DimensionError("small_block_rotation: site out of range");
      if (used & bit(s)) throw DimensionError("small_block_rotation: overlapping blocks");
      used |= bit(s);
    }
  }

  BlockRotation out{OperatorMatrix::Identity(dim, dim), H};
  for (const auto& region : regions) {
    if (region.empty()) continue;
    BasisIndex mask = 0;
    for (int s : region) mask |= bit(s);
    const Eigen::Index local_dim = Eigen::Index{1} << std::popcount(mask);
    std::vector<BasisIndex> patterns(static_cast<std::size_t>(local_dim));
    for (Eigen::Index j = 0; j < local_dim; ++j) patterns[static_cast<std::size_t>(j)] = deposit(static_cast<BasisIndex>(j), mask);

    OperatorMatrix O = OperatorMatrix::Zero(dim, dim);
    OperatorMatrix sector(local_dim, local_dim);
    std::vector<Eigen::Index> states(static_cast<std::size_t>(local_dim));
    std::vector<Eigen::Index> by_diag(static_cast<std::size_t>(local_dim));
    for (Eigen::Index outside = 0; outside < dim; ++outside) {
      if (static_cast<BasisIndex>(outside) & mask) continue;
      for (Eigen::Index j = 0; j < local_dim; ++j) {
        states[static_cast<std::size_t>(j)] = outside | static_cast<Eigen::Index>(patterns[static_cast<std::size_t>(j)]);
      }
      for (Eigen::Index a = 0; a < local_dim; ++a)
        for (Eigen::Index b = 0; b < local_dim; ++b)
          sector(a, b) = out.H(states[static_cast<std::size_t>(a)], states[static_cast<std::size_t>(b)]);
      const Spectrum sp = diagonalize(sector);
      for (Eigen::Index j = 0; j < local_dim; ++j) by_diag[static_cast<std::size_t>(j)] = j;
      std::stable_sort(by_diag.begin(), by_diag.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return sector(a, a) < sector(b, b); });
      for (Eigen::Index rank = 0; rank < local_dim; ++rank) {
        const Eigen::Index label = states[static_cast<std::size_t>(by_diag[static_cast<std::size_t>(rank)])];
        for (Eigen::Index a = 0; a < local_dim; ++a) {
          O(states[static_cast<std::size_t>(a)], label) = sp.vectors(a, rank);
        }
      }
    }
    out.H = symmetrized(O.transpose() * out.H * O);
    out.O = out.O * O;
  }
  return out;
}

BlockRotation small_block_rotation(const FlowState& state, std::span<const std::vector<int>> regions) {
  return small_block_rotation(state.H_eff, regions);
}

namespace {

// Collared extents of blocks formed at the current step; overlapping extents are rotated jointly.
std::vector<std::vector<int>> rotation_regions(const std::vector<Block>& formed) {
  std::vector<SiteInterval> iv;
  for (const auto& b : formed) iv.push_back(b.collar);
  std::sort(iv.begin(), iv.end(), [](const SiteInterval& a, const SiteInterval& b) { return a.lo < b.lo; });
  std::vector<SiteInterval> merged;
  for (const auto& s : iv) {
    if (!merged.empty() && s.lo <= merged.back().hi) {
      merged.back().hi = std::max(merged.back().hi, s.hi);
    } else {
      merged.push_back(s);
    }
  }
  std::vector<std::vector<int>> regions;
  for (const auto& m : merged) {
    std::vector<int> sites;
    for (int s = m.lo; s <= m.hi; ++s) sites.push_back(s);
    regions.push_back(std::move(sites));
  }
  return regions;
}

class FlowRunner {
 public:
  FlowRunner(const Disorder& d, const FlowParams& p) : d_(d), p_(p) {}

  FlowState run() {
    const OperatorMatrix H = build_hamiltonian(d_, p_.max_sites);
    const Eigen::Index dim = H.rows();
    state_.gamma = p_.gamma.value_or(d_.gamma);
    state_.epsilon = p_.epsilon.value_or(default_epsilon(state_.gamma));
    state_.H_eff = H;
    state_.R_cum = OperatorMatrix::Identity(dim, dim);
    state_.h_norm = H.norm();
    reference_ = eigenvalues(H);
    state_.h_spectral = spectral_radius(reference_);
    state_.blocks.n = d_.n;
    tol_ = p_.offdiag_tol * state_.h_norm;

    StepRecord initial;
    initial.k = 0;
    initial.L_k = length_scale(0);
    initial.offdiag_norm = offdiag_norm(H);
    state_.trace.push_back(initial);
    if (initial.offdiag_norm <= tol_) {
      state_.converged = true;
      return std::move(state_);
    }
    if (!(state_.gamma > 0.0 && state_.gamma < state_.epsilon && state_.epsilon < 1.0)) {
      throw ConfigError("run_flow: need 0 < gamma < epsilon < 1");
    }

    first_step(H);
    for (int k = 2; k <= p_.max_steps && !state_.converged; ++k) later_step(k);
    return std::move(state_);
  }

 private:
  void first_step(const OperatorMatrix& H) {
    state_.resonant_sites = detect_resonant_sites(d_, state_.epsilon);
    const OperatorMatrix A = first_step_generator(H, state_.resonant_sites, d_, state_.epsilon);
    StepRecord rec;
    rec.k = 1;
    rec.L_k = length_scale(1);
    rec.band_lo = length_scale(0);
    rec.band_hi = length_scale(1);
    for (Eigen::Index c = 0; c < A.cols(); ++c)
      for (Eigen::Index r = 0; r < c; ++r)
        if (A(r, c) != 0.0) ++rec.n_perturbative;
    for (int s : state_.resonant_sites) {
      if (d_.transverse(s) != 0.0) rec.n_resonant += std::size_t{1} << (d_.n - 1);
    }
    rotate(A);
    state_.blocks = build_blocks_step1(state_.resonant_sites, d_.n, p_.m0);
    rotate_blocks(state_.blocks.formed.back());
    finish_step(1, rec);
  }

  void later_step(int k) {
    const TransitionSet ts = select_step_transitions(state_, k, p_);
    StepRecord rec;
    rec.k = k;
    rec.L_k = length_scale(k);
    rec.band_lo = length_scale(k - 1);
    rec.band_hi = length_scale(k);
    rec.n_perturbative = ts.perturbative.size();
    rec.n_resonant = ts.resonant.size();
    if (!ts.perturbative.empty()) rotate(step_generator(state_, ts));
    std::vector<SiteInterval> supports;
    supports.reserve(ts.resonant.size());
    for (const auto& t : ts.resonant) supports.push_back(flip_hull(t.from ^ t.to));
    state_.blocks = update_blocks(state_.blocks, supports, k, p_);
    rotate_blocks(state_.blocks.formed.back());
    finish_step(k, rec);
  }

  void rotate(const OperatorMatrix& A) {
    const OperatorMatrix omega = exp_rotation(A, p_.orthogonality_tol);
    state_.H_eff = symmetrized(omega.transpose() * state_.H_eff * omega);
    state_.R_cum = state_.R_cum * omega;
  }

  void rotate_blocks(const std::vector<Block>& formed) {
    if (formed.empty()) return;
    const auto regions = rotation_regions(formed);
    BlockRotation rot = small_block_rotation(state_.H_eff, regions);
    state_.H_eff = std::move(rot.H);
    state_.R_cum = state_.R_cum * rot.O;
  }

  void finish_step(int k, StepRecord& rec) {
    state_.step = k;
    rec.offdiag_norm = offdiag_norm(state_.H_eff);
    rec.n_small_blocks = state_.blocks.small.size();
    rec.n_large_sites = state_.blocks.large.size();
    rec.orthogonality = orthogonality_error(state_.R_cum);
    if (p_.check_spectrum) {
      const Vector now = eigenvalues(state_.H_eff);
      rec.spectrum_drift = (now - reference_).cwiseAbs().maxCoeff() / std::max(state_.h_spectral, 1e-300);
      if (rec.spectrum_drift > p_.drift_tol) {
        state_.trace.push_back(rec);
        throw FlowError("run_flow: spectrum drift " + std::to_string(rec.spectrum_drift) + " at step " +
                        std::to_string(k));
      }
    }
    state_.trace.push_back(rec);
    state_.converged = rec.offdiag_norm <= tol_;
  }

  const Disorder& d_;
  const FlowParams& p_;
  FlowState state_;
  Vector reference_;
  double tol_ = 0.0;
};

}  // namespace

FlowState run_flow(const Disorder& d, const FlowParams& p) { return FlowRunner(d, p).run(); }

std::string flow_trace_csv(const FlowState& state) {
  std::ostringstream os;
  os.precision(17);
  os << "k,L_k,band_lo,band_hi,n_perturbative,n_resonant,offdiag_norm,spectrum_drift,n_small_blocks,n_large_sites\n";
  for (const auto& r : state.trace) {
    os << r.k << ',' << r.L_k << ',' << r.band_lo << ',' << r.band_hi << ',' << r.n_perturbative << ','
       << r.n_resonant << ',' << r.offdiag_norm << ',' << r.spectrum_drift << ',' << r.n_small_blocks << ','
       << r.n_large_sites << '\n';
  }
  return os.str();
}

}  // namespace mblflow
