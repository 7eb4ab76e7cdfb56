#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mblflow/geometry.hpp"
#include "mblflow/model.hpp"
#include "mblflow/schedule.hpp"
#include "mblflow/types.hpp"

namespace mblflow {

/// One row of the flow trace.
struct StepRecord {
  int k = 0;
  double L_k = 1.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  std::size_t n_perturbative = 0;
  std::size_t n_resonant = 0;
  double offdiag_norm = 0.0;   // Frobenius norm of the off-diagonal part of H_eff
  double spectrum_drift = 0.0; // max sorted-eigenvalue deviation / ||H||_2
  std::size_t n_small_blocks = 0;
  std::size_t n_large_sites = 0;
  double orthogonality = 0.0;  // max |R^T R - I| entry (not part of the CSV)
};

struct FlowState {
  int step = 0;
  OperatorMatrix H_eff;
  OperatorMatrix R_cum;  // H_eff = R_cum^T H R_cum; columns approximate eigenvectors
  BlockSet blocks;
  std::vector<int> resonant_sites;  // step-1 resonant sites
  std::vector<StepRecord> trace;
  bool converged = false;
  double h_norm = 0.0;       // ||H||_F of the original Hamiltonian
  double h_spectral = 0.0;   // ||H||_2
  double gamma = 0.0;
  double epsilon = 0.0;
};

/// Off-diagonal entry (from, to) selected at some step; denominator = E_from - E_to.
struct Transition {
  BasisIndex from = 0;
  BasisIndex to = 0;
  double amplitude = 0.0;
  double denominator = 0.0;
  double band = 0.0;
};

struct TransitionSet {
  std::vector<Transition> perturbative;
  std::vector<Transition> resonant;
};

/// Sites where |2(h_i + J_i s_+ + J_{i-1} s_-)| < eps for some admissible neighbour signs;
/// neighbours outside the chain are frozen at +1.
std::vector<int> detect_resonant_sites(const Disorder& d, double eps);

/// A_{sigma, sigma^(i)} = gamma_i / (E(sigma) - E(sigma^(i))) for nonresonant i.
OperatorMatrix first_step_generator(const OperatorMatrix& H, std::span<const int> resonant_sites,
                                    const Disorder& d, double eps);

/// Omega = exp(-A) for antisymmetric A; throws FlowError when Omega^T Omega - I exceeds tol.
OperatorMatrix exp_rotation(const OperatorMatrix& A, double orthogonality_tol = 1e-8);

/// Omega^T H Omega with Omega = exp(-A), symmetrized.
OperatorMatrix conjugate(const OperatorMatrix& H, const OperatorMatrix& A, double orthogonality_tol = 1e-8);

/// log|amplitude| / log gamma; +inf for zero amplitude.
double band_of(double amplitude, double gamma);

/// Step-k candidates (k >= 2): off-diagonal entries of H_eff with band below L_k (band
/// [L_{k-1}, L_k) plus lower-order leftovers) whose flips avoid the large region. An entry is
/// resonant when |dE| < denom_floor, |dE| < eps^m, or |amp/dE| > (gamma/eps)^m.
TransitionSet select_step_transitions(const FlowState& state, int k, const FlowParams& p);

OperatorMatrix step_generator(const FlowState& state, const TransitionSet& ts);

struct BlockRotation {
  OperatorMatrix O;
  OperatorMatrix H;
};

/// Diagonalizes, region by region, the part of H_eff whose configuration changes stay inside
/// the region. Within each sector of fixed outside configuration the k-th lowest eigenvector is
/// assigned to the local configuration with the k-th lowest diagonal energy.
BlockRotation small_block_rotation(const OperatorMatrix& H, std::span<const std::vector<int>> regions);
BlockRotation small_block_rotation(const FlowState& state, std::span<const std::vector<int>> regions);

FlowState run_flow(const Disorder& d, const FlowParams& p = {});

/// Frobenius norm of the off-diagonal part.
double offdiag_norm(const OperatorMatrix& H);

/// Rows k,L_k,band_lo,band_hi,n_perturbative,n_resonant,offdiag_norm,spectrum_drift,n_small_blocks,n_large_sites.
std::string flow_trace_csv(const FlowState& state);

}  // namespace mblflow
