#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mblflow/schedule.hpp"

namespace mblflow {

/// Closed site interval [lo, hi].
struct SiteInterval {
  int lo = 0;
  int hi = -1;
  [[nodiscard]] bool contains(int x) const { return lo <= x && x <= hi; }
  [[nodiscard]] bool empty() const { return hi < lo; }
  friend bool operator==(const SiteInterval&, const SiteInterval&) = default;
};

struct Block {
  std::vector<int> sites;  // core sites, sorted
  int scale = 1;           // step at which the block was formed
  int volume = 1;          // contracted units (sites, or absorbed small blocks counted once)
  SiteInterval collar;     // b-bar: core hull plus collar_width(scale), clamped
  SiteInterval outer;      // b-double-bar: collar plus outer_collar_width(scale), clamped

  [[nodiscard]] int diameter() const { return sites.empty() ? 0 : sites.back() - sites.front(); }
};

/// Resonant-region taxonomy after a given step.
struct BlockSet {
  int n = 0;
  int step = 0;
  std::vector<Block> small;  // current small blocks, cores pairwise disjoint
  std::vector<int> large;    // S_k' core sites, sorted
  std::vector<std::vector<int>> large_components;  // S_k' grouped by the merges that formed it

  /// components[j-1]: resonant blocks B^(j) found at step j (site sets).
  std::vector<std::vector<std::vector<int>>> components;
  /// formed[j-1]: small blocks created at step j.
  std::vector<std::vector<Block>> formed;

  /// Throws FlowError when disjointness, diameter, coverage or separation fails.
  void check_invariants(int m0 = 0) const;
};

BlockSet build_blocks_step1(std::span<const int> resonant_sites, int n, int m0 = 0);

/// Step-k reorganization: new resonant supports (site intervals) are joined by nearest-neighbour
/// contact and absorb any previous small block whose collar they touch; proximity connections
/// then merge units closer than the clamped separation distance (closest pair first, ties to the
/// left) and merged or new units are re-classified at scale k.
BlockSet update_blocks(const BlockSet& prev, std::span<const SiteInterval> supports, int k, const FlowParams& p);

/// Distance with every outer collar of a small block of scale <= j contracted to one point.
int contracted_distance(int x, int y, const BlockSet& bs, int j);

enum class ConnectivityKind { kP, kQ, kR };
std::string to_string(ConnectivityKind kind);

struct ConnectivityEntry {
  int x = 0;
  int y = 0;
  std::size_t hits = 0;
  double prob = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct ConnectivityEstimate {
  ConnectivityKind kind = ConnectivityKind::kP;
  int k = 1;
  int n = 0;
  std::size_t n_realizations = 0;
  std::vector<ConnectivityEntry> table;  // all x <= y

  [[nodiscard]] const ConnectivityEntry& at(int x, int y) const;
};

/// P: same B^(k); Q: same collared small block formed at step k; R: same collared small block
/// formed at any step i <= k. Requires >= 100 realizations of equal chain length.
ConnectivityEstimate estimate_connectivity(std::span<const BlockSet> ensemble, ConnectivityKind kind, int k,
                                           std::size_t min_realizations = 100);

/// Rows kind,k,x,y,prob,ci_lo,ci_hi,n_realizations (header included when requested).
std::string connectivity_csv(const ConnectivityEstimate& est, bool header = true);

}  // namespace mblflow
