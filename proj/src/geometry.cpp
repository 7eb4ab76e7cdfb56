#include "mblflow/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "mblflow/errors.hpp"
#include "mblflow/stats.hpp"

namespace mblflow {

namespace {

using SiteSet = std::vector<int>;

SiteSet set_union(const SiteSet& a, const SiteSet& b) {
  SiteSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

int set_distance(const SiteSet& a, const SiteSet& b) {
  int best = std::numeric_limits<int>::max();
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    best = std::min(best, std::abs(a[i] - b[j]));
    if (a[i] < b[j]) ++i; else ++j;
  }
  return best;
}

SiteInterval clamp_hull(const SiteSet& sites, int width, int n) {
  return {std::max(0, sites.front() - width), std::min(n - 1, sites.back() + width)};
}

Block make_block(SiteSet sites, int scale, int volume, int n) {
  Block b;
  b.sites = std::move(sites);
  b.scale = scale;
  b.volume = volume;
  b.collar = clamp_hull(b.sites, collar_width(scale), n);
  const int w = outer_collar_width(scale);
  b.outer = {std::max(0, b.collar.lo - w), std::min(n - 1, b.collar.hi + w)};
  return b;
}

// A candidate region during reorganization.
struct Unit {
  SiteSet sites;
  int scale = 1;
  int volume = 1;
  bool touched = true;    // new, merged or formerly large: re-classified at the current scale
  Block original;         // valid when !touched
};

int separation_class(int scale, int volume) {
  if (scale <= 1) return 1;
  return volume_class(std::max(static_cast<double>(volume), length_scale(scale - 1)));
}

double pair_threshold(const Unit& a, const Unit& b, int m0, int n) {
  const double va = std::max(static_cast<double>(a.volume), a.scale > 1 ? length_scale(a.scale - 1) : 0.0);
  const double vb = std::max(static_cast<double>(b.volume), b.scale > 1 ? length_scale(b.scale - 1) : 0.0);
  const Unit& smaller = va <= vb ? a : b;
  return separation_distance(separation_class(smaller.scale, smaller.volume), m0, n);
}

// Closest violating pair first, ties broken by the leftmost site of the pair.
void merge_violators(std::vector<Unit>& units, int scale, int m0, int n) {
  for (;;) {
    int best_dist = std::numeric_limits<int>::max();
    int best_left = std::numeric_limits<int>::max();
    std::size_t bi = 0, bj = 0;
    bool found = false;
    for (std::size_t i = 0; i < units.size(); ++i) {
      for (std::size_t j = i + 1; j < units.size(); ++j) {
        const int dist = set_distance(units[i].sites, units[j].sites);
        if (static_cast<double>(dist) > pair_threshold(units[i], units[j], m0, n)) continue;
        const int left = std::min(units[i].sites.front(), units[j].sites.front());
        if (dist < best_dist || (dist == best_dist && left < best_left)) {
          best_dist = dist;
          best_left = left;
          bi = i;
          bj = j;
          found = true;
        }
      }
    }
    if (!found) return;
    Unit merged;
    merged.sites = set_union(units[bi].sites, units[bj].sites);
    merged.scale = scale;
    merged.volume = units[bi].volume + units[bj].volume;
    merged.touched = true;
    units.erase(units.begin() + static_cast<std::ptrdiff_t>(bj));
    units[bi] = std::move(merged);
  }
}

void classify(std::vector<Unit>& units, int scale, int n, BlockSet& out) {
  std::vector<Block> formed;
  for (auto& u : units) {
    if (!u.touched) {
      out.small.push_back(u.original);
      continue;
    }
    const int diam = u.sites.back() - u.sites.front();
    if (static_cast<double>(diam) < length_scale(scale)) {
      Block b = make_block(u.sites, scale, u.volume, n);
      out.small.push_back(b);
      formed.push_back(std::move(b));
    } else {
      out.large = set_union(out.large, u.sites);
      out.large_components.push_back(u.sites);
    }
  }
  auto by_left = [](const Block& a, const Block& b) { return a.sites.front() < b.sites.front(); };
  std::sort(out.small.begin(), out.small.end(), by_left);
  std::sort(formed.begin(), formed.end(), by_left);
  std::sort(out.large_components.begin(), out.large_components.end());
  out.formed.push_back(std::move(formed));
}

// Disjoint-set over indices.
struct Dsu {
  std::vector<std::size_t> parent;
  explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void join(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

BlockSet build_blocks_step1(std::span<const int> resonant_sites, int n, int m0) {
  SiteSet sites(resonant_sites.begin(), resonant_sites.end());
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  for (int s : sites) {
    if (s < 0 || s >= n) throw DimensionError("build_blocks_step1: site out of range");
  }
  BlockSet out;
  out.n = n;
  out.step = 1;
  std::vector<std::vector<int>> runs;
  for (int s : sites) {
    if (runs.empty() || runs.back().back() + 1 != s) runs.emplace_back();
    runs.back().push_back(s);
  }
  out.components.push_back(runs);

  std::vector<Unit> units;
  for (const auto& r : runs) {
    Unit u;
    u.sites = r;
    u.scale = 1;
    u.volume = static_cast<int>(r.size());
    units.push_back(std::move(u));
  }
  merge_violators(units, 1, m0, n);
  classify(units, 1, n, out);
  out.check_invariants(m0);
  return out;
}

BlockSet update_blocks(const BlockSet& prev, std::span<const SiteInterval> supports, int k, const FlowParams& p) {
  const int n = prev.n;
  BlockSet out;
  out.n = n;
  out.step = k;
  out.components = prev.components;
  out.formed = prev.formed;

  std::vector<SiteInterval> iv;
  for (const auto& s : supports) {
    if (s.empty()) continue;
    iv.push_back({std::max(0, s.lo), std::min(n - 1, s.hi)});
  }
  std::sort(iv.begin(), iv.end(), [](const SiteInterval& a, const SiteInterval& b) {
    return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
  });
  // Nearest-neighbour contact joins supports.
  std::vector<SiteInterval> joined;
  for (const auto& s : iv) {
    if (!joined.empty() && s.lo <= joined.back().hi + 1) {
      joined.back().hi = std::max(joined.back().hi, s.hi);
    } else {
      joined.push_back(s);
    }
  }

  // Nodes: joined supports, then previous small blocks, then previous large components.
  const std::size_t ns = joined.size();
  const std::size_t nb = prev.small.size();
  const std::size_t nl = prev.large_components.size();
  Dsu dsu(ns + nb + nl);
  std::vector<bool> touched(ns + nb + nl, false);
  for (std::size_t a = 0; a < ns; ++a) {
    touched[a] = true;
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& c = prev.small[b].collar;
      if (joined[a].lo <= c.hi && c.lo <= joined[a].hi) {
        dsu.join(a, ns + b);
        touched[ns + b] = true;
      }
    }
    for (std::size_t l = 0; l < nl; ++l) {
      for (int s : prev.large_components[l]) {
        if (joined[a].contains(s)) {
          dsu.join(a, ns + nb + l);
          touched[ns + nb + l] = true;
          break;
        }
      }
    }
  }

  std::vector<Unit> units;
  std::vector<std::vector<int>> new_components;
  std::vector<std::size_t> roots;
  for (std::size_t a = 0; a < ns; ++a) {
    const std::size_t r = dsu.find(a);
    if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
  }
  for (std::size_t r : roots) {
    Unit u;
    u.scale = k;
    u.touched = true;
    SiteSet support_sites;
    std::vector<SiteInterval> absorbed_collars;
    int absorbed = 0;
    for (std::size_t node = 0; node < ns + nb + nl; ++node) {
      if (dsu.find(node) != r) continue;
      if (node < ns) {
        for (int s = joined[node].lo; s <= joined[node].hi; ++s) support_sites.push_back(s);
      } else if (node < ns + nb) {
        const Block& b = prev.small[node - ns];
        u.sites = set_union(u.sites, b.sites);
        absorbed_collars.push_back(b.collar);
        ++absorbed;
      } else {
        const auto& comp = prev.large_components[node - ns - nb];
        u.sites = set_union(u.sites, comp);
        absorbed += static_cast<int>(comp.size());
      }
    }
    std::sort(support_sites.begin(), support_sites.end());
    support_sites.erase(std::unique(support_sites.begin(), support_sites.end()), support_sites.end());
    int free_sites = 0;
    for (int s : support_sites) {
      const bool in_block = std::any_of(absorbed_collars.begin(), absorbed_collars.end(),
                                        [s](const SiteInterval& c) { return c.contains(s); });
      if (!in_block) ++free_sites;
    }
    u.sites = set_union(u.sites, support_sites);
    u.volume = std::max(1, free_sites + absorbed);
    new_components.push_back(u.sites);
    units.push_back(std::move(u));
  }
  out.components.push_back(std::move(new_components));

  for (std::size_t b = 0; b < nb; ++b) {
    if (touched[ns + b]) continue;
    Unit u;
    u.sites = prev.small[b].sites;
    u.scale = prev.small[b].scale;
    u.volume = prev.small[b].volume;
    u.touched = false;
    u.original = prev.small[b];
    units.push_back(std::move(u));
  }
  for (std::size_t l = 0; l < nl; ++l) {
    if (touched[ns + nb + l]) continue;
    Unit u;
    u.sites = prev.large_components[l];
    u.scale = k;
    u.volume = static_cast<int>(u.sites.size());
    u.touched = true;
    units.push_back(std::move(u));
  }
  std::sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) { return a.sites.front() < b.sites.front(); });

  merge_violators(units, k, p.m0, n);
  classify(units, k, n, out);
  out.check_invariants(p.m0);
  return out;
}

void BlockSet::check_invariants(int m0) const {
  std::vector<int> owner(static_cast<std::size_t>(n), -1);
  auto claim = [&](int s, int who) {
    if (s < 0 || s >= n) throw FlowError("BlockSet: site out of range");
    if (owner[static_cast<std::size_t>(s)] != -1) throw FlowError("BlockSet: overlapping blocks");
    owner[static_cast<std::size_t>(s)] = who;
  };
  for (std::size_t b = 0; b < small.size(); ++b) {
    for (int s : small[b].sites) claim(s, static_cast<int>(b));
    if (!(static_cast<double>(small[b].diameter()) < length_scale(small[b].scale))) {
      throw FlowError("BlockSet: small block violates the diameter rule");
    }
  }
  for (std::size_t l = 0; l < large_components.size(); ++l) {
    for (int s : large_components[l]) claim(s, static_cast<int>(small.size() + l));
  }
  for (const auto& step_components : components) {
    for (const auto& comp : step_components) {
      for (int s : comp) {
        if (owner[static_cast<std::size_t>(s)] == -1) throw FlowError("BlockSet: resonant site left uncovered");
      }
    }
  }
  std::vector<Unit> units;
  for (const auto& b : small) units.push_back(Unit{b.sites, b.scale, b.volume, false, b});
  for (const auto& comp : large_components) {
    units.push_back(Unit{comp, step, static_cast<int>(comp.size()), true, {}});
  }
  for (std::size_t i = 0; i < units.size(); ++i) {
    for (std::size_t j = i + 1; j < units.size(); ++j) {
      if (static_cast<double>(set_distance(units[i].sites, units[j].sites)) <=
          pair_threshold(units[i], units[j], m0, n)) {
        throw FlowError("BlockSet: separation rule violated");
      }
    }
  }
}

int contracted_distance(int x, int y, const BlockSet& bs, int j) {
  std::vector<SiteInterval> iv;
  for (const auto& b : bs.small) {
    if (b.scale <= j) iv.push_back(b.outer);
  }
  std::sort(iv.begin(), iv.end(), [](const SiteInterval& a, const SiteInterval& b) { return a.lo < b.lo; });
  std::vector<SiteInterval> merged;
  for (const auto& s : iv) {
    if (!merged.empty() && s.lo <= merged.back().hi) {
      merged.back().hi = std::max(merged.back().hi, s.hi);
    } else {
      merged.push_back(s);
    }
  }
  auto unit_index = [&](int s) {
    int u = s;
    for (const auto& m : merged) {
      if (m.lo >= s) break;
      u -= (m.hi < s) ? (m.hi - m.lo) : (s - m.lo);
    }
    return u;
  };
  return std::abs(unit_index(x) - unit_index(y));
}

std::string to_string(ConnectivityKind kind) {
  switch (kind) {
    case ConnectivityKind::kP: return "P";
    case ConnectivityKind::kQ: return "Q";
    case ConnectivityKind::kR: return "R";
  }
  return "?";
}

const ConnectivityEntry& ConnectivityEstimate::at(int x, int y) const {
  if (x > y) std::swap(x, y);
  for (const auto& e : table) {
    if (e.x == x && e.y == y) return e;
  }
  throw DimensionError("ConnectivityEstimate::at: pair out of range");
}

ConnectivityEstimate estimate_connectivity(std::span<const BlockSet> ensemble, ConnectivityKind kind, int k,
                                           std::size_t min_realizations) {
  if (ensemble.size() < min_realizations) {
    throw ConfigError("estimate_connectivity: need at least " + std::to_string(min_realizations) + " realizations");
  }
  if (k < 1) throw ConfigError("estimate_connectivity: k must be >= 1");
  const int n = ensemble.front().n;
  const auto un = static_cast<std::size_t>(n);
  std::vector<std::size_t> hits(un * un, 0);
  std::vector<char> seen(un * un);
  for (const BlockSet& bs : ensemble) {
    if (bs.n != n) throw DimensionError("estimate_connectivity: mixed chain lengths");
    std::fill(seen.begin(), seen.end(), 0);
    auto mark_set = [&](const std::vector<int>& sites) {
      for (int x : sites)
        for (int y : sites)
          if (x <= y) seen[static_cast<std::size_t>(x) * un + static_cast<std::size_t>(y)] = 1;
    };
    auto mark_interval = [&](const SiteInterval& c) {
      for (int x = c.lo; x <= c.hi; ++x)
        for (int y = x; y <= c.hi; ++y) seen[static_cast<std::size_t>(x) * un + static_cast<std::size_t>(y)] = 1;
    };
    const auto ku = static_cast<std::size_t>(k);
    switch (kind) {
      case ConnectivityKind::kP:
        if (ku <= bs.components.size())
          for (const auto& comp : bs.components[ku - 1]) mark_set(comp);
        break;
      case ConnectivityKind::kQ:
        if (ku <= bs.formed.size())
          for (const auto& b : bs.formed[ku - 1]) mark_interval(b.collar);
        break;
      case ConnectivityKind::kR:
        for (std::size_t i = 0; i < std::min(ku, bs.formed.size()); ++i)
          for (const auto& b : bs.formed[i]) mark_interval(b.collar);
        break;
    }
    for (std::size_t c = 0; c < seen.size(); ++c) hits[c] += static_cast<std::size_t>(seen[c]);
  }
  ConnectivityEstimate est;
  est.kind = kind;
  est.k = k;
  est.n = n;
  est.n_realizations = ensemble.size();
  for (int x = 0; x < n; ++x) {
    for (int y = x; y < n; ++y) {
      const std::size_t h = hits[static_cast<std::size_t>(x) * un + static_cast<std::size_t>(y)];
      const auto ci = stats::wilson(h, ensemble.size());
      est.table.push_back({x, y, h, static_cast<double>(h) / static_cast<double>(ensemble.size()), ci.lo, ci.hi});
    }
  }
  return est;
}

std::string connectivity_csv(const ConnectivityEstimate& est, bool header) {
  std::ostringstream os;
  os.precision(17);
  if (header) os << "kind,k,x,y,prob,ci_lo,ci_hi,n_realizations\n";
  for (const auto& e : est.table) {
    os << to_string(est.kind) << ',' << est.k << ',' << e.x << ',' << e.y << ',' << e.prob << ',' << e.ci_lo << ','
       << e.ci_hi << ',' << est.n_realizations << '\n';
  }
  return os.str();
}

}  // namespace mblflow
