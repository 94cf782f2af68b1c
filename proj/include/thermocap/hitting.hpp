#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "thermocap/capacity.hpp"
#include "thermocap/dimension.hpp"
#include "thermocap/error.hpp"
#include "thermocap/geometry.hpp"
#include "thermocap/parallel.hpp"
#include "thermocap/refinement.hpp"
#include "thermocap/rng.hpp"
#include "thermocap/sheet.hpp"
#include "thermocap/stable.hpp"

namespace thermocap {

// ---------------------------------------------------------------------------
// Distance to a set
// ---------------------------------------------------------------------------

namespace detail {

inline double box_gap2(std::span<const double> x, std::span<const double> lo, double width) {
  double g = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) {
    const double e = x[a] < lo[a] ? lo[a] - x[a] : (x[a] > lo[a] + width ? x[a] - lo[a] - width : 0.0);
    g += e * e;
  }
  return g;
}

// Branch and bound over cylinder cubes; `best2` is the squared cutoff on
// entry and the squared distance (if smaller) on exit.
inline void ifs_distance2(const SelfSimilarIFS& k, std::span<const double> x, std::vector<double>& corner,
                          double width, int level, double& best2) {
  const std::size_t dim = x.size();
  if (level == k.depth) {
    best2 = std::min(best2, box_gap2(x, corner, width));
    return;
  }
  const double child = width * k.ratio;
  const std::size_t m = k.offsets.size();
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(m);
  std::vector<double> ci(dim);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t a = 0; a < dim; ++a) ci[a] = corner[a] + width * k.offsets[i][a];
    const double g = box_gap2(x, ci, child);
    if (g < best2) order.emplace_back(g, i);
  }
  std::sort(order.begin(), order.end());
  std::vector<double> next(dim);
  for (const auto& [g, i] : order) {
    if (g >= best2) break;
    for (std::size_t a = 0; a < dim; ++a) next[a] = corner[a] + width * k.offsets[i][a];
    ifs_distance2(k, x, next, child, level + 1, best2);
  }
}

}  // namespace detail

/// min(dist(x, F), cutoff). Self-similar sets are taken at their stated
/// depth, i.e. as the union of the depth-D cylinder cubes.
inline double set_distance(const SetSpec& F, std::span<const double> x, double cutoff = kInfinity) {
  require(x.size() == F.ambient_dim, ErrorKind::InvalidInput, "point and set have different dimensions");
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IntervalBox>) {
          double g = 0.0;
          for (std::size_t a = 0; a < x.size(); ++a) {
            const double e = x[a] < k.lo[a] ? k.lo[a] - x[a] : (x[a] > k.hi[a] ? x[a] - k.hi[a] : 0.0);
            g += e * e;
          }
          return std::min(std::sqrt(g), cutoff);
        } else if constexpr (std::is_same_v<T, SelfSimilarIFS>) {
          double best2 = cutoff * cutoff;
          std::vector<double> corner = k.origin;
          detail::ifs_distance2(k, x, corner, k.scale, 0, best2);
          return std::min(std::sqrt(best2), cutoff);
        } else if constexpr (std::is_same_v<T, Ball>) {
          return std::min(std::max(0.0, euclidean_distance(x, k.center) - k.radius), cutoff);
        } else if constexpr (std::is_same_v<T, PointCloud>) {
          double best = cutoff;
          for (const auto& p : k.points) best = std::min(best, euclidean_distance(x, p));
          return best;
        } else {
          double best = cutoff;
          for (const auto& m : k.members) best = std::min(best, set_distance(m, x, best));
          return best;
        }
      },
      F.kind);
}


// ---------------------------------------------------------------------------
// Lazily sampled two-parameter sheet on a rectangle
// ---------------------------------------------------------------------------

/// Exact Brownian sheet values at dyadic points of [a1,b1] x [a2,b2], drawn
/// on demand. Writing x = (s-a1)/L1 and y = (t-a2)/L2,
///   W(s,t) = sqrt(a1 a2) Z + sqrt(a2 L1) B1(x) + sqrt(a1 L2) B2(y) + sqrt(L1 L2) W0(x,y),
/// with B1, B2 Brownian motions and W0 a standard sheet on the unit square,
/// W0 = sum_{j,k} Z_{jk} S_j(x) S_k(y) over Schauder functions. Every Z is a
/// hash of (seed, indices), so values do not depend on evaluation order and
/// agree with any full expansion. Cells are refined by Levy midpoint
/// displacement; the Brownian motions y -> sum_k Z_{jk} S_k(y) needed on the
/// edges are cached per path.
class LazyRectSheet {
 public:
  static constexpr std::size_t kMaxDim = 16;
  using Vec = std::array<double, kMaxDim>;

  LazyRectSheet(const std::vector<double>& lo, const std::vector<double>& hi, std::size_t d, std::uint64_t seed)
      : d_(d), seed_(seed) {
    require(lo.size() == 2 && hi.size() == 2, ErrorKind::InvalidInput, "lazy sheet needs a planar rectangle");
    require(d >= 1 && d <= kMaxDim, ErrorKind::Unsupported, "lazy sheet supports 1 <= d <= 16");
    require(lo[0] > 0.0 && lo[1] > 0.0 && hi[0] > lo[0] && hi[1] > lo[1], ErrorKind::InvalidInput,
            "rectangle must be nondegenerate inside (0, inf)^2");
    a1_ = lo[0];
    a2_ = lo[1];
    l1_ = hi[0] - lo[0];
    l2_ = hi[1] - lo[1];
    for (std::size_t c = 0; c < d_; ++c) anchor_[c] = std::sqrt(a1_ * a2_) * normal(kAnchor, 0, 0, c);
  }

  std::size_t dim() const { return d_; }
  double width(int axis) const { return axis == 0 ? l1_ : l2_; }
  double low(int axis) const { return axis == 0 ? a1_ : a2_; }

  /// W0 at the corners of the unit square: (0,0), (1,0), (0,1), (1,1).
  std::array<Vec, 4> root_corners() {
    std::array<Vec, 4> w{};
    for (std::size_t c = 0; c < d_; ++c) w[3][c] = z(pack(0, 1), pack(0, 1), c);
    return w;
  }

  /// Full sheet value at (ix, iy) / 2^level given W0 there.
  Vec full(int level, std::uint64_t ix, std::uint64_t iy, const Vec& w0) {
    const Vec b1 = bm(kB1, 0, level, ix), b2 = bm(kB2, 0, level, iy);
    const double f1 = std::sqrt(a2_ * l1_), f2 = std::sqrt(a1_ * l2_), f0 = std::sqrt(l1_ * l2_);
    Vec v{};
    for (std::size_t c = 0; c < d_; ++c) v[c] = anchor_[c] + f1 * b1[c] + f2 * b2[c] + f0 * w0[c];
    return v;
  }

  /// W0 at the five new points of the level-(l+1) refinement of the cell
  /// [ix, ix+1] x [iy, iy+1] / 2^l, from its corners (order as root_corners).
  /// Output order: bottom, top, left, right, center.
  std::array<Vec, 5> refine(int l, std::uint64_t ix, std::uint64_t iy, const std::array<Vec, 4>& w) {
    const std::uint64_t jx = pack(l + 1, 2 * ix + 1), ky = pack(l + 1, 2 * iy + 1);
    const double s1 = std::pow(2.0, -0.5 * (l + 2));  // Schauder peak at level l+1
    const Vec ub = bm(kU, jx, l, iy), ut = bm(kU, jx, l, iy + 1);
    const Vec vl = bm(kV, ky, l, ix), vr = bm(kV, ky, l, ix + 1);
    std::array<Vec, 5> out{};
    for (std::size_t c = 0; c < d_; ++c) {
      const double bottom = 0.5 * (w[0][c] + w[1][c]) + s1 * ub[c];
      const double top = 0.5 * (w[2][c] + w[3][c]) + s1 * ut[c];
      const double left = 0.5 * (w[0][c] + w[2][c]) + s1 * vl[c];
      const double right = 0.5 * (w[1][c] + w[3][c]) + s1 * vr[c];
      const double avg = 0.25 * (w[0][c] + w[1][c] + w[2][c] + w[3][c]);
      out[0][c] = bottom;
      out[1][c] = top;
      out[2][c] = left;
      out[3][c] = right;
      out[4][c] = 0.5 * (bottom + top) + 0.5 * (left + right) - avg + s1 * s1 * z(jx, ky, c);
    }
    return out;
  }

  /// Per-coordinate standard deviation bound for W(p) - W(q) over p, q in one
  /// level-l cell.
  double cell_sigma(int l) const {
    return std::sqrt(((a2_ + l2_) * l1_ + (a1_ + l1_) * l2_) * std::ldexp(1.0, -l));
  }

  std::size_t cache_size() const { return index_.size(); }

 private:
  enum Kind : std::uint64_t { kU = 1, kV = 2, kB1 = 3, kB2 = 4, kAnchor = 5, kSheet = 6 };

  static std::uint64_t pack(int level, std::uint64_t m) { return (static_cast<std::uint64_t>(level) << 56) | m; }

  double normal(std::uint64_t kind, std::uint64_t a, std::uint64_t b, std::size_t c) const {
    std::uint64_t h = mix64(seed_ ^ (kind * 0x9e3779b97f4a7c15ULL));
    h = mix64(h ^ a);
    h = mix64(h ^ (b + 0x632be59bd9b4e019ULL));
    h = mix64(h ^ (static_cast<std::uint64_t>(c) + 0x85ebca6b));
    return hashed_normal(h);
  }

  // Z_{jk} for x-Schauder index j and y-Schauder index k, each packed as
  // its peak point.
  double z(std::uint64_t j, std::uint64_t k, std::size_t c) const { return normal(kSheet, j, k, c); }

  // Lazy Brownian motion on [0,1] at m / 2^l. For kU the process is
  // y -> sum_k Z_{fixed,k} S_k(y); for kV it is x -> sum_j Z_{j,fixed} S_j(x).
  Vec bm(Kind kind, std::uint64_t fixed, int l, std::uint64_t m) {
    Vec v{};
    if (m == 0) return v;
    while (l > 0 && (m & 1) == 0) {
      m >>= 1;
      --l;
    }
    const std::uint64_t p = pack(l, m);
    auto gauss = [&](std::size_t c) {
      switch (kind) {
        case kU: return z(fixed, p, c);
        case kV: return z(p, fixed, c);
        default: return normal(kind, p, 0, c);
      }
    };
    if (l == 0) {
      for (std::size_t c = 0; c < d_; ++c) v[c] = gauss(c);
      return v;
    }
    const std::uint64_t key = mix64(mix64(kind ^ mix64(fixed)) ^ p);
    if (auto it = index_.find(key); it != index_.end()) {
      std::copy_n(pool_.begin() + static_cast<std::ptrdiff_t>(it->second), d_, v.begin());
      return v;
    }
    const Vec left = bm(kind, fixed, l, m - 1), right = bm(kind, fixed, l, m + 1);
    const double sd = std::pow(2.0, -0.5 * (l + 1));
    for (std::size_t c = 0; c < d_; ++c) v[c] = 0.5 * (left[c] + right[c]) + sd * gauss(c);
    index_.emplace(key, pool_.size());
    pool_.insert(pool_.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(d_));
    return v;
  }

  std::size_t d_;
  std::uint64_t seed_;
  double a1_ = 0, a2_ = 0, l1_ = 0, l2_ = 0;
  Vec anchor_{};
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<double> pool_;
};

/// Smallest dist(W(p), F) over the level-`level` dyadic lattice of the
/// rectangle, resolved only as far as the ascending `thresholds` require:
/// for every threshold e, (result < e) iff some lattice point is within e of F.
/// A cell is pruned when its smallest corner distance minus
/// margin * cell_sigma reaches the largest threshold not yet beaten, so the
/// answer is exact unless the sheet moves more than `margin` standard
/// deviations inside one cell. Distances at or above the largest threshold
/// are reported as that threshold.
struct LazySearchResult {
  double min_distance = kInfinity;
  std::size_t points = 0;
};

inline LazySearchResult lazy_min_distance(LazyRectSheet& sheet, int level, const SetSpec& F,
                                          const std::vector<double>& thresholds, double margin) {
  using Vec = LazyRectSheet::Vec;
  require(!thresholds.empty(), ErrorKind::InvalidInput, "need at least one threshold");
  require(std::is_sorted(thresholds.begin(), thresholds.end()), ErrorKind::InvalidInput,
          "thresholds must be ascending");
  const std::size_t d = sheet.dim();
  LazySearchResult res;
  double best = thresholds.back();
  // Largest threshold that best has not yet beaten; 0 once all are beaten.
  auto target = [&]() {
    for (std::size_t i = thresholds.size(); i-- > 0;)
      if (thresholds[i] <= best) return thresholds[i];
    return 0.0;
  };
  double tau = target();
  auto dist = [&](const Vec& w, double cut) {
    ++res.points;
    const double v = set_distance(F, std::span<const double>(w.data(), d), cut);
    if (v < best) {
      best = v;
      tau = target();
    }
    return v;
  };
  struct Node {
    std::array<Vec, 4> w0;
    std::array<double, 4> dist;
  };
  auto visit = [&](auto&& self, int l, std::uint64_t ix, std::uint64_t iy, const Node& node) -> void {
    const double lo = *std::min_element(node.dist.begin(), node.dist.end());
    if (tau <= 0.0 || l >= level || lo - margin * sheet.cell_sigma(l) >= tau) return;
    const double cut = tau + margin * sheet.cell_sigma(l + 1);
    const auto mid = sheet.refine(l, ix, iy, node.w0);
    const std::uint64_t x0 = 2 * ix, y0 = 2 * iy;
    // Points: bottom (x0+1,y0) top (x0+1,y0+2) left (x0,y0+1) right (x0+2,y0+1) center (x0+1,y0+1).
    const std::array<std::pair<std::uint64_t, std::uint64_t>, 5> at{
        {{x0 + 1, y0}, {x0 + 1, y0 + 2}, {x0, y0 + 1}, {x0 + 2, y0 + 1}, {x0 + 1, y0 + 1}}};
    std::array<double, 5> md{};
    for (std::size_t i = 0; i < 5; ++i) md[i] = dist(sheet.full(l + 1, at[i].first, at[i].second, mid[i]), cut);
    // Children: (dx, dy) with corners from the parent, edge midpoints and center.
    std::array<Node, 4> kids;
    kids[0] = {{node.w0[0], mid[0], mid[2], mid[4]}, {node.dist[0], md[0], md[2], md[4]}};
    kids[1] = {{mid[0], node.w0[1], mid[4], mid[3]}, {md[0], node.dist[1], md[4], md[3]}};
    kids[2] = {{mid[2], mid[4], node.w0[2], mid[1]}, {md[2], md[4], node.dist[2], md[1]}};
    kids[3] = {{mid[4], mid[3], mid[1], node.w0[3]}, {md[4], md[3], md[1], node.dist[3]}};
    std::array<std::pair<double, int>, 4> order;
    for (int c = 0; c < 4; ++c) order[c] = {*std::min_element(kids[c].dist.begin(), kids[c].dist.end()), c};
    std::sort(order.begin(), order.end());
    for (const auto& [g, c] : order) self(self, l + 1, x0 + (c & 1), y0 + (c >> 1), kids[c]);
  };
  Node root;
  root.w0 = sheet.root_corners();
  const std::array<std::pair<std::uint64_t, std::uint64_t>, 4> corners{{{0, 0}, {1, 0}, {0, 1}, {1, 1}}};
  for (std::size_t i = 0; i < 4; ++i)
    root.dist[i] = dist(sheet.full(0, corners[i].first, corners[i].second, root.w0[i]), kInfinity);
  visit(visit, 0, 0, 0, root);
  res.min_distance = best;
  return res;
}

// ---------------------------------------------------------------------------
// Hit probability estimation
// ---------------------------------------------------------------------------

inline constexpr double kWilsonZ = 1.959964;

/// 95% Wilson score interval for k successes in n trials: (center, halfwidth).
inline std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z = kWilsonZ) {
  require(n > 0 && k <= n, ErrorKind::InvalidInput, "Wilson interval needs 0 <= k <= n, n > 0");
  const double nn = static_cast<double>(n), p = static_cast<double>(k) / nn, z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {center, half};
}

enum class HitEngine { Sequential, LazyRect, Lattice };

inline const char* to_string(HitEngine e) {
  switch (e) {
    case HitEngine::Sequential: return "sequential";
    case HitEngine::LazyRect: return "lazy_rect";
    case HitEngine::Lattice: return "lattice";
  }
  return "?";
}

struct HitOptions {
  /// Parameter-lattice resolution; 0 selects (min epsilon)^2 / 4.
  double resolution = 0.0;
  unsigned threads = 1;
  /// Pruning margin of the lazy two-parameter search, in cell standard deviations.
  double margin = 3.0;
  std::size_t max_lattice_points = std::size_t{1} << 24;
  DiscretizeOptions discretize;
};

struct HitEstimate {
  std::vector<double> epsilon_schedule;
  std::vector<double> rates;
  std::vector<std::size_t> hits;
  std::vector<double> wilson_halfwidth;
  std::size_t n_paths = 0;
  double resolution = 0.0;
  HitEngine engine = HitEngine::Sequential;
  /// Per path: min distance from W(lattice) to F, exact up to the epsilon
  /// buckets (a path hits at epsilon iff this is < epsilon).
  std::vector<double> path_min_distance;
};

namespace detail {

struct HitPlan {
  HitEngine engine = HitEngine::Sequential;
  std::size_t d = 1;
  std::vector<double> times;             // sequential
  std::vector<double> rect_lo, rect_hi;  // lazy rectangle
  int level = 0;
  Lattice lattice;                       // full lattice
  std::vector<std::size_t> lins;
};

inline HitPlan make_hit_plan(const SetSpec& E, std::size_t d, double res, const HitOptions& opt, bool lazy = true) {
  auto [blo, bhi] = bounding_box(E);
  for (double v : blo) require(v > 0.0, ErrorKind::InvalidInput, "E must lie strictly inside (0, inf)^N");
  HitPlan plan;
  plan.d = d;
  const std::size_t N = E.ambient_dim;
  if (lazy && N == 2 && d <= LazyRectSheet::kMaxDim && std::holds_alternative<IntervalBox>(E.kind)) {
    const auto& b = std::get<IntervalBox>(E.kind);
    if (b.hi[0] > b.lo[0] && b.hi[1] > b.lo[1]) {
      plan.engine = HitEngine::LazyRect;
      plan.rect_lo = b.lo;
      plan.rect_hi = b.hi;
      const double w = std::max(b.hi[0] - b.lo[0], b.hi[1] - b.lo[1]);
      while (std::ldexp(w, -plan.level) > res * (1.0 + 1e-12)) ++plan.level;
      require(plan.level <= 40, ErrorKind::ResourceLimit, "lazy sheet level exceeds 40");
      return plan;
    }
  }
  const auto cells = discretize_set(at_resolution(E, res), res, opt.discretize);
  if (N == 1) {
    plan.engine = HitEngine::Sequential;
    for (const auto& c : cells) plan.times.push_back(c.rep[0]);
    std::sort(plan.times.begin(), plan.times.end());
    plan.times.erase(std::unique(plan.times.begin(), plan.times.end()), plan.times.end());
    return plan;
  }
  plan.engine = HitEngine::Lattice;
  plan.lattice.assign(N, {});
  for (const auto& c : cells)
    for (std::size_t a = 0; a < N; ++a) plan.lattice[a].push_back(c.rep[a]);
  double total = 1.0;
  for (auto& ax : plan.lattice) {
    std::sort(ax.begin(), ax.end());
    ax.erase(std::unique(ax.begin(), ax.end()), ax.end());
    total *= static_cast<double>(ax.size());
  }
  require(total <= static_cast<double>(opt.max_lattice_points), ErrorKind::ResourceLimit,
          "parameter lattice has too many points");
  for (const auto& c : cells) plan.lins.push_back(lattice_index(plan.lattice, find_on_lattice(plan.lattice, c.rep)));
  std::sort(plan.lins.begin(), plan.lins.end());
  plan.lins.erase(std::unique(plan.lins.begin(), plan.lins.end()), plan.lins.end());
  return plan;
}

// Min distance of one path, resolved to the ascending thresholds.
inline double path_min_distance(const HitPlan& plan, const SetSpec& F, const std::vector<double>& thresholds,
                                double margin, std::uint64_t seed) {
  const double top = thresholds.back(), bottom = thresholds.front();
  double best = top;
  std::vector<double> w(plan.d, 0.0);
  switch (plan.engine) {
    case HitEngine::Sequential: {
      Rng rng(seed);
      double prev = 0.0;
      for (double t : plan.times) {
        const double sd = std::sqrt(t - prev);
        prev = t;
        for (auto& v : w) v += sd * rng.normal();
        best = std::min(best, set_distance(F, w, best));
        if (best < bottom) break;
      }
      return best;
    }
    case HitEngine::LazyRect: {
      LazyRectSheet sheet(plan.rect_lo, plan.rect_hi, plan.d, seed);
      return lazy_min_distance(sheet, plan.level, F, thresholds, margin).min_distance;
    }
    case HitEngine::Lattice: {
      const auto path = sample_sheet(plan.lattice, plan.d, seed);
      for (std::size_t lin : plan.lins) {
        best = std::min(best, set_distance(F, std::span<const double>(path.at(lin), plan.d), best));
        if (best < bottom) break;
      }
      return best;
    }
  }
  return best;
}

}  // namespace detail

/// Fraction of paths whose lattice image comes within epsilon of F, for each
/// epsilon in the (strictly decreasing) schedule. Path p uses the seed
/// derive_seed(seed, p), so results do not depend on the thread count.
inline HitEstimate estimate_hit_prob(const SetSpec& E, const SetSpec& F, const std::vector<double>& epsilon_schedule,
                                     std::size_t n_paths, std::uint64_t seed, const HitOptions& opt = {}) {
  require(!epsilon_schedule.empty(), ErrorKind::InvalidConfig, "epsilon schedule is empty");
  for (std::size_t i = 0; i < epsilon_schedule.size(); ++i) {
    require(epsilon_schedule[i] > 0.0 && std::isfinite(epsilon_schedule[i]), ErrorKind::InvalidConfig,
            "epsilons must be positive");
    if (i > 0)
      require(epsilon_schedule[i] < epsilon_schedule[i - 1], ErrorKind::InvalidConfig,
              "epsilon schedule must be strictly decreasing");
  }
  require(n_paths >= 1, ErrorKind::InvalidConfig, "need at least one path");
  E.validate();
  F.validate();
  const double emin = epsilon_schedule.back();
  const double limit = emin * emin / 4.0;
  const double res = opt.resolution > 0.0 ? opt.resolution : limit;
  require(res <= limit * (1.0 + 1e-12), ErrorKind::InvalidConfig,
          "lattice resolution must be at most (min epsilon)^2 / 4");

  HitEstimate est;
  est.epsilon_schedule = epsilon_schedule;
  est.n_paths = n_paths;
  est.resolution = res;
  est.path_min_distance.assign(n_paths, kInfinity);
  if (!is_empty_set(F)) {
    const auto plan = detail::make_hit_plan(E, F.ambient_dim, res, opt);
    est.engine = plan.engine;
    const std::vector<double> thresholds(epsilon_schedule.rbegin(), epsilon_schedule.rend());
    parallel_for(n_paths, opt.threads, [&](std::size_t p) {
      est.path_min_distance[p] = detail::path_min_distance(plan, F, thresholds, opt.margin, derive_seed(seed, p));
    });
  }
  const std::size_t K = epsilon_schedule.size();
  est.hits.assign(K, 0);
  for (double m : est.path_min_distance) {
    // Nested neighborhoods: a hit at a smaller epsilon implies a hit at every larger one.
    bool hit_smaller = false;
    for (std::size_t k = K; k-- > 0;) {
      const bool h = m < epsilon_schedule[k];
      require(h || !hit_smaller, ErrorKind::InvalidInput, "nestedness violated");
      hit_smaller = h;
      if (h) ++est.hits[k];
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    est.rates.push_back(static_cast<double>(est.hits[k]) / static_cast<double>(n_paths));
    est.wilson_halfwidth.push_back(wilson_interval(est.hits[k], n_paths).second);
  }
  return est;
}

/// CSV: epsilon, rate, wilson_halfwidth.
inline void write_hit_csv(std::ostream& os, const HitEstimate& h) {
  os << "epsilon,rate,wilson_halfwidth\n";
  os.precision(17);
  for (std::size_t k = 0; k < h.epsilon_schedule.size(); ++k)
    os << h.epsilon_schedule[k] << ',' << h.rates[k] << ',' << h.wilson_halfwidth[k] << '\n';
}

// ---------------------------------------------------------------------------
// Hit-rate trend and the capacity consistency verdict

enum class HitTrend { Positive, Vanishing, Undetermined };

inline const char* to_string(HitTrend t) {
  switch (t) {
    case HitTrend::Positive: return "positive";
    case HitTrend::Vanishing: return "vanishing";
    case HitTrend::Undetermined: return "undetermined";
  }
  return "?";
}

struct HitTrendReport {
  HitTrend trend = HitTrend::Undetermined;
  /// Extrapolated rate as epsilon -> 0 (0 when the pure power law is kept).
  double floor = 0.0;
  /// Fitted exponent theta in rate ~ floor + C epsilon^theta.
  double decay_exponent = 0.0;
  double amplitude = 0.0;
  /// Chi-square gain of the plateau model over the pure power law.
  double plateau_gain = 0.0;
};

struct HitTrendOptions {
  /// Plateau model is kept only if it improves the chi-square by this much.
  double plateau_gain = 9.0;
  /// Positive when the floor exceeds this multiple of the largest halfwidth.
  double floor_factor = 2.0;
  double max_exponent = 3.0;
  std::size_t exponent_grid = 150;
};

/// Fits rate(eps) = P + C eps^theta (P, C >= 0) against the pure power law
/// C eps^theta by binomially weighted least squares over a theta grid. The
/// pure power law is kept when the rate drops significantly along the
/// schedule and the plateau brings no clear chi-square gain; the rate then
/// vanishes. Otherwise the hit probability is declared positive when the
/// floor P clears floor_factor times the largest Wilson halfwidth.
inline HitTrendReport classify_hit_trend(const HitEstimate& h, const HitTrendOptions& opt = {}) {
  HitTrendReport rep;
  const std::size_t K = h.rates.size();
  if (K == 0) return rep;
  if (h.hits.back() == 0 && std::all_of(h.hits.begin(), h.hits.end(), [](std::size_t v) { return v == 0; })) {
    rep.trend = HitTrend::Vanishing;
    return rep;
  }
  if (K < 3) return rep;
  const double n = static_cast<double>(h.n_paths);
  std::vector<double> w(K);
  for (std::size_t k = 0; k < K; ++k) w[k] = n / std::max(h.rates[k] * (1.0 - h.rates[k]), 1.0 / n);

  struct Fit {
    double chi2 = kInfinity, P = 0.0, C = 0.0, theta = 0.0;
  };
  auto fit = [&](bool plateau) {
    Fit best;
    std::vector<double> x(K);
    for (std::size_t g = 1; g <= opt.exponent_grid; ++g) {
      const double theta = opt.max_exponent * static_cast<double>(g) / static_cast<double>(opt.exponent_grid);
      double sw = 0, sx = 0, sxx = 0, sr = 0, sxr = 0;
      for (std::size_t k = 0; k < K; ++k) {
        x[k] = std::pow(h.epsilon_schedule[k], theta);
        sw += w[k];
        sx += w[k] * x[k];
        sxx += w[k] * x[k] * x[k];
        sr += w[k] * h.rates[k];
        sxr += w[k] * x[k] * h.rates[k];
      }
      double P = 0.0, C = std::max(0.0, sxr / sxx);
      if (plateau) {
        const double det = sw * sxx - sx * sx;
        P = (sxx * sr - sx * sxr) / det;
        C = (sw * sxr - sx * sr) / det;
        if (P < 0.0) {
          P = 0.0;
          C = std::max(0.0, sxr / sxx);
        } else if (C < 0.0) {
          C = 0.0;
          P = sr / sw;
        }
      }
      double chi2 = 0.0;
      for (std::size_t k = 0; k < K; ++k) chi2 += w[k] * std::pow(h.rates[k] - P - C * x[k], 2);
      if (chi2 < best.chi2) best = {chi2, P, C, theta};
    }
    return best;
  };
  const Fit pow_fit = fit(false), plat_fit = fit(true);
  rep.plateau_gain = pow_fit.chi2 - plat_fit.chi2;
  // A curve that does not drop beyond its intervals is no evidence of decay,
  // however well a shallow power law fits it.
  const bool drops = h.hits.back() == 0 ||
                     h.rates.back() + h.wilson_halfwidth.back() < h.rates.front() - h.wilson_halfwidth.front();
  const bool plateau = rep.plateau_gain > opt.plateau_gain || !drops;
  const Fit& use = plateau ? plat_fit : pow_fit;
  rep.floor = use.P;
  rep.amplitude = use.C;
  rep.decay_exponent = use.theta;
  const double top_hw = *std::max_element(h.wilson_halfwidth.begin(), h.wilson_halfwidth.end());
  if (rep.floor > opt.floor_factor * top_hw)
    rep.trend = HitTrend::Positive;
  else if (!plateau)
    rep.trend = HitTrend::Vanishing;
  return rep;
}

enum class Verdict { ConsistentHits, ConsistentNoHit, Inconsistent };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::ConsistentHits: return "Consistent-Hits";
    case Verdict::ConsistentNoHit: return "Consistent-NoHit";
    case Verdict::Inconsistent: return "Inconsistent";
  }
  return "?";
}

struct ConsistencyVerdict {
  Verdict verdict = Verdict::Inconsistent;
  TrendReport capacity;
  HitTrendReport hit;
};

/// Consistent when a positive capacity trend meets a positive hit floor, or
/// a zero capacity trend meets a vanishing hit rate.
inline ConsistencyVerdict capacity_consistency_check(const HitEstimate& hit, const TrendReport& capacity,
                                                     const HitTrendOptions& opt = {}) {
  ConsistencyVerdict v;
  v.capacity = capacity;
  v.hit = classify_hit_trend(hit, opt);
  if (capacity.trend == CapacityTrend::Positive && v.hit.trend == HitTrend::Positive)
    v.verdict = Verdict::ConsistentHits;
  else if (capacity.trend == CapacityTrend::Zero && v.hit.trend == HitTrend::Vanishing)
    v.verdict = Verdict::ConsistentNoHit;
  return v;
}

// ---------------------------------------------------------------------------
// Intersection dimension

struct IntersectionDimOptions {
  /// Parameter-lattice resolution; 0 selects (epsilon)^2 / 64, coarsened
  /// by factors of 4 down to (epsilon)^2 / 4 while the lattice exceeds
  /// max_lattice_points.
  double resolution = 0.0;
  unsigned threads = 1;
  std::size_t max_lattice_points = std::size_t{1} << 22;
  /// Paths with fewer image points in F^epsilon report no dimension.
  std::size_t min_points = 100;
  /// Scale window: scales finer than diam(F) / 2^coarse_gap when F has
  /// interior, else scales from 2^-k_min down to 2 epsilon.
  int coarse_gap = 4;
  int k_min = 3;
  int k_max = 14;
  /// Shifted grids for box counts, used for sets without interior.
  std::size_t grid_offsets = 4;
  DiscretizeOptions discretize;
};

struct IntersectionDimStat {
  /// Paths that reported a dimension, with their box-counting reports.
  std::vector<std::size_t> path_ids;
  std::vector<DimReport> per_path_dims;
  /// Max of the per-path estimates (0 when none).
  double ess_sup_estimate = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_hitting = 0;
  /// Set when no path came within epsilon of F.
  bool no_hits = false;
  double resolution = 0.0;
  int k_min = 0;
  int k_max = 0;
};

/// True for sets whose limit object has nonempty interior in R^d: boxes
/// with positive sides, balls with positive radius and unions of those.
inline bool has_interior(const SetSpec& F) {
  return std::visit(
      [&](const auto& k) -> bool {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IntervalBox>) {
          for (std::size_t a = 0; a < k.lo.size(); ++a)
            if (!(k.hi[a] > k.lo[a])) return false;
          return true;
        } else if constexpr (std::is_same_v<T, Ball>) {
          return k.radius > 0.0;
        } else if constexpr (std::is_same_v<T, UnionSet>) {
          return !k.members.empty() && std::all_of(k.members.begin(), k.members.end(), has_interior);
        } else {
          return false;
        }
      },
      F.kind);
}

/// Box-counting dimension of W(lattice) in F^epsilon, path by path. Below
/// epsilon the fattening fills in sets without interior, so for those the
/// window stops at 2 epsilon; for sets with interior it stops where the
/// lattice runs out of points. Scales within a factor 2^coarse_gap of
/// diam(F) only see the window and are skipped.
inline IntersectionDimStat estimate_intersection_dim(const SetSpec& E, const SetSpec& F, double epsilon,
                                                     std::size_t n_paths, std::uint64_t seed,
                                                     const IntersectionDimOptions& opt = {}) {
  require(epsilon > 0.0 && std::isfinite(epsilon), ErrorKind::InvalidConfig, "epsilon must be positive");
  require(n_paths >= 1, ErrorKind::InvalidConfig, "need at least one path");
  E.validate();
  F.validate();
  const double limit = epsilon * epsilon / 4.0;
  double res = opt.resolution;
  if (res <= 0.0) {
    const auto [blo, bhi] = bounding_box(E);
    res = limit / 16.0;
    auto points = [&](double r) {
      double n = 1.0;
      for (std::size_t a = 0; a < blo.size(); ++a) n *= std::floor((bhi[a] - blo[a]) / r) + 1.0;
      return n;
    };
    while (res < limit && points(res) > static_cast<double>(opt.max_lattice_points)) res *= 4.0;
  }
  require(res <= limit * (1.0 + 1e-12), ErrorKind::InvalidConfig,
          "lattice resolution must be at most epsilon^2 / 4");

  IntersectionDimStat st;
  st.n_paths = n_paths;
  st.resolution = res;
  BoxCountOptions box;
  box.min_points = opt.min_points;
  box.k_min = opt.k_min;
  box.k_max = opt.k_max;
  if (is_empty_set(F)) {
    st.no_hits = true;
    return st;
  }
  if (has_interior(F)) {
    const auto [flo, fhi] = bounding_box(F);
    double diam = 0.0;
    for (std::size_t a = 0; a < flo.size(); ++a) diam = std::max(diam, fhi[a] - flo[a]);
    box.k_min = std::max(opt.k_min, static_cast<int>(std::ceil(std::log2(diam))) + opt.coarse_gap);
  } else {
    box.grid_offsets = opt.grid_offsets;
    box.k_max = std::min(opt.k_max, static_cast<int>(std::floor(std::log2(1.0 / (2.0 * epsilon)))));
    box.k_min = std::max(0, std::min(opt.k_min, box.k_max - 2));
  }
  require(box.k_min < box.k_max, ErrorKind::InvalidConfig, "epsilon leaves fewer than two box-counting scales");
  st.k_min = box.k_min;
  st.k_max = box.k_max;

  HitOptions hopt;
  hopt.max_lattice_points = std::size_t{1} << 26;
  hopt.discretize = opt.discretize;
  const auto plan = detail::make_hit_plan(E, F.ambient_dim, res, hopt, false);
  const std::size_t d = plan.d;

  std::vector<std::optional<DimReport>> dims(n_paths);
  std::vector<char> hit(n_paths, 0);
  parallel_for(n_paths, opt.threads, [&](std::size_t p) {
    std::vector<std::vector<double>> pts;
    std::vector<double> w(d, 0.0);
    auto keep = [&](std::span<const double> x) {
      if (set_distance(F, x, epsilon) < epsilon) pts.emplace_back(x.begin(), x.end());
    };
    if (plan.engine == HitEngine::Sequential) {
      Rng rng(derive_seed(seed, p));
      double prev = 0.0;
      for (double t : plan.times) {
        const double sd = std::sqrt(t - prev);
        prev = t;
        for (auto& v : w) v += sd * rng.normal();
        keep(w);
      }
    } else {
      const auto path = sample_sheet(plan.lattice, d, derive_seed(seed, p));
      for (std::size_t lin : plan.lins) keep(std::span<const double>(path.at(lin), d));
    }
    hit[p] = !pts.empty();
    if (pts.size() < opt.min_points) return;
    auto rep = box_dimension(pts, box);
    if (!rep.degenerate) dims[p] = std::move(rep);
  });

  for (std::size_t p = 0; p < n_paths; ++p) {
    st.n_hitting += hit[p] ? 1 : 0;
    if (!dims[p]) continue;
    st.path_ids.push_back(p);
    st.ess_sup_estimate = std::max(st.ess_sup_estimate, dims[p]->estimate);
    st.per_path_dims.push_back(std::move(*dims[p]));
  }
  st.no_hits = st.n_hitting == 0;
  return st;
}

/// CSV: path_id, dim_estimate.
inline void write_intersection_dim_csv(std::ostream& os, const IntersectionDimStat& st) {
  os << "path_id,dim_estimate\n";
  os.precision(17);
  for (std::size_t i = 0; i < st.path_ids.size(); ++i)
    os << st.path_ids[i] << ',' << st.per_path_dims[i].estimate << '\n';
}

// ---------------------------------------------------------------------------
// Codimension probe

struct CodimensionOptions {
  double epsilon = 1.0 / 128.0;
  /// G = [0, M]^n minus [0, m)^n.
  double m = 0.5;
  double M = 1.0;
  /// Parameter-lattice resolution of W; 0 selects epsilon^2 / 4.
  double resolution = 0.0;
  /// Grid step of X per axis; 0 selects (epsilon / 4)^alpha.
  double stable_step = 0.0;
  unsigned threads = 1;
  std::size_t max_lattice_points = std::size_t{1} << 24;
  RefinementSchedule schedule = parabolic_schedule(1.0 / 3.0, 1.0 / 3.0, 6, 1.0 / 32.0);
  CapacityOptions capacity;
  TrendOptions trend;
  DiscretizeOptions discretize;
};

struct CodimensionResult {
  double hit_rate = 0.0;
  std::size_t hits = 0;
  std::size_t n_paths = 0;
  double wilson_halfwidth = 0.0;
  /// Thermal capacity trend at gamma = d - alpha n is positive.
  bool riesz_positive = false;
  double gamma = 0.0;
  RefinementStudy study;
};

/// Frequency of W(E) meeting both F^eps and X(G)^eps at a common lattice
/// image point, for W and an independent additive stable X coupled by path
/// index, together with the thermal capacity trend at gamma = d - alpha n.
inline CodimensionResult codimension_probe(const SetSpec& E, const SetSpec& F, double alpha, int n,
                                           std::size_t n_paths, std::uint64_t seed,
                                           const CodimensionOptions& opt = {}) {
  require(alpha > 0.0 && alpha < 2.0, ErrorKind::InvalidConfig, "alpha must lie in (0, 2)");
  require(n >= 1, ErrorKind::InvalidConfig, "n must be positive");
  const std::size_t d = F.ambient_dim;
  const double gamma = static_cast<double>(d) - alpha * n;
  require(gamma > 0.0, ErrorKind::InvalidConfig, "codimension probe needs d - alpha n > 0");
  require(0.0 <= opt.m && opt.m < opt.M, ErrorKind::InvalidConfig, "need 0 <= m < M");
  require(opt.epsilon > 0.0, ErrorKind::InvalidConfig, "epsilon must be positive");
  require(n_paths >= 1, ErrorKind::InvalidConfig, "need at least one path");
  E.validate();
  F.validate();
  const double eps = opt.epsilon;
  const double limit = eps * eps / 4.0;
  const double res = opt.resolution > 0.0 ? opt.resolution : limit;
  require(res <= limit * (1.0 + 1e-12), ErrorKind::InvalidConfig, "lattice resolution must be at most epsilon^2 / 4");
  const double step = opt.stable_step > 0.0 ? opt.stable_step : std::pow(eps / 4.0, alpha);

  CodimensionResult out;
  out.n_paths = n_paths;
  out.gamma = gamma;
  if (is_empty_set(F)) {
    out.wilson_halfwidth = wilson_interval(0, n_paths).second;
    return out;
  }
  out.study = capacity_refinement_study(E, F, gamma, opt.schedule, opt.capacity, {}, opt.trend);
  out.riesz_positive = out.study.trend.trend == CapacityTrend::Positive;
  {
    HitOptions hopt;
    hopt.max_lattice_points = opt.max_lattice_points;
    hopt.discretize = opt.discretize;
    const auto plan = detail::make_hit_plan(E, d, res, hopt, false);
    std::vector<double> axis;
    for (std::size_t i = 0;; ++i) {
      const double u = std::min(opt.M, step * static_cast<double>(i));
      axis.push_back(u);
      if (u >= opt.M) break;
    }
    const std::vector<std::vector<double>> u_grid(static_cast<std::size_t>(n), axis);
    double g_total = std::pow(static_cast<double>(axis.size()), n);
    require(g_total <= static_cast<double>(opt.max_lattice_points), ErrorKind::ResourceLimit,
            "stable grid has too many points");

    std::vector<char> hit(n_paths, 0);
    parallel_for(n_paths, opt.threads, [&](std::size_t p) {
      // W points in F^eps.
      std::vector<double> cand;
      std::vector<double> w(d, 0.0);
      auto keep = [&](std::span<const double> x) {
        if (set_distance(F, x, eps) < eps) cand.insert(cand.end(), x.begin(), x.end());
      };
      if (plan.engine == HitEngine::Sequential) {
        Rng rng(derive_seed(seed, p));
        double prev = 0.0;
        for (double t : plan.times) {
          const double sd = std::sqrt(t - prev);
          prev = t;
          for (auto& v : w) v += sd * rng.normal();
          keep(w);
        }
      } else {
        const auto path = sample_sheet(plan.lattice, d, derive_seed(seed, p));
        for (std::size_t lin : plan.lins) keep(std::span<const double>(path.at(lin), d));
      }
      if (cand.empty()) return;
      // X(G), sorted by first coordinate for the window search.
      const auto xp = sample_additive_stable(u_grid, d, alpha, derive_seed(~seed, p));
      const auto vals = xp.values();
      std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
      std::vector<const double*> xs;
      for (std::size_t lin = 0; lin * d < vals.size(); ++lin) {
        bool outside = false;
        for (std::size_t k = 0; k < idx.size(); ++k) outside = outside || axis[idx[k]] >= opt.m;
        if (outside) xs.push_back(vals.data() + lin * d);
        for (std::size_t k = idx.size(); k-- > 0;) {
          if (++idx[k] < axis.size()) break;
          idx[k] = 0;
        }
      }
      std::sort(xs.begin(), xs.end(), [](const double* a, const double* b) { return a[0] < b[0]; });
      for (std::size_t c = 0; c * d < cand.size() && !hit[p]; ++c) {
        const double* y = cand.data() + c * d;
        auto it = std::lower_bound(xs.begin(), xs.end(), y[0] - eps,
                                   [](const double* a, double v) { return a[0] < v; });
        for (; it != xs.end() && (*it)[0] < y[0] + eps; ++it) {
          double r2 = 0.0;
          for (std::size_t a = 0; a < d; ++a) r2 += ((*it)[a] - y[a]) * ((*it)[a] - y[a]);
          if (r2 < eps * eps) {
            hit[p] = 1;
            break;
          }
        }
      }
    });
    for (char h : hit) out.hits += h ? 1 : 0;
  }
  out.hit_rate = static_cast<double>(out.hits) / static_cast<double>(n_paths);
  out.wilson_halfwidth = wilson_interval(out.hits, n_paths).second;
  return out;
}

}  // namespace thermocap
