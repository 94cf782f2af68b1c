#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "thermocap/error.hpp"
#include "thermocap/rng.hpp"

namespace thermocap {

// ---------------------------------------------------------------------------
// Box counting
// ---------------------------------------------------------------------------

enum class Metric { Euclidean, Parabolic };

struct DimReport {
  double estimate = 0.0;
  std::vector<std::pair<double, std::size_t>> scales_used;  // (scale, count)
  double fit_r2 = 0.0;
  bool degenerate = false;
};

struct BoxCountOptions {
  Metric metric = Metric::Euclidean;
  /// Number of leading coordinates that are time axes (parabolic metric only).
  std::size_t time_dim = 0;
  /// Scales r = 2^-k for k in [k_min, k_max].
  int k_min = 3;
  int k_max = 12;
  std::size_t min_points = 1000;
  /// Scales whose count exceeds distinct_points * saturation are dropped as
  /// sample-limited.
  double saturation = 0.25;
  /// Each count is the minimum over this many grids shifted diagonally by
  /// multiples of side / grid_offsets; reduces straddle bias for small sets.
  std::size_t grid_offsets = 1;
};

namespace detail {

inline std::uint64_t hash_cell(const std::vector<std::int64_t>& idx) {
  std::uint64_t h = 0x8a5cd789635d2dffULL;
  for (auto v : idx) h = mix64(h ^ static_cast<std::uint64_t>(v));
  return h;
}

inline std::size_t count_distinct(std::vector<std::uint64_t>& keys) {
  std::sort(keys.begin(), keys.end());
  return static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
}

}  // namespace detail

/// Least-squares slope of log(count) against log(1/r) over occupied grid
/// boxes. Parabolic boxes have side r^2 on time axes and r on space axes.
/// The estimate is clamped to [0, ambient dimension].
inline DimReport box_dimension(const std::vector<std::vector<double>>& points, const BoxCountOptions& opt = {}) {
  require(points.size() >= opt.min_points, ErrorKind::InvalidInput,
          "box counting needs at least " + std::to_string(opt.min_points) + " points");
  require(opt.k_min < opt.k_max, ErrorKind::InvalidInput, "scale schedule needs k_min < k_max");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) require(p.size() == dim, ErrorKind::InvalidInput, "points have mixed dimensions");
  require(opt.metric == Metric::Euclidean || opt.time_dim <= dim, ErrorKind::InvalidInput,
          "time_dim exceeds point dimension");

  double ambient = static_cast<double>(dim);
  if (opt.metric == Metric::Parabolic) ambient += static_cast<double>(opt.time_dim);

  std::vector<std::uint64_t> keys(points.size());
  std::vector<std::int64_t> idx(dim);
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (std::size_t a = 0; a < dim; ++a) idx[a] = std::bit_cast<std::int64_t>(points[p][a] + 0.0);
    keys[p] = detail::hash_cell(idx);
  }
  const std::size_t distinct = detail::count_distinct(keys);

  DimReport rep;
  if (distinct <= 1) {
    rep.degenerate = true;
    return rep;
  }

  for (int k = opt.k_min; k <= opt.k_max; ++k) {
    const double r = std::ldexp(1.0, -k);
    std::size_t c = points.size();
    for (std::size_t j = 0; j < std::max<std::size_t>(opt.grid_offsets, 1); ++j) {
      const double shift = static_cast<double>(j) / static_cast<double>(std::max<std::size_t>(opt.grid_offsets, 1));
      for (std::size_t p = 0; p < points.size(); ++p) {
        for (std::size_t a = 0; a < dim; ++a) {
          const bool time_axis = opt.metric == Metric::Parabolic && a < opt.time_dim;
          const double side = time_axis ? r * r : r;
          idx[a] = static_cast<std::int64_t>(std::floor(points[p][a] / side + shift));
        }
        keys[p] = detail::hash_cell(idx);
      }
      c = std::min(c, detail::count_distinct(keys));
    }
    if (static_cast<double>(c) > opt.saturation * static_cast<double>(distinct)) break;
    rep.scales_used.emplace_back(r, c);
  }

  if (rep.scales_used.size() < 2) {
    rep.degenerate = true;
    return rep;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const double m = static_cast<double>(rep.scales_used.size());
  for (const auto& [r, c] : rep.scales_used) {
    const double x = std::log(1.0 / r), y = std::log(static_cast<double>(c));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double vx = sxx - sx * sx / m, vy = syy - sy * sy / m, cxy = sxy - sx * sy / m;
  const double slope = cxy / vx;
  rep.estimate = std::clamp(slope, 0.0, ambient);
  rep.fit_r2 = vy > 0.0 ? std::clamp(cxy * cxy / (vx * vy), 0.0, 1.0) : 1.0;
  return rep;
}

/// CSV: scale, count.
inline void write_dim_csv(std::ostream& os, const DimReport& rep) {
  os << "scale,count\n";
  os.precision(17);
  for (const auto& [r, c] : rep.scales_used) os << r << ',' << c << '\n';
}

// ---------------------------------------------------------------------------
// Closed-form relations
// ---------------------------------------------------------------------------

struct DimBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Bounds on the parabolic Hausdorff dimension of E x F:
/// dimH F + 2 dimH E <= dim <= min{dimH F + 2 dimP E, dimP F + 2 dimH E}.
inline DimBounds product_dim_bounds(double dimH_E, double dimP_E, double dimH_F, double dimP_F) {
  require(0.0 <= dimH_E && dimH_E <= dimP_E, ErrorKind::InvalidInput, "need 0 <= dimH E <= dimP E");
  require(0.0 <= dimH_F && dimH_F <= dimP_F, ErrorKind::InvalidInput, "need 0 <= dimH F <= dimP F");
  return {dimH_F + 2.0 * dimH_E, std::min(dimH_F + 2.0 * dimP_E, dimP_F + 2.0 * dimH_E)};
}

struct GammaStarBracket {
  double lower = 0.0;
  double upper = 0.0;
  std::optional<double> closed_form;
};

/// Bracket for gamma* = sup{gamma : C_gamma(E x F) > 0}. Both ends are
/// floored at 0 since gamma* is a supremum over gamma > 0.
inline GammaStarBracket gamma_star_bracket(double dimH_E, double dimH_F, double dim_rho, int d) {
  GammaStarBracket b;
  if (dim_rho <= static_cast<double>(d)) return b;
  b.lower = std::max(0.0, std::min(dimH_F, dimH_F + 2.0 * dimH_E - d));
  b.upper = std::max(0.0, std::min(dimH_F, dim_rho - d));
  return b;
}

/// max{0, dimH F + min{0, 2 dimH E - d}}; valid when one factor has equal
/// Hausdorff and packing dimensions.
inline double gamma_star_closed_form(double dimH_E, double dimH_F, int d) {
  return std::max(0.0, dimH_F + std::min(0.0, 2.0 * dimH_E - d));
}

enum class Dichotomy { Hits, NoHit, Critical };

inline const char* to_string(Dichotomy v) {
  switch (v) {
    case Dichotomy::Hits: return "Hits";
    case Dichotomy::NoHit: return "NoHit";
    case Dichotomy::Critical: return "Critical";
  }
  return "?";
}

inline Dichotomy hit_dichotomy(double dim_rho, int d, double tol = 1e-12) {
  if (dim_rho > d + tol) return Dichotomy::Hits;
  if (dim_rho < d - tol) return Dichotomy::NoHit;
  return Dichotomy::Critical;
}

/// Almost-sure-supremum dimension of W(E) cap F: min{d, 2 dimH E} when F has
/// positive Lebesgue measure, otherwise max{0, dim_rho - d}, valid for d >= 2N.
inline double intersection_dim_formula(double dim_rho, int d, double dimH_E, bool F_has_positive_lebesgue, int N) {
  if (F_has_positive_lebesgue) return std::min(static_cast<double>(d), 2.0 * dimH_E);
  require(d >= 2 * N, ErrorKind::Unsupported, "intersection dimension formula needs d >= 2N");
  return std::max(0.0, dim_rho - d);
}

}  // namespace thermocap
