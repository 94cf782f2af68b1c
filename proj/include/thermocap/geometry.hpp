#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "thermocap/error.hpp"
#include "thermocap/rng.hpp"

namespace thermocap {

// ---------------------------------------------------------------------------
// Points
// ---------------------------------------------------------------------------

/// A point of the time domain R^N_+.
struct TimePoint {
  std::vector<double> coords;
  std::size_t dim() const noexcept { return coords.size(); }
  friend bool operator==(const TimePoint&, const TimePoint&) = default;
};

/// A point of the state space R^d.
struct SpacePoint {
  std::vector<double> coords;
  std::size_t dim() const noexcept { return coords.size(); }
  friend bool operator==(const SpacePoint&, const SpacePoint&) = default;
};

/// A point of the product space R^N x R^d.
struct ParabolicPoint {
  TimePoint time;
  SpacePoint space;
};

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::InvalidInput, "dimension mismatch in distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double euclidean_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

/// max{ |s - t|^{1/2}, |x - y| }
inline double parabolic_distance(const ParabolicPoint& p, const ParabolicPoint& q) {
  require(p.time.dim() == q.time.dim(), ErrorKind::InvalidInput, "time dimension mismatch");
  require(p.space.dim() == q.space.dim(), ErrorKind::InvalidInput, "space dimension mismatch");
  const double dt = euclidean_distance(p.time.coords, q.time.coords);
  const double dx = euclidean_distance(p.space.coords, q.space.coords);
  return std::max(std::sqrt(dt), dx);
}

// ---------------------------------------------------------------------------
// Set specifications
// ---------------------------------------------------------------------------

struct IntervalBox {
  std::vector<double> lo;
  std::vector<double> hi;
};

/// Finite-depth attractor of x -> ratio * x + offset_i on [0,1]^dim, placed
/// at origin + scale * K. The depth-D set is the union of the m^D cylinder
/// cubes of side scale * ratio^D.
struct SelfSimilarIFS {
  double ratio = 0.5;
  std::vector<std::vector<double>> offsets;
  int depth = 0;
  std::vector<double> origin;
  double scale = 1.0;
};

struct Ball {
  std::vector<double> center;
  double radius = 0.0;
};

struct PointCloud {
  std::vector<std::vector<double>> points;
};

struct SetSpec;

struct UnionSet {
  std::vector<SetSpec> members;
};

struct SetSpec {
  using Kind = std::variant<IntervalBox, SelfSimilarIFS, Ball, PointCloud, UnionSet>;

  Kind kind;
  std::size_t ambient_dim = 1;

  static SetSpec box(std::vector<double> lo, std::vector<double> hi) {
    SetSpec s{IntervalBox{std::move(lo), std::move(hi)}, 0};
    s.ambient_dim = std::get<IntervalBox>(s.kind).lo.size();
    s.validate();
    return s;
  }

  static SetSpec interval(double lo, double hi) { return box({lo}, {hi}); }

  static SetSpec ifs(double ratio, std::vector<std::vector<double>> offsets, int depth,
                     std::vector<double> origin, double scale = 1.0) {
    const std::size_t dim = origin.size();
    SetSpec s{SelfSimilarIFS{ratio, std::move(offsets), depth, std::move(origin), scale}, dim};
    s.validate();
    return s;
  }

  /// One-dimensional Cantor set with m evenly spaced branches on
  /// [origin, origin + scale].
  static SetSpec cantor(double ratio, int branches, int depth, double origin = 0.0, double scale = 1.0) {
    std::vector<std::vector<double>> offsets;
    for (int i = 0; i < branches; ++i) {
      const double o = branches == 1 ? 0.0 : (1.0 - ratio) * i / (branches - 1);
      offsets.push_back({o});
    }
    return ifs(ratio, std::move(offsets), depth, {origin}, scale);
  }

  static SetSpec ball(std::vector<double> center, double radius) {
    const std::size_t dim = center.size();
    SetSpec s{Ball{std::move(center), radius}, dim};
    s.validate();
    return s;
  }

  static SetSpec points(std::vector<std::vector<double>> pts, std::size_t dim) {
    SetSpec s{PointCloud{std::move(pts)}, dim};
    s.validate();
    return s;
  }

  static SetSpec point(std::vector<double> x) {
    const std::size_t dim = x.size();
    return points({std::move(x)}, dim);
  }

  static SetSpec union_of(std::vector<SetSpec> members) {
    require(!members.empty(), ErrorKind::InvalidInput, "union needs at least one member");
    const std::size_t dim = members.front().ambient_dim;
    SetSpec s{UnionSet{std::move(members)}, dim};
    s.validate();
    return s;
  }

  void validate() const;

  friend bool operator==(const SetSpec& a, const SetSpec& b);
};

inline bool operator==(const IntervalBox& a, const IntervalBox& b) { return a.lo == b.lo && a.hi == b.hi; }
inline bool operator==(const SelfSimilarIFS& a, const SelfSimilarIFS& b) {
  return a.ratio == b.ratio && a.offsets == b.offsets && a.depth == b.depth && a.origin == b.origin &&
         a.scale == b.scale;
}
inline bool operator==(const Ball& a, const Ball& b) { return a.center == b.center && a.radius == b.radius; }
inline bool operator==(const PointCloud& a, const PointCloud& b) { return a.points == b.points; }
inline bool operator==(const UnionSet& a, const UnionSet& b) { return a.members == b.members; }
inline bool operator==(const SetSpec& a, const SetSpec& b) {
  return a.ambient_dim == b.ambient_dim && a.kind == b.kind;
}

inline void SetSpec::validate() const {
  require(ambient_dim >= 1, ErrorKind::InvalidInput, "ambient dimension must be positive");
  auto check_dim = [&](std::size_t n, const char* what) {
    require(n == ambient_dim, ErrorKind::InvalidInput, std::string(what) + " has wrong dimension");
  };
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IntervalBox>) {
          check_dim(k.lo.size(), "box lower corner");
          check_dim(k.hi.size(), "box upper corner");
          for (std::size_t i = 0; i < ambient_dim; ++i)
            require(k.lo[i] < k.hi[i], ErrorKind::InvalidInput, "box needs lo < hi on every axis");
        } else if constexpr (std::is_same_v<T, SelfSimilarIFS>) {
          require(k.ratio > 0.0 && k.ratio < 1.0, ErrorKind::InvalidInput, "IFS ratio must lie in (0,1)");
          require(!k.offsets.empty(), ErrorKind::InvalidInput, "IFS needs at least one branch");
          require(k.depth >= 0, ErrorKind::InvalidInput, "IFS depth must be nonnegative");
          require(k.scale > 0.0, ErrorKind::InvalidInput, "IFS scale must be positive");
          check_dim(k.origin.size(), "IFS origin");
          const double tol = 1e-12;
          for (const auto& o : k.offsets) {
            check_dim(o.size(), "IFS offset");
            for (double v : o)
              require(v >= -tol && v <= 1.0 - k.ratio + tol, ErrorKind::InvalidInput,
                      "IFS offsets must keep images inside the unit cube");
          }
          // First-level images must have pairwise disjoint interiors.
          for (std::size_t i = 0; i < k.offsets.size(); ++i)
            for (std::size_t j = i + 1; j < k.offsets.size(); ++j) {
              bool separated = false;
              for (std::size_t a = 0; a < ambient_dim; ++a)
                if (std::abs(k.offsets[i][a] - k.offsets[j][a]) >= k.ratio - tol) separated = true;
              require(separated, ErrorKind::InvalidInput, "IFS first-level images overlap");
            }
        } else if constexpr (std::is_same_v<T, Ball>) {
          check_dim(k.center.size(), "ball center");
          require(k.radius > 0.0, ErrorKind::InvalidInput, "ball radius must be positive");
        } else if constexpr (std::is_same_v<T, PointCloud>) {
          for (const auto& p : k.points) check_dim(p.size(), "point");
        } else {
          require(!k.members.empty(), ErrorKind::InvalidInput, "union needs at least one member");
          for (const auto& m : k.members) {
            check_dim(m.ambient_dim, "union member");
            m.validate();
          }
        }
      },
      kind);
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

/// A cell of a finite cover: every point of the cell lies within
/// half_diameter of the representative, and the representative lies in the set.
struct Cell {
  std::vector<double> rep;
  double half_diameter = 0.0;
};

struct DiscretizeOptions {
  double atom_radius = 1e-6;
  std::size_t max_cells = 2'000'000;
};

/// Lower corners of the depth-D cylinder cubes, in address order, and their side.
inline std::pair<std::vector<std::vector<double>>, double> ifs_cylinders(const SelfSimilarIFS& k,
                                                                          std::size_t max_cells) {
  const std::size_t dim = k.origin.size();
  const double count = std::pow(static_cast<double>(k.offsets.size()), k.depth);
  require(count <= static_cast<double>(max_cells), ErrorKind::ResourceLimit,
          "IFS depth produces too many cylinders");
  std::vector<std::vector<double>> corners{std::vector<double>(dim, 0.0)};
  double width = 1.0;
  for (int level = 0; level < k.depth; ++level) {
    std::vector<std::vector<double>> next;
    next.reserve(corners.size() * k.offsets.size());
    for (const auto& c : corners)
      for (const auto& o : k.offsets) {
        std::vector<double> p(dim);
        for (std::size_t a = 0; a < dim; ++a) p[a] = c[a] + width * o[a];
        next.push_back(std::move(p));
      }
    corners = std::move(next);
    width *= k.ratio;
  }
  for (auto& c : corners)
    for (std::size_t a = 0; a < dim; ++a) c[a] = k.origin[a] + k.scale * c[a];
  return {std::move(corners), k.scale * width};
}

namespace detail {

inline std::size_t cells_per_axis(double width, double resolution) {
  return static_cast<std::size_t>(std::max(1.0, std::ceil(width / resolution - 1e-9)));
}

// Uniform subdivision of an axis-aligned box; cells in lexicographic order
// with the first axis varying slowest.
inline void subdivide_box(const std::vector<double>& lo, const std::vector<double>& hi, double resolution,
                          std::size_t max_cells, std::vector<Cell>& out) {
  const std::size_t dim = lo.size();
  std::vector<std::size_t> n(dim);
  std::vector<double> w(dim);
  double total = 1.0;
  for (std::size_t a = 0; a < dim; ++a) {
    n[a] = cells_per_axis(hi[a] - lo[a], resolution);
    w[a] = (hi[a] - lo[a]) / static_cast<double>(n[a]);
    total *= static_cast<double>(n[a]);
  }
  require(total + static_cast<double>(out.size()) <= static_cast<double>(max_cells), ErrorKind::ResourceLimit,
          "discretization exceeds the cell cap");
  double hd = 0.0;
  for (double v : w) hd += v * v;
  hd = 0.5 * std::sqrt(hd);
  std::vector<std::size_t> idx(dim, 0);
  for (std::size_t c = 0; c < static_cast<std::size_t>(total); ++c) {
    Cell cell;
    cell.rep.resize(dim);
    for (std::size_t a = 0; a < dim; ++a) cell.rep[a] = lo[a] + w[a] * (static_cast<double>(idx[a]) + 0.5);
    cell.half_diameter = hd;
    out.push_back(std::move(cell));
    for (std::size_t a = dim; a-- > 0;) {
      if (++idx[a] < n[a]) break;
      idx[a] = 0;
    }
  }
}

inline void discretize_into(const SetSpec& spec, double resolution, const DiscretizeOptions& opt,
                            std::vector<Cell>& out) {
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IntervalBox>) {
          subdivide_box(k.lo, k.hi, resolution, opt.max_cells, out);
        } else if constexpr (std::is_same_v<T, SelfSimilarIFS>) {
          auto [corners, width] = ifs_cylinders(k, opt.max_cells);
          for (const auto& c : corners) {
            std::vector<double> hi(c);
            for (double& v : hi) v += width;
            subdivide_box(c, hi, resolution, opt.max_cells, out);
          }
        } else if constexpr (std::is_same_v<T, Ball>) {
          const std::size_t dim = k.center.size();
          std::vector<double> lo(dim), hi(dim);
          for (std::size_t a = 0; a < dim; ++a) {
            lo[a] = k.center[a] - k.radius;
            hi[a] = k.center[a] + k.radius;
          }
          std::vector<Cell> grid;
          subdivide_box(lo, hi, resolution, opt.max_cells, grid);
          const double w = 2.0 * k.radius / static_cast<double>(cells_per_axis(2.0 * k.radius, resolution));
          for (auto& cell : grid) {
            // Keep cubes meeting the ball; pull the representative into the ball.
            double gap2 = 0.0;
            for (std::size_t a = 0; a < dim; ++a) {
              const double q = std::clamp(k.center[a], cell.rep[a] - 0.5 * w, cell.rep[a] + 0.5 * w);
              gap2 += (q - k.center[a]) * (q - k.center[a]);
            }
            if (gap2 > k.radius * k.radius) continue;
            const double r = euclidean_distance(cell.rep, k.center);
            std::vector<double> rep = cell.rep;
            if (r > k.radius)
              for (std::size_t a = 0; a < dim; ++a) rep[a] = k.center[a] + (rep[a] - k.center[a]) * k.radius / r;
            double far2 = 0.0;
            for (std::size_t a = 0; a < dim; ++a) {
              const double e = std::max(std::abs(rep[a] - (cell.rep[a] - 0.5 * w)), std::abs(rep[a] - (cell.rep[a] + 0.5 * w)));
              far2 += e * e;
            }
            out.push_back(Cell{std::move(rep), std::sqrt(far2)});
          }
        } else if constexpr (std::is_same_v<T, PointCloud>) {
          require(out.size() + k.points.size() <= opt.max_cells, ErrorKind::ResourceLimit,
                  "discretization exceeds the cell cap");
          for (const auto& p : k.points) out.push_back(Cell{p, opt.atom_radius});
        } else {
          for (const auto& m : k.members) discretize_into(m, resolution, opt, out);
        }
      },
      spec.kind);
}

}  // namespace detail

/// Finite cover of the set by cells of width at most `resolution` per axis.
/// Representatives are cell midpoints (pulled into the set for balls);
/// point atoms get opt.atom_radius. Deterministic.
inline std::vector<Cell> discretize_set(const SetSpec& spec, double resolution, const DiscretizeOptions& opt = {}) {
  require(resolution > 0.0 && std::isfinite(resolution), ErrorKind::InvalidInput, "resolution must be positive");
  require(opt.atom_radius > 0.0, ErrorKind::InvalidInput, "atom radius must be positive");
  spec.validate();
  std::vector<Cell> out;
  detail::discretize_into(spec, resolution, opt, out);
  return out;
}

/// Copy of the set spec with every IFS depth lowered to the smallest depth whose
/// cylinders have side at most `resolution` (never raised).
inline SetSpec at_resolution(const SetSpec& spec, double resolution) {
  require(resolution > 0.0, ErrorKind::InvalidInput, "resolution must be positive");
  SetSpec out = spec;
  if (auto* k = std::get_if<SelfSimilarIFS>(&out.kind)) {
    int depth = 0;
    double width = k->scale;
    while (depth < k->depth && width > resolution * (1.0 + 1e-9)) {
      width *= k->ratio;
      ++depth;
    }
    k->depth = depth;
  } else if (auto* u = std::get_if<UnionSet>(&out.kind)) {
    for (auto& m : u->members) m = at_resolution(m, resolution);
  }
  return out;
}

/// Axis-aligned bounding box [lo, hi] of the set; empty clouds give lo > hi.
inline std::pair<std::vector<double>, std::vector<double>> bounding_box(const SetSpec& spec) {
  const std::size_t dim = spec.ambient_dim;
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  auto absorb = [&](const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < dim; ++i) {
      lo[i] = std::min(lo[i], a[i]);
      hi[i] = std::max(hi[i], b[i]);
    }
  };
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IntervalBox>) {
          absorb(k.lo, k.hi);
        } else if constexpr (std::is_same_v<T, SelfSimilarIFS>) {
          // The attractor lies in the convex hull of the branch fixed points,
          // which is inside origin + scale * [0,1]^dim; tighten via cylinders
          // of depth min(depth, 4).
          SelfSimilarIFS shallow = k;
          shallow.depth = std::min(k.depth, 4);
          auto [corners, width] = ifs_cylinders(shallow, std::numeric_limits<std::size_t>::max());
          for (const auto& c : corners) {
            std::vector<double> h(c);
            for (double& v : h) v += width;
            absorb(c, h);
          }
        } else if constexpr (std::is_same_v<T, Ball>) {
          std::vector<double> a(k.center), b(k.center);
          for (std::size_t i = 0; i < dim; ++i) {
            a[i] -= k.radius;
            b[i] += k.radius;
          }
          absorb(a, b);
        } else if constexpr (std::is_same_v<T, PointCloud>) {
          for (const auto& p : k.points) absorb(p, p);
        } else {
          for (const auto& m : k.members) {
            auto [a, b] = bounding_box(m);
            if (a[0] <= b[0]) absorb(a, b);
          }
        }
      },
      spec.kind);
  return {lo, hi};
}

/// True when the set has no points (an empty cloud or a union of such).
inline bool is_empty_set(const SetSpec& spec) {
  auto [lo, hi] = bounding_box(spec);
  return !(lo[0] <= hi[0]);
}

/// Uniform-ish random sample of the set: uniform on boxes and balls, uniform
/// over cylinders then uniform inside for IFS sets, uniform over members of
/// clouds and unions.
inline std::vector<std::vector<double>> sample_set(const SetSpec& spec, std::size_t count, Rng& rng) {
  std::vector<std::vector<double>> out;
  out.reserve(count);
  const std::size_t dim = spec.ambient_dim;
  for (std::size_t n = 0; n < count; ++n) {
    const SetSpec* cur = &spec;
    while (auto* u = std::get_if<UnionSet>(&cur->kind)) cur = &u->members[rng.index(u->members.size())];
    std::vector<double> p(dim);
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, IntervalBox>) {
            for (std::size_t a = 0; a < dim; ++a) p[a] = rng.uniform(k.lo[a], k.hi[a]);
          } else if constexpr (std::is_same_v<T, SelfSimilarIFS>) {
            std::vector<double> c(dim, 0.0);
            double w = 1.0;
            for (int level = 0; level < k.depth; ++level) {
              const auto& o = k.offsets[rng.index(k.offsets.size())];
              for (std::size_t a = 0; a < dim; ++a) c[a] += w * o[a];
              w *= k.ratio;
            }
            for (std::size_t a = 0; a < dim; ++a) p[a] = k.origin[a] + k.scale * (c[a] + w * rng.uniform());
          } else if constexpr (std::is_same_v<T, Ball>) {
            double r2;
            do {
              r2 = 0.0;
              for (std::size_t a = 0; a < dim; ++a) {
                p[a] = rng.uniform(-1.0, 1.0);
                r2 += p[a] * p[a];
              }
            } while (r2 > 1.0);
            for (std::size_t a = 0; a < dim; ++a) p[a] = k.center[a] + k.radius * p[a];
          } else if constexpr (std::is_same_v<T, PointCloud>) {
            require(!k.points.empty(), ErrorKind::InvalidInput, "cannot sample an empty point cloud");
            p = k.points[rng.index(k.points.size())];
          }
        },
        cur->kind);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Product grids
// ---------------------------------------------------------------------------

struct GridOptions {
  DiscretizeOptions discretize;
  std::size_t max_pairs = 15000;
};

/// Cartesian discretization of E x F. Pairs are listed time-major, so all
/// pairs sharing a time cell (a "time slice") are contiguous.
struct ProductGrid {
  std::size_t time_dim = 0;
  std::size_t space_dim = 0;
  std::vector<Cell> time_cells;
  std::vector<Cell> space_cells;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  const Cell& time_of(std::size_t pair) const { return time_cells[pairs[pair].first]; }
  const Cell& space_of(std::size_t pair) const { return space_cells[pairs[pair].second]; }
};

inline ProductGrid build_product_grid(const SetSpec& E, const SetSpec& F, double time_resolution,
                                      double space_resolution, const GridOptions& opt = {}) {
  auto [lo, hi] = bounding_box(E);
  for (double v : lo) require(v > 0.0, ErrorKind::InvalidInput, "E must lie strictly inside (0, inf)^N");
  ProductGrid g;
  g.time_dim = E.ambient_dim;
  g.space_dim = F.ambient_dim;
  g.time_cells = discretize_set(E, time_resolution, opt.discretize);
  g.space_cells = discretize_set(F, space_resolution, opt.discretize);
  const double n = static_cast<double>(g.time_cells.size()) * static_cast<double>(g.space_cells.size());
  require(n <= static_cast<double>(opt.max_pairs), ErrorKind::ResourceLimit,
          "product grid has " + std::to_string(static_cast<std::uint64_t>(n)) + " pairs, cap is " +
              std::to_string(opt.max_pairs));
  g.pairs.reserve(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < g.time_cells.size(); ++i)
    for (std::size_t j = 0; j < g.space_cells.size(); ++j) g.pairs.emplace_back(i, j);
  return g;
}

// ---------------------------------------------------------------------------
// Closed-form dimensions
// ---------------------------------------------------------------------------

struct SetDimensions {
  double hausdorff = 0.0;
  double packing = 0.0;
};

/// Dimensions of the limit object described by a set spec: boxes and balls are
/// full-dimensional, clouds are 0-dimensional and self-similar sets under the
/// open set condition have log m / log(1/r) for both dimensions.
inline SetDimensions closed_form_dimensions(const SetSpec& spec) {
  return std::visit(
      [&](const auto& k) -> SetDimensions {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IntervalBox> || std::is_same_v<T, Ball>) {
          const double n = static_cast<double>(spec.ambient_dim);
          return {n, n};
        } else if constexpr (std::is_same_v<T, PointCloud>) {
          return {0.0, 0.0};
        } else if constexpr (std::is_same_v<T, SelfSimilarIFS>) {
          const double v = std::log(static_cast<double>(k.offsets.size())) / std::log(1.0 / k.ratio);
          return {v, v};
        } else {
          fail(ErrorKind::Unsupported, "no closed-form dimension for unions");
        }
      },
      spec.kind);
}

}  // namespace thermocap
