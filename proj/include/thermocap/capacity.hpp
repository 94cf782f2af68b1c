#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "thermocap/error.hpp"
#include "thermocap/geometry.hpp"
#include "thermocap/parallel.hpp"

namespace thermocap {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Kernel
// ---------------------------------------------------------------------------

/// Heat-type kernel e^{-dx^2/(2 dt)} / (dt^{d/2} dx^gamma) from the time gap
/// dt = |s - t| and the space gap dx = |x - y|.
inline double thermal_kernel_gaps(double dt, double dx, double gamma, int d) {
  if (dt <= 0.0) return dx > 0.0 ? 0.0 : kInfinity;
  const double time_part = std::exp(-0.5 * dx * dx / dt) / std::pow(dt, 0.5 * d);
  if (gamma == 0.0) return time_part;
  if (dx <= 0.0) return kInfinity;
  return time_part / std::pow(dx, gamma);
}

inline double thermal_kernel(std::span<const double> s, std::span<const double> t, std::span<const double> x,
                             std::span<const double> y, double gamma, int d) {
  require(gamma >= 0.0, ErrorKind::InvalidInput, "gamma must be nonnegative");
  require(static_cast<std::size_t>(d) == x.size(), ErrorKind::InvalidInput, "space dimension mismatch");
  return thermal_kernel_gaps(euclidean_distance(s, t), euclidean_distance(x, y), gamma, d);
}

inline double thermal_kernel(const TimePoint& s, const TimePoint& t, const SpacePoint& x, const SpacePoint& y,
                             double gamma, int d) {
  return thermal_kernel(s.coords, t.coords, x.coords, y.coords, gamma, d);
}

// ---------------------------------------------------------------------------
// Energy matrix
// ---------------------------------------------------------------------------

/// exclude: diagonal entries are 0.
/// cell_proxy: diagonal entries (and pairs sharing a time cell) use an
/// intra-cell displacement of one half-diameter.
enum class DiagonalPolicy { Exclude, CellProxy };

inline const char* to_string(DiagonalPolicy p) { return p == DiagonalPolicy::Exclude ? "exclude" : "cell_proxy"; }

/// Dense symmetric matrix over grid pairs plus the time-slice label of
/// each pair, which the mass caps act on.
struct EnergyMatrix {
  std::size_t n = 0;
  std::vector<double> entries;  // row-major n x n
  std::vector<std::size_t> slice;
  std::size_t n_slices = 0;
  double gamma = 0.0;
  DiagonalPolicy policy = DiagonalPolicy::CellProxy;

  double operator()(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries[i * n + j]; }
  const double* row(std::size_t i) const { return entries.data() + i * n; }

  /// Builds a matrix from raw entries with one slice per index.
  static EnergyMatrix from_entries(std::size_t n, std::vector<double> entries) {
    require(entries.size() == n * n, ErrorKind::InvalidInput, "entry count must be n*n");
    EnergyMatrix k;
    k.n = n;
    k.entries = std::move(entries);
    k.slice.resize(n);
    std::iota(k.slice.begin(), k.slice.end(), std::size_t{0});
    k.n_slices = n;
    return k;
  }
};

struct MatrixOptions {
  std::size_t max_pairs = 15000;
  unsigned threads = 1;
};

/// Kernel at representatives. Pairs sharing a space cell but not a time
/// cell use the space half-diameter as displacement, which keeps entries
/// between distinct time cells finite for gamma > 0.
inline EnergyMatrix build_energy_matrix(const ProductGrid& grid, double gamma, DiagonalPolicy policy,
                                        const MatrixOptions& opt = {}) {
  require(grid.size() > 0, ErrorKind::InvalidInput, "grid is empty");
  require(gamma >= 0.0, ErrorKind::InvalidInput, "gamma must be nonnegative");
  require(grid.size() <= opt.max_pairs, ErrorKind::ResourceLimit, "energy matrix exceeds the pair cap");
  const std::size_t n = grid.size();
  const int d = static_cast<int>(grid.space_dim);
  EnergyMatrix k;
  k.n = n;
  k.gamma = gamma;
  k.policy = policy;
  k.entries.assign(n * n, 0.0);
  k.slice.resize(n);
  for (std::size_t i = 0; i < n; ++i) k.slice[i] = grid.pairs[i].first;
  k.n_slices = grid.time_cells.size();

  // Time and space gaps depend only on cell indices; tabulate them once.
  const std::size_t nt = grid.time_cells.size(), ns = grid.space_cells.size();
  std::vector<double> dt(nt * nt), dx(ns * ns);
  for (std::size_t a = 0; a < nt; ++a)
    for (std::size_t b = 0; b < nt; ++b)
      dt[a * nt + b] = a == b ? 0.0 : euclidean_distance(grid.time_cells[a].rep, grid.time_cells[b].rep);
  for (std::size_t a = 0; a < ns; ++a)
    for (std::size_t b = 0; b < ns; ++b)
      dx[a * ns + b] = a == b ? 0.0 : euclidean_distance(grid.space_cells[a].rep, grid.space_cells[b].rep);

  parallel_for(n, opt.threads, [&](std::size_t i) {
    const auto [ti, si] = grid.pairs[i];
    for (std::size_t j = 0; j < n; ++j) {
      const auto [tj, sj] = grid.pairs[j];
      double gt = dt[ti * nt + tj];
      double gx = dx[si * ns + sj];
      if (i == j) {
        if (policy == DiagonalPolicy::Exclude) continue;
        gt = grid.time_cells[ti].half_diameter;
        gx = grid.space_cells[si].half_diameter;
      } else {
        if (ti == tj && policy == DiagonalPolicy::CellProxy) gt = grid.time_cells[ti].half_diameter;
        if (si == sj && ti != tj) gx = grid.space_cells[si].half_diameter;
      }
      k.entries[i * n + j] = thermal_kernel_gaps(gt, gx, gamma, d);
    }
  });
  return k;
}

// ---------------------------------------------------------------------------
// Measures and energy
// ---------------------------------------------------------------------------

struct DiscreteMeasure {
  std::vector<double> weights;

  std::size_t size() const noexcept { return weights.size(); }
};

/// Checks sum-to-one and the per-slice cap.
inline bool is_feasible(const DiscreteMeasure& mu, const EnergyMatrix& k, double slice_cap, double tol = 1e-12) {
  if (mu.size() != k.n) return false;
  double total = 0.0;
  std::vector<double> mass(k.n_slices, 0.0);
  for (std::size_t i = 0; i < k.n; ++i) {
    if (mu.weights[i] < -tol) return false;
    total += mu.weights[i];
    mass[k.slice[i]] += mu.weights[i];
  }
  if (std::abs(total - 1.0) > tol) return false;
  if (k.n_slices >= 2)
    for (double m : mass)
      if (m > slice_cap + tol) return false;
  return true;
}

/// w^T K w; +inf when a supported pair hits an infinite entry.
inline double thermal_energy(const DiscreteMeasure& mu, const EnergyMatrix& k) {
  require(mu.size() == k.n, ErrorKind::InvalidInput, "measure does not match the energy matrix");
  double e = 0.0;
  for (std::size_t i = 0; i < k.n; ++i) {
    if (mu.weights[i] == 0.0) continue;
    const double* r = k.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < k.n; ++j) {
      if (mu.weights[j] == 0.0) continue;
      if (std::isinf(r[j])) return kInfinity;
      acc += r[j] * mu.weights[j];
    }
    e += mu.weights[i] * acc;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Energy minimization
// ---------------------------------------------------------------------------

struct SolverOptions {
  double slice_cap = 0.5;
  double tol = 1e-8;
  std::size_t max_iters = 100000;
  /// Problems up to this size are started from the best stationary point
  /// over all faces of the feasible polytope, which is the global minimum.
  std::size_t exact_limit = 7;
};

struct MinimizeResult {
  DiscreteMeasure mu;
  double energy = 0.0;
  double gap = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// min(0.5, 1/sqrt(#slices)).
inline double default_slice_cap(std::size_t n_slices) {
  return std::min(0.5, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(n_slices, 1))));
}

namespace detail {

struct SliceView {
  std::vector<std::vector<std::size_t>> members;
  double cap = 1.0;  // effective cap (1 when there is a single slice)
};

inline SliceView make_slices(const EnergyMatrix& k, double slice_cap) {
  SliceView v;
  v.members.resize(k.n_slices);
  for (std::size_t i = 0; i < k.n; ++i) v.members[k.slice[i]].push_back(i);
  v.members.erase(std::remove_if(v.members.begin(), v.members.end(), [](const auto& m) { return m.empty(); }),
                  v.members.end());
  v.cap = v.members.size() >= 2 ? std::min(1.0, slice_cap) : 1.0;
  return v;
}

// Vertex of the capped simplex minimizing <c, v>: the cheapest entry of
// the cheapest slices receives cap each until the mass reaches one.
inline std::vector<double> lmo_vertex(const SliceView& sv, std::size_t n, const std::vector<double>& c,
                                      double* value = nullptr) {
  std::vector<std::pair<double, std::size_t>> best;
  best.reserve(sv.members.size());
  for (const auto& m : sv.members) {
    std::size_t arg = m.front();
    for (std::size_t i : m)
      if (c[i] < c[arg]) arg = i;
    best.emplace_back(c[arg], arg);
  }
  std::sort(best.begin(), best.end());
  std::vector<double> v(n, 0.0);
  double left = 1.0, val = 0.0;
  for (const auto& [ci, i] : best) {
    if (left <= 0.0) break;
    const double take = std::min(sv.cap, left);
    v[i] = take;
    val += take * ci;
    left -= take;
  }
  if (value) *value = val;
  return v;
}

struct LocalRun {
  std::vector<double> w;
  double energy;
  double gap;
  std::size_t iters;
  bool converged;
};

// Pairwise mass transfer between two coordinates with exact line search,
// picking the most violating feasible pair each step. Stops on FW gap.
inline LocalRun local_minimize(const EnergyMatrix& k, const SliceView& sv, std::vector<double> w,
                               const SolverOptions& opt) {
  const std::size_t n = k.n;
  const std::size_t ns = sv.members.size();
  std::vector<std::size_t> slice_of(n);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t i : sv.members[s]) slice_of[i] = s;

  std::vector<double> g(n, 0.0), mass(ns, 0.0);
  auto recompute = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const double* r = k.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (w[j] != 0.0) acc += r[j] * w[j];
      g[i] = 2.0 * acc;
    }
    std::fill(mass.begin(), mass.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) mass[slice_of[i]] += w[i];
  };
  recompute();
  auto energy_of = [&] {
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e += 0.5 * g[i] * w[i];
    return e;
  };

  const double cap = sv.cap;
  const double sat_tol = 1e-15;
  double gap = kInfinity;
  std::size_t it = 0;
  std::vector<double> a_val(ns), b_val(ns), order(ns);
  std::vector<std::size_t> a_idx(ns), b_idx(ns);
  for (; it < opt.max_iters; ++it) {
    if (it > 0 && it % 2000 == 0) recompute();
    // Per-slice extremes: largest gradient on the support, smallest overall.
    for (std::size_t s = 0; s < ns; ++s) {
      a_val[s] = -kInfinity;
      b_val[s] = kInfinity;
      for (std::size_t i : sv.members[s]) {
        if (w[i] > 0.0 && g[i] > a_val[s]) {
          a_val[s] = g[i];
          a_idx[s] = i;
        }
        if (g[i] < b_val[s]) {
          b_val[s] = g[i];
          b_idx[s] = i;
        }
      }
    }
    // Frank-Wolfe gap <g, w - v>.
    {
      // Only the ceil(1/cap) cheapest slices receive mass.
      order = b_val;
      const std::size_t used = std::min(ns, static_cast<std::size_t>(std::ceil(1.0 / cap - 1e-12)));
      std::nth_element(order.begin(), order.begin() + (used - 1), order.end());
      std::sort(order.begin(), order.begin() + used);
      double left = 1.0, lin = 0.0;
      for (std::size_t s = 0; s < used && left > 0.0; ++s) {
        const double take = std::min(cap, left);
        lin += take * order[s];
        left -= take;
      }
      double gw = 0.0;
      for (std::size_t i = 0; i < n; ++i) gw += g[i] * w[i];
      gap = gw - lin;
    }
    if (gap <= opt.tol) break;

    // Most violating pair (i loses mass, j gains).
    double best = 0.0;
    std::size_t bi = n, bj = n;
    for (std::size_t s = 0; s < ns; ++s)
      if (a_val[s] - b_val[s] > best) {
        best = a_val[s] - b_val[s];
        bi = a_idx[s];
        bj = b_idx[s];
      }
    std::size_t s1 = ns, s2 = ns;  // top two slices by a_val
    for (std::size_t s = 0; s < ns; ++s) {
      if (a_val[s] == -kInfinity) continue;
      if (s1 == ns || a_val[s] > a_val[s1]) {
        s2 = s1;
        s1 = s;
      } else if (s2 == ns || a_val[s] > a_val[s2]) {
        s2 = s;
      }
    }
    for (std::size_t s = 0; s < ns; ++s) {
      if (mass[s] >= cap - sat_tol) continue;
      const std::size_t src = s != s1 ? s1 : s2;
      if (src == ns) continue;
      if (a_val[src] - b_val[s] > best) {
        best = a_val[src] - b_val[s];
        bi = a_idx[src];
        bj = b_idx[s];
      }
    }
    if (bi == n) break;

    double step_max = w[bi];
    if (slice_of[bi] != slice_of[bj]) step_max = std::min(step_max, cap - mass[slice_of[bj]]);
    if (step_max <= 0.0) break;
    const double curv = k(bi, bi) + k(bj, bj) - 2.0 * k(bi, bj);
    double eta = curv > 0.0 ? std::min(step_max, best / (2.0 * curv)) : step_max;
    if (!(eta > 0.0)) break;
    const bool drain = eta >= w[bi];
    if (drain) eta = w[bi];
    const double* ri = k.row(bi);
    const double* rj = k.row(bj);
    for (std::size_t l = 0; l < n; ++l) g[l] += 2.0 * eta * (rj[l] - ri[l]);
    w[bj] += eta;
    w[bi] = drain ? 0.0 : w[bi] - eta;
    mass[slice_of[bj]] += eta;
    mass[slice_of[bi]] -= eta;
  }
  recompute();
  const double e = energy_of();
  return {std::move(w), e, gap, it, gap <= opt.tol};
}

// Solves a small dense system in place by Gaussian elimination with partial
// pivoting; false when (numerically) singular.
inline bool solve_dense(std::vector<double>& a, std::vector<double>& b, std::size_t m) {
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < m; ++r)
      if (std::abs(a[r * m + c]) > std::abs(a[piv * m + c])) piv = r;
    if (std::abs(a[piv * m + c]) < 1e-13) return false;
    if (piv != c) {
      for (std::size_t k = 0; k < m; ++k) std::swap(a[c * m + k], a[piv * m + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < m; ++r) {
      const double f = a[r * m + c] / a[c * m + c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < m; ++k) a[r * m + k] -= f * a[c * m + k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = m; c-- > 0;) {
    double v = b[c];
    for (std::size_t k = c + 1; k < m; ++k) v -= a[c * m + k] * b[k];
    b[c] = v / a[c * m + c];
  }
  return true;
}

// Enumerates faces (support set x set of slices held at the cap), solves
// the equality-constrained stationarity system on each and returns the
// feasible point of least energy. Exponential; for tiny problems only.
inline std::vector<double> best_face_point(const EnergyMatrix& k, const SliceView& sv) {
  const std::size_t n = k.n, ns = sv.members.size();
  std::vector<std::size_t> slice_of(n);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t i : sv.members[s]) slice_of[i] = s;
  std::vector<double> best;
  double best_e = kInfinity;
  for (std::uint64_t support = 1; support < (std::uint64_t{1} << n); ++support) {
    std::vector<std::size_t> idx;
    std::uint64_t touched = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (support >> i & 1) {
        idx.push_back(i);
        touched |= std::uint64_t{1} << slice_of[i];
      }
    const std::size_t t = idx.size();
    // Active cap sets range over subsets of the touched slices.
    for (std::uint64_t active = touched;; active = (active - 1) & touched) {
      std::vector<std::size_t> act;
      for (std::size_t s = 0; s < ns; ++s)
        if (active >> s & 1) act.push_back(s);
      const bool caps_used = ns >= 2 && sv.cap < 1.0;
      if (caps_used || act.empty()) {
        const std::size_t m = t + 1 + act.size();
        std::vector<double> a(m * m, 0.0), b(m, 0.0);
        for (std::size_t r = 0; r < t; ++r) {
          for (std::size_t c = 0; c < t; ++c) a[r * m + c] = 2.0 * k(idx[r], idx[c]);
          a[r * m + t] = a[t * m + r] = 1.0;
          for (std::size_t q = 0; q < act.size(); ++q)
            if (slice_of[idx[r]] == act[q]) a[r * m + t + 1 + q] = a[(t + 1 + q) * m + r] = 1.0;
        }
        b[t] = 1.0;
        for (std::size_t q = 0; q < act.size(); ++q) b[t + 1 + q] = sv.cap;
        if (solve_dense(a, b, m)) {
          std::vector<double> w(n, 0.0), mass(ns, 0.0);
          bool ok = true;
          for (std::size_t r = 0; r < t; ++r) {
            if (b[r] < -1e-12) ok = false;
            w[idx[r]] = std::max(0.0, b[r]);
            mass[slice_of[idx[r]]] += w[idx[r]];
          }
          if (ok && ns >= 2)
            for (double v : mass)
              if (v > sv.cap + 1e-12) ok = false;
          if (ok) {
            double sum = 0.0;
            for (double v : w) sum += v;
            for (double& v : w) v /= sum;
            double e = 0.0;
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < n; ++j) e += w[i] * k(i, j) * w[j];
            if (e < best_e) {
              best_e = e;
              best = w;
            }
          }
        }
      }
      if (active == 0) break;
    }
  }
  // Renormalization can push a slice a hair over the cap; pull it back.
  if (!best.empty() && ns >= 2) {
    std::vector<double> mass(ns, 0.0);
    for (std::size_t i = 0; i < n; ++i) mass[slice_of[i]] += best[i];
    for (std::size_t s = 0; s < ns; ++s)
      if (mass[s] > sv.cap) return {};
  }
  return best;
}

}  // namespace detail

/// Minimizes w^T K w over probability vectors whose per-slice mass is at
/// most slice_cap (ignored with a single slice). Nonconvex in general: the
/// result is a stationary point of a pairwise Frank-Wolfe descent from the
/// slice-uniform measure, except that problems of at most exact_limit pairs
/// also start from the global face-enumeration minimizer.
inline MinimizeResult minimize_energy(const EnergyMatrix& k, const SolverOptions& opt = {}) {
  require(k.n > 0, ErrorKind::InvalidInput, "energy matrix is empty");
  require(opt.slice_cap > 0.0, ErrorKind::InvalidInput, "slice cap must be positive");
  require(opt.tol > 0.0, ErrorKind::InvalidInput, "tolerance must be positive");
  for (double v : k.entries)
    require(std::isfinite(v) && v >= 0.0, ErrorKind::InvalidInput, "energy matrix must be finite and nonnegative");
  const auto sv = detail::make_slices(k, opt.slice_cap);
  require(static_cast<double>(sv.members.size()) * sv.cap >= 1.0 - 1e-12, ErrorKind::Infeasible,
          "slice cap leaves no feasible measure");

  std::vector<std::vector<double>> starts;
  {
    std::vector<double> w(k.n, 0.0);
    const double per_slice = 1.0 / static_cast<double>(sv.members.size());
    for (const auto& m : sv.members)
      for (std::size_t i : m) w[i] = per_slice / static_cast<double>(m.size());
    starts.push_back(std::move(w));
  }
  if (k.n <= opt.exact_limit) {
    auto w = detail::best_face_point(k, sv);
    if (!w.empty()) starts.push_back(std::move(w));
  }

  MinimizeResult best;
  best.energy = kInfinity;
  for (auto& s : starts) {
    auto run = detail::local_minimize(k, sv, std::move(s), opt);
    best.iterations += run.iters;
    if (run.energy < best.energy) {
      best.energy = run.energy;
      best.gap = run.gap;
      best.converged = run.converged;
      best.mu.weights = std::move(run.w);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Capacities
// ---------------------------------------------------------------------------

struct CapacityOptions {
  DiagonalPolicy policy = DiagonalPolicy::CellProxy;
  SolverOptions solver;
  /// Negative means default_slice_cap(#time cells).
  double slice_cap = -1.0;
  double divergence_threshold = 1e12;
  MatrixOptions matrix;
};

struct CapacityResult {
  double capacity = 0.0;
  double energy = 0.0;
  std::size_t n_pairs = 0;
  bool converged = false;
  MinimizeResult solution;
};

/// Entries that are infinite are clamped to this value before solving.
inline constexpr double kEnergyClamp = 1e15;

inline CapacityResult thermal_capacity(const ProductGrid& grid, double gamma, const CapacityOptions& opt = {}) {
  auto k = build_energy_matrix(grid, gamma, opt.policy, opt.matrix);
  for (double& v : k.entries)
    if (!(v <= kEnergyClamp)) v = kEnergyClamp;
  SolverOptions so = opt.solver;
  so.slice_cap = opt.slice_cap > 0.0 ? opt.slice_cap : default_slice_cap(k.n_slices);
  CapacityResult r;
  r.n_pairs = k.n;
  r.solution = minimize_energy(k, so);
  r.energy = r.solution.energy;
  r.converged = r.solution.converged;
  r.capacity = (r.energy > opt.divergence_threshold || r.energy <= 0.0) ? (r.energy <= 0.0 ? kInfinity : 0.0)
                                                                       : 1.0 / r.energy;
  return r;
}

/// Capacity for the kernel |x - y|^{-beta} on a finite point set: diagonal
/// excluded, each point capped at min(0.5, 1/sqrt(#points)); beta <= 0 uses
/// the constant kernel 1.
inline double riesz_capacity(const std::vector<std::vector<double>>& points, double beta,
                             const SolverOptions& base = {}) {
  require(!points.empty(), ErrorKind::InvalidInput, "riesz capacity needs at least one point");
  if (beta <= 0.0) return 1.0;
  const std::size_t n = points.size();
  if (n == 1) return 0.0;
  std::vector<double> e(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        const double r = euclidean_distance(points[i], points[j]);
        e[i * n + j] = r > 0.0 ? std::min(kEnergyClamp, std::pow(r, -beta)) : kEnergyClamp;
      }
  auto k = EnergyMatrix::from_entries(n, std::move(e));
  SolverOptions so = base;
  so.slice_cap = default_slice_cap(n);
  const auto r = minimize_energy(k, so);
  return r.energy > 0.0 ? 1.0 / r.energy : kInfinity;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// CSV: pair_index, time representative, space representative, weight.
inline void write_measure_csv(std::ostream& os, const ProductGrid& grid, const DiscreteMeasure& mu) {
  require(mu.size() == grid.size(), ErrorKind::InvalidInput, "measure does not match the grid");
  os << "pair_index";
  for (std::size_t a = 0; a < grid.time_dim; ++a) os << ",t" << a;
  for (std::size_t a = 0; a < grid.space_dim; ++a) os << ",x" << a;
  os << ",weight\n";
  os.precision(17);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << i;
    for (double v : grid.time_of(i).rep) os << ',' << v;
    for (double v : grid.space_of(i).rep) os << ',' << v;
    os << ',' << mu.weights[i] << '\n';
  }
}

/// CSV: row, col, entry (upper triangle including the diagonal).
inline void write_matrix_csv(std::ostream& os, const EnergyMatrix& k) {
  os << "row,col,entry\n";
  os.precision(17);
  for (std::size_t i = 0; i < k.n; ++i)
    for (std::size_t j = i; j < k.n; ++j) os << i << ',' << j << ',' << k(i, j) << '\n';
}

}  // namespace thermocap
