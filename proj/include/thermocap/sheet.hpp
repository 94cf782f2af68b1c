#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <vector>

#include "thermocap/error.hpp"
#include "thermocap/parallel.hpp"
#include "thermocap/rng.hpp"

namespace thermocap {

/// Per-axis sorted grids of strictly positive times.
using Lattice = std::vector<std::vector<double>>;

inline void validate_lattice(const Lattice& lattice) {
  require(!lattice.empty(), ErrorKind::InvalidInput, "lattice needs at least one axis");
  for (const auto& axis : lattice) {
    require(!axis.empty(), ErrorKind::InvalidInput, "lattice axis is empty");
    require(axis.front() > 0.0, ErrorKind::InvalidInput, "lattice times must be strictly positive");
    for (std::size_t i = 1; i < axis.size(); ++i)
      require(axis[i] > axis[i - 1], ErrorKind::InvalidInput, "lattice axes must be strictly increasing");
  }
}

inline std::size_t lattice_size(const Lattice& lattice) {
  std::size_t n = 1;
  for (const auto& axis : lattice) n *= axis.size();
  return n;
}

/// Row-major linear index (last axis fastest).
inline std::size_t lattice_index(const Lattice& lattice, const std::vector<std::size_t>& idx) {
  require(idx.size() == lattice.size(), ErrorKind::InvalidInput, "index has wrong dimension");
  std::size_t lin = 0;
  for (std::size_t a = 0; a < lattice.size(); ++a) {
    require(idx[a] < lattice[a].size(), ErrorKind::InvalidInput, "lattice index out of range");
    lin = lin * lattice[a].size() + idx[a];
  }
  return lin;
}

inline std::vector<std::size_t> lattice_unravel(const Lattice& lattice, std::size_t lin) {
  std::vector<std::size_t> idx(lattice.size());
  for (std::size_t a = lattice.size(); a-- > 0;) {
    idx[a] = lin % lattice[a].size();
    lin /= lattice[a].size();
  }
  return idx;
}

inline std::vector<double> lattice_point(const Lattice& lattice, std::size_t lin) {
  const auto idx = lattice_unravel(lattice, lin);
  std::vector<double> t(lattice.size());
  for (std::size_t a = 0; a < lattice.size(); ++a) t[a] = lattice[a][idx[a]];
  return t;
}

/// One realization of the Brownian sheet at the lattice points.
struct SheetPath {
  Lattice lattice;
  std::size_t d = 1;
  std::uint64_t seed = 0;
  std::vector<double> values;  // lattice-major, d coordinates per point

  std::size_t size() const { return lattice_size(lattice); }
  const double* at(std::size_t lin) const { return values.data() + lin * d; }
  const double* at(const std::vector<std::size_t>& idx) const { return at(lattice_index(lattice, idx)); }
};

/// Exact law at lattice points: each coordinate is the N-dimensional
/// cumulative sum of independent centered Gaussian cell increments whose
/// variance is the cell volume, cells spanning back to the axes at 0.
inline SheetPath sample_sheet(const Lattice& lattice, std::size_t d, std::uint64_t seed) {
  validate_lattice(lattice);
  require(d >= 1, ErrorKind::InvalidInput, "state dimension must be positive");
  SheetPath path{lattice, d, seed, {}};
  const std::size_t n = lattice_size(lattice);
  const std::size_t N = lattice.size();
  path.values.resize(n * d);

  std::vector<std::vector<double>> widths(N);
  for (std::size_t a = 0; a < N; ++a) {
    widths[a].resize(lattice[a].size());
    for (std::size_t i = 0; i < lattice[a].size(); ++i)
      widths[a][i] = lattice[a][i] - (i == 0 ? 0.0 : lattice[a][i - 1]);
  }

  Rng rng(seed);
  std::vector<std::size_t> idx(N, 0);
  for (std::size_t lin = 0; lin < n; ++lin) {
    double vol = 1.0;
    for (std::size_t a = 0; a < N; ++a) vol *= widths[a][idx[a]];
    const double sd = std::sqrt(vol);
    for (std::size_t c = 0; c < d; ++c) path.values[lin * d + c] = sd * rng.normal();
    for (std::size_t a = N; a-- > 0;) {
      if (++idx[a] < lattice[a].size()) break;
      idx[a] = 0;
    }
  }
  // Prefix sums along each axis in turn.
  std::size_t stride = d;
  for (std::size_t a = N; a-- > 0;) {
    const std::size_t len = lattice[a].size();
    const std::size_t block = stride * len;
    for (std::size_t base = 0; base < n * d; base += block)
      for (std::size_t off = 0; off < stride; ++off)
        for (std::size_t i = 1; i < len; ++i) path.values[base + i * stride + off] += path.values[base + (i - 1) * stride + off];
    stride = block;
  }
  return path;
}

/// C_{s,t} = prod_i min(s_i, t_i) / s_i.
inline double pinned_coefficient(const std::vector<double>& s, const std::vector<double>& t) {
  require(s.size() == t.size(), ErrorKind::InvalidInput, "time dimension mismatch");
  double c = 1.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    require(s[i] > 0.0, ErrorKind::InvalidInput, "pinning time must be strictly positive");
    c *= std::min(s[i], t[i]) / s[i];
  }
  return c;
}

/// Var of each coordinate of W_s(t) = W(t) - C_{s,t} W(s): prod t - C^2 prod s.
inline double pinned_variance(const std::vector<double>& s, const std::vector<double>& t) {
  const double c = pinned_coefficient(s, t);
  double ps = 1.0, pt = 1.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ps *= s[i];
    pt *= t[i];
  }
  return pt - c * c * ps;
}

/// W_s(t) at every lattice point t, same layout as path.values.
inline std::vector<double> pinned_sheet_values(const SheetPath& path, const std::vector<std::size_t>& s_index) {
  require(s_index.size() == path.lattice.size(), ErrorKind::InvalidInput, "pinning point has wrong dimension");
  for (std::size_t a = 0; a < s_index.size(); ++a)
    require(s_index[a] < path.lattice[a].size(), ErrorKind::InvalidInput, "pinning point is off the lattice");
  const std::size_t s_lin = lattice_index(path.lattice, s_index);
  const auto s = lattice_point(path.lattice, s_lin);
  const double* ws = path.at(s_lin);
  std::vector<double> out(path.values.size());
  for (std::size_t lin = 0; lin < path.size(); ++lin) {
    const double c = pinned_coefficient(s, lattice_point(path.lattice, lin));
    for (std::size_t k = 0; k < path.d; ++k) out[lin * path.d + k] = path.values[lin * path.d + k] - c * ws[k];
  }
  return out;
}

/// Looks up a time point on the lattice; throws invalid-input when absent.
inline std::vector<std::size_t> find_on_lattice(const Lattice& lattice, const std::vector<double>& t) {
  require(t.size() == lattice.size(), ErrorKind::InvalidInput, "time point has wrong dimension");
  std::vector<std::size_t> idx(t.size());
  for (std::size_t a = 0; a < t.size(); ++a) {
    const auto it = std::lower_bound(lattice[a].begin(), lattice[a].end(), t[a]);
    require(it != lattice[a].end() && *it == t[a], ErrorKind::InvalidInput, "time point is off the lattice");
    idx[a] = static_cast<std::size_t>(it - lattice[a].begin());
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Binary dump
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u64(os, u);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  require(static_cast<bool>(is), ErrorKind::Io, "truncated sheet dump");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) {
  const std::uint64_t u = get_u64(is);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

/// Little-endian layout: u64 N, u64 d, u64 size per axis, u64 seed, then the
/// axis coordinates as f64, then the values as f64 in lattice-major order
/// with the state coordinate fastest.
inline void write_sheet_binary(std::ostream& os, const SheetPath& path) {
  detail::put_u64(os, path.lattice.size());
  detail::put_u64(os, path.d);
  for (const auto& axis : path.lattice) detail::put_u64(os, axis.size());
  detail::put_u64(os, path.seed);
  for (const auto& axis : path.lattice)
    for (double t : axis) detail::put_f64(os, t);
  for (double v : path.values) detail::put_f64(os, v);
  require(static_cast<bool>(os), ErrorKind::Io, "failed to write sheet dump");
}

inline SheetPath read_sheet_binary(std::istream& is) {
  SheetPath path;
  const std::uint64_t N = detail::get_u64(is);
  path.d = detail::get_u64(is);
  require(N >= 1 && N <= 16 && path.d >= 1 && path.d <= 1024, ErrorKind::Io, "corrupt sheet dump header");
  path.lattice.resize(N);
  std::vector<std::uint64_t> sizes(N);
  for (auto& s : sizes) s = detail::get_u64(is);
  path.seed = detail::get_u64(is);
  for (std::size_t a = 0; a < N; ++a) {
    path.lattice[a].resize(sizes[a]);
    for (double& t : path.lattice[a]) t = detail::get_f64(is);
  }
  path.values.resize(lattice_size(path.lattice) * path.d);
  for (double& v : path.values) v = detail::get_f64(is);
  return path;
}

// ---------------------------------------------------------------------------
// Empirical moments across paths
// ---------------------------------------------------------------------------

struct Covariance {
  std::size_t m = 0;
  std::vector<double> mean;
  std::vector<double> cov;       // m x m, unbiased
  std::vector<double> cov_se;    // standard error of each entry
  std::size_t n_paths = 0;

  double operator()(std::size_t i, std::size_t j) const { return cov[i * m + j]; }
  double se(std::size_t i, std::size_t j) const { return cov_se[i * m + j]; }
};

/// Observation function: path seed -> vector of observed values.
using Observer = std::function<std::vector<double>(std::uint64_t)>;

/// Sample covariance of the observation vector over n_paths independent
/// paths; path p uses seed derive_seed(seed, p), so results do not depend
/// on the thread count.
inline Covariance empirical_covariance(const Observer& observe, std::size_t n_paths, std::uint64_t seed,
                                       unsigned threads = 1) {
  require(n_paths >= 2, ErrorKind::InvalidInput, "covariance needs at least two paths");
  std::vector<std::vector<double>> obs(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t p) { obs[p] = observe(derive_seed(seed, p)); });
  const std::size_t m = obs.front().size();
  for (const auto& o : obs) require(o.size() == m, ErrorKind::InvalidInput, "observations have varying length");
  Covariance c;
  c.m = m;
  c.n_paths = n_paths;
  c.mean.assign(m, 0.0);
  for (const auto& o : obs)
    for (std::size_t i = 0; i < m; ++i) c.mean[i] += o[i];
  for (double& v : c.mean) v /= static_cast<double>(n_paths);
  c.cov.assign(m * m, 0.0);
  std::vector<double> fourth(m * m, 0.0);
  for (const auto& o : obs)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double pr = (o[i] - c.mean[i]) * (o[j] - c.mean[j]);
        c.cov[i * m + j] += pr;
        fourth[i * m + j] += pr * pr;
      }
  const double n = static_cast<double>(n_paths);
  c.cov_se.resize(m * m);
  for (std::size_t k = 0; k < m * m; ++k) {
    const double biased = c.cov[k] / n;
    c.cov[k] /= n - 1.0;
    c.cov_se[k] = std::sqrt(std::max(0.0, fourth[k] / n - biased * biased) / n);
  }
  return c;
}

/// Observer returning the sheet coordinates at the given lattice points
/// (point-major, coordinate fastest).
inline Observer sheet_observer(Lattice lattice, std::size_t d, std::vector<std::vector<double>> points) {
  validate_lattice(lattice);
  std::vector<std::size_t> lins;
  for (const auto& t : points) lins.push_back(lattice_index(lattice, find_on_lattice(lattice, t)));
  return [lattice = std::move(lattice), d, lins = std::move(lins)](std::uint64_t seed) {
    const auto path = sample_sheet(lattice, d, seed);
    std::vector<double> out;
    out.reserve(lins.size() * d);
    for (std::size_t lin : lins)
      for (std::size_t k = 0; k < d; ++k) out.push_back(path.at(lin)[k]);
    return out;
  };
}

}  // namespace thermocap
