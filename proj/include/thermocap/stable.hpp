#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "thermocap/error.hpp"
#include "thermocap/rng.hpp"

namespace thermocap {

/// Positive strictly beta-stable variable with E e^{-lambda S} = e^{-lambda^beta},
/// 0 < beta < 1 (Kanter's representation).
inline double positive_stable(double beta, Rng& rng) {
  const double u = std::numbers::pi * rng.uniform();
  const double e = rng.exponential();
  const double a = std::sin(beta * u) / std::pow(std::sin(u), 1.0 / beta);
  const double b = std::pow(std::sin((1.0 - beta) * u) / e, (1.0 - beta) / beta);
  return a * b;
}

/// Sum of n independent isotropic alpha-stable processes in R^d, each with
/// E e^{i<xi, X(u)>} = e^{-u |xi|^alpha / 2}, observed on a grid per axis.
/// Each axis is B(T(u)) with T an (alpha/2)-stable subordinator whose Laplace
/// transform is e^{-u c lambda^{alpha/2}}, c = 2^{alpha/2 - 1}.
struct StablePath {
  std::vector<std::vector<double>> u_grid;
  std::size_t d = 1;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  /// axis_values[k][i*d + c]: coordinate c of X^{(k)}(u_grid[k][i]).
  std::vector<std::vector<double>> axis_values;

  std::size_t n() const { return u_grid.size(); }

  /// X(u) at the grid point with per-axis indices idx.
  std::vector<double> at(const std::vector<std::size_t>& idx) const {
    require(idx.size() == n(), ErrorKind::InvalidInput, "index has wrong dimension");
    std::vector<double> x(d, 0.0);
    for (std::size_t k = 0; k < n(); ++k) {
      require(idx[k] < u_grid[k].size(), ErrorKind::InvalidInput, "grid index out of range");
      for (std::size_t c = 0; c < d; ++c) x[c] += axis_values[k][idx[k] * d + c];
    }
    return x;
  }

  /// All grid values in lattice-major order (last axis fastest).
  std::vector<double> values() const {
    std::size_t total = 1;
    for (const auto& g : u_grid) total *= g.size();
    std::vector<double> out;
    out.reserve(total * d);
    std::vector<std::size_t> idx(n(), 0);
    for (std::size_t lin = 0; lin < total; ++lin) {
      const auto x = at(idx);
      out.insert(out.end(), x.begin(), x.end());
      for (std::size_t k = n(); k-- > 0;) {
        if (++idx[k] < u_grid[k].size()) break;
        idx[k] = 0;
      }
    }
    return out;
  }
};

inline StablePath sample_additive_stable(const std::vector<std::vector<double>>& u_grid, std::size_t d, double alpha,
                                         std::uint64_t seed) {
  require(alpha > 0.0 && alpha < 2.0, ErrorKind::InvalidInput, "alpha must lie in (0, 2)");
  require(d >= 1, ErrorKind::InvalidInput, "state dimension must be positive");
  require(!u_grid.empty(), ErrorKind::InvalidInput, "stable process needs at least one axis");
  StablePath path{u_grid, d, alpha, seed, {}};
  const double beta = alpha / 2.0;
  const double c = std::pow(2.0, beta - 1.0);
  for (std::size_t k = 0; k < u_grid.size(); ++k) {
    const auto& g = u_grid[k];
    require(!g.empty(), ErrorKind::InvalidInput, "grid axis is empty");
    require(g.front() >= 0.0, ErrorKind::InvalidInput, "grid times must be nonnegative");
    for (std::size_t i = 1; i < g.size(); ++i)
      require(g[i] > g[i - 1], ErrorKind::InvalidInput, "grid axes must be strictly increasing");
    Rng rng(derive_seed(seed, k));
    std::vector<double> v(g.size() * d, 0.0);
    double prev_u = 0.0;
    std::vector<double> x(d, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double du = g[i] - prev_u;
      prev_u = g[i];
      if (du > 0.0) {
        const double dt = std::pow(c * du, 1.0 / beta) * positive_stable(beta, rng);
        const double sd = std::sqrt(dt);
        for (std::size_t a = 0; a < d; ++a) x[a] += sd * rng.normal();
      }
      for (std::size_t a = 0; a < d; ++a) v[i * d + a] = x[a];
    }
    path.axis_values.push_back(std::move(v));
  }
  return path;
}

}  // namespace thermocap
