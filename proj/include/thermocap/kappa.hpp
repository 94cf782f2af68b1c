#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "thermocap/error.hpp"

namespace thermocap {

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(std::size_t n) {
  require(n >= 1, ErrorKind::InvalidInput, "quadrature needs at least one node");
  std::vector<double> x(n), w(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Radial density g(r) of the isotropic alpha-stable law on R^d with
/// characteristic function e^{-|xi|^alpha / 2}. Computed by subordination,
/// X = B(T) with T positive (alpha/2)-stable, using Kanter's representation
/// T = c^{1/beta} a(U) E^{-(1-beta)/beta}, then tabulated on a log-spaced
/// radius grid.
class StableRadialDensity {
 public:
  StableRadialDensity(double alpha, int d) : alpha_(alpha), d_(d) {
    require(alpha > 0.0 && alpha < 2.0, ErrorKind::InvalidInput, "alpha must lie in (0, 2)");
    require(d >= 1, ErrorKind::InvalidInput, "dimension must be positive");
    // The far tail comes from u near pi, where a(u) blows up, so the u
    // panels are geometric towards pi.
    const auto [ux, uw] = gauss_legendre(kUNodes);
    double lo = 0.0, hi = 0.5 * std::numbers::pi;
    for (std::size_t p = 0; p < kUPanels; ++p) {
      for (std::size_t i = 0; i < kUNodes; ++i) {
        u_nodes_.push_back(lo + 0.5 * (hi - lo) * (ux[i] + 1.0));
        u_weights_.push_back(0.5 * (hi - lo) * uw[i]);
      }
      lo = hi;
      hi = std::numbers::pi - 0.5 * (std::numbers::pi - hi);
    }
    log_r_.resize(kTable);
    log_g_.resize(kTable);
    for (std::size_t i = 0; i < kTable; ++i) {
      log_r_[i] = kLogRMin + (kLogRMax - kLogRMin) * static_cast<double>(i) / (kTable - 1.0);
      log_g_[i] = std::log(direct(std::exp(log_r_[i])));
    }
    g0_ = direct(0.0);
  }

  double alpha() const { return alpha_; }
  int dim() const { return d_; }

  /// Table lookup: log-log linear interpolation; power tail r^{-d-alpha}
  /// beyond the table and the value at 0 below it.
  double operator()(double r) const {
    if (r <= 0.0) return g0_;
    const double lr = std::log(r);
    if (lr <= kLogRMin) return std::exp(log_g_.front());
    if (lr >= kLogRMax) return std::exp(log_g_.back() - (d_ + alpha_) * (lr - kLogRMax));
    const double pos = (lr - kLogRMin) / (kLogRMax - kLogRMin) * (kTable - 1.0);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(pos), kTable - 2);
    const double f = pos - static_cast<double>(i);
    // Cubic Hermite in log-log with centered slopes.
    auto slope = [&](std::size_t j) {
      if (j == 0) return log_g_[1] - log_g_[0];
      if (j == kTable - 1) return log_g_[j] - log_g_[j - 1];
      return 0.5 * (log_g_[j + 1] - log_g_[j - 1]);
    };
    const double f2 = f * f, f3 = f2 * f;
    return std::exp((2 * f3 - 3 * f2 + 1) * log_g_[i] + (f3 - 2 * f2 + f) * slope(i) +
                    (-2 * f3 + 3 * f2) * log_g_[i + 1] + (f3 - f2) * slope(i + 1));
  }

  /// Density by direct double quadrature (no table).
  double direct(double r) const {
    const double beta = alpha_ / 2.0;
    const double gp = (1.0 - beta) / beta;
    const double c = std::pow(std::pow(2.0, beta - 1.0), 1.0 / beta);
    const double hd = 0.5 * d_;
    double total = 0.0;
    for (std::size_t i = 0; i < u_nodes_.size(); ++i) {
      const double u = u_nodes_[i];
      const double a = c * std::sin(beta * u) / std::pow(std::sin(u), 1.0 / beta) *
                       std::pow(std::sin((1.0 - beta) * u), gp);
      if (!(a > 0.0) || !std::isfinite(a)) continue;
      total += u_weights_[i] * given_u(r * r / (2.0 * a), gp, hd) * std::pow(2.0 * std::numbers::pi * a, -hd);
    }
    return total / std::numbers::pi;
  }

 private:
  // Integral over E ~ Exp(1) of E^{gp hd} exp(-k E^{gp}), written with
  // E = e^y and evaluated by the trapezoid rule around the peak of the
  // log-integrand phi(y) = (1 + gp hd) y - e^y - k e^{gp y}, which is concave.
  static double given_u(double k, double gp, double hd) {
    const double lin = 1.0 + gp * hd;
    auto phi = [&](double y) { return lin * y - std::exp(y) - k * std::exp(gp * y); };
    auto dphi = [&](double y) { return lin - std::exp(y) - k * gp * std::exp(gp * y); };
    // phi' is decreasing and convex in y: Newton from the left of the root
    // converges monotonically.
    auto ddphi = [&](double y) { return -std::exp(y) - k * gp * gp * std::exp(gp * y); };
    double y = std::min(std::log(lin), k > 0.0 ? std::log(lin / (k * gp)) / gp : std::log(lin));
    while (dphi(y) < 0.0) y -= 1.0;
    for (int it = 0; it < 100; ++it) {
      const double dy = -dphi(y) / ddphi(y);
      y += dy;
      if (std::abs(dy) < 1e-13 * (1.0 + std::abs(y))) break;
    }
    const double ys = y;
    const double peak = phi(ys);
    auto edge = [&](double dir) {
      double step = 1.0;
      while (phi(ys + dir * step) > peak - kDrop) step *= 2.0;
      double a0 = 0.0, a1 = step;
      for (int it = 0; it < 30; ++it) {
        const double m = 0.5 * (a0 + a1);
        (phi(ys + dir * m) > peak - kDrop ? a0 : a1) = m;
      }
      return ys + dir * a1;
    };
    const double left = edge(-1.0), right = edge(1.0);
    const double h = (right - left) / kTrapezoid;
    double s = 0.0;
    for (std::size_t j = 0; j <= kTrapezoid; ++j) {
      const double w = (j == 0 || j == kTrapezoid) ? 0.5 : 1.0;
      s += w * std::exp(phi(left + h * static_cast<double>(j)) - peak);
    }
    return s * h * std::exp(peak);
  }

  static constexpr std::size_t kUNodes = 12;
  static constexpr std::size_t kUPanels = 48;
  static constexpr std::size_t kTable = 361;
  static constexpr std::size_t kTrapezoid = 120;
  static constexpr double kDrop = 45.0;
  static constexpr double kLogRMin = -9.210340371976184;  // log 1e-4
  static constexpr double kLogRMax = 18.420680743952367;  // log 1e8

  double alpha_;
  int d_;
  std::vector<double> u_nodes_, u_weights_;
  std::vector<double> log_r_, log_g_;
  double g0_ = 0.0;
};

/// Volume density of s = v_1 + ... + v_n for v uniform-Lebesgue on [0, M]^n,
/// i.e. d/ds |{v in [0,M]^n : sum v <= s}|.
inline double cube_sum_density(double s, int n, double M) {
  if (s <= 0.0 || s >= n * M) return 0.0;
  const double x = s / M;
  double acc = 0.0, binom = 1.0, fact = 1.0;
  for (int k = 1; k < n; ++k) fact *= k;
  for (int k = 0; k <= n && k < x; ++k) {
    acc += (k % 2 == 0 ? 1.0 : -1.0) * binom * std::pow(x - k, n - 1);
    binom = binom * (n - k) / (k + 1.0);
  }
  return acc / fact * std::pow(M, n - 1);
}

/// kappa(z) = int_{[0,M]^n} g_v(z) dv, g_v the density of the additive
/// stable process at time v. Only s = |v|_1 matters, and g_v(z) =
/// s^{-d/alpha} g(|z| s^{-1/alpha}), so the cube integral reduces to a 1-D
/// integral against cube_sum_density, done with composite Gauss-Legendre on
/// panels that are geometric towards s = 0 and break at multiples of M.
class KappaKernel {
 public:
  KappaKernel(double alpha, int n, int d, double M = 1.0)
      : density_(checked_alpha(alpha, n, d, M), d), n_(n), M_(M) {
    auto [x, w] = gauss_legendre(kNodes);
    nodes_ = std::move(x);
    weights_ = std::move(w);
  }

  double riesz_exponent() const { return density_.dim() - density_.alpha() * n_; }

  double operator()(std::span<const double> z) const {
    double r2 = 0.0;
    for (double v : z) r2 += v * v;
    require(static_cast<int>(z.size()) == density_.dim(), ErrorKind::InvalidInput, "z has wrong dimension");
    require(r2 > 0.0, ErrorKind::SingularInput, "kappa is singular at z = 0");
    return radial(std::sqrt(r2));
  }

  double radial(double r) const {
    require(r > 0.0, ErrorKind::SingularInput, "kappa is singular at z = 0");
    const double a = density_.alpha();
    const int d = density_.dim();
    // Break points: geometric refinement towards 0 inside [0, M], with the
    // finest panel well below the scale r^alpha where the integrand turns over.
    std::vector<double> br{0.0};
    const double finest = std::min(M_, std::pow(r, a)) * 1e-8;
    for (double s = finest; s < M_; s *= 2.0) br.push_back(s);
    for (int j = 1; j <= n_; ++j) br.push_back(j * M_);
    double total = 0.0;
    for (std::size_t p = 0; p + 1 < br.size(); ++p) {
      const double lo = br[p], hi = br[p + 1];
      const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
      for (std::size_t i = 0; i < kNodes; ++i) {
        const double s = mid + half * nodes_[i];
        const double g = std::pow(s, -d / a) * density_(r * std::pow(s, -1.0 / a));
        total += half * weights_[i] * cube_sum_density(s, n_, M_) * g;
      }
    }
    return total;
  }

 private:
  static double checked_alpha(double alpha, int n, int d, double M) {
    require(n >= 1, ErrorKind::InvalidInput, "n must be positive");
    require(M > 0.0, ErrorKind::InvalidInput, "M must be positive");
    require(alpha > 0.0 && alpha < 2.0, ErrorKind::InvalidInput, "alpha must lie in (0, 2)");
    require(d - alpha * n > 0.0, ErrorKind::InvalidInput, "kappa needs d - alpha n > 0");
    return alpha;
  }

  static constexpr std::size_t kNodes = 32;
  StableRadialDensity density_;
  std::vector<double> nodes_, weights_;
  int n_;
  double M_;
};

/// Convenience wrapper; builds the density table on every call.
inline double kappa_kernel(std::span<const double> z, double alpha, int n, double M = 1.0) {
  require(std::any_of(z.begin(), z.end(), [](double v) { return v != 0.0; }), ErrorKind::SingularInput,
          "kappa is singular at z = 0");
  return KappaKernel(alpha, n, static_cast<int>(z.size()), M)(z);
}

}  // namespace thermocap
