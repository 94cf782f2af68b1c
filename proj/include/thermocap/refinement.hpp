#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <utility>
#include <vector>

#include "thermocap/capacity.hpp"
#include "thermocap/error.hpp"
#include "thermocap/geometry.hpp"

namespace thermocap {

/// One (time_resolution, space_resolution) pair per level, finest last.
struct RefinementSchedule {
  std::vector<std::pair<double, double>> levels;

  void validate() const {
    require(!levels.empty(), ErrorKind::InvalidConfig, "refinement schedule is empty");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      require(levels[i].first > 0.0 && levels[i].second > 0.0, ErrorKind::InvalidConfig,
              "refinement resolutions must be positive");
      if (i > 0)
        require(levels[i].first <= levels[i - 1].first && levels[i].second <= levels[i - 1].second &&
                    (levels[i].first < levels[i - 1].first || levels[i].second < levels[i - 1].second),
                ErrorKind::InvalidConfig, "refinement schedule must be strictly refining");
    }
  }
};

/// Parabolic schedule: space resolution h = h0 * factor^l and time
/// resolution max(h^2, time_floor) for l = 0..count-1.
inline RefinementSchedule parabolic_schedule(double h0, double factor, std::size_t count, double time_floor = 0.0) {
  require(h0 > 0.0 && factor > 0.0 && factor < 1.0 && count >= 1, ErrorKind::InvalidConfig,
          "parabolic schedule needs h0 > 0, factor in (0,1), count >= 1");
  RefinementSchedule s;
  double h = h0;
  for (std::size_t l = 0; l < count; ++l, h *= factor) s.levels.emplace_back(std::max(h * h, time_floor), h);
  return s;
}

enum class CapacityTrend { Positive, Zero, Undetermined };

inline const char* to_string(CapacityTrend t) {
  switch (t) {
    case CapacityTrend::Positive: return "positive";
    case CapacityTrend::Zero: return "zero";
    case CapacityTrend::Undetermined: return "undetermined";
  }
  return "?";
}

struct TrendReport {
  CapacityTrend trend = CapacityTrend::Undetermined;
  /// Geometric ratio of successive energy increments (0 when not fitted).
  double increment_ratio = 0.0;
  /// Extrapolated limit energy; infinite when the increments do not shrink.
  double extrapolated_energy = kInfinity;
  double extrapolated_capacity = 0.0;
};

struct TrendOptions {
  double divergence_threshold = 1e12;
  /// Increments below this fraction of the energy count as converged.
  double flat_fraction = 1e-3;
  double converge_ratio = 0.95;
  double diverge_ratio = 1.05;
  std::size_t window = 4;
};

/// Classifies a refinement curve of minimal energies. Energies increase
/// under refinement for every set; the sets of positive capacity are the
/// ones whose increments shrink geometrically, so the curve is summarized by
/// the fitted ratio q of successive increments.
inline TrendReport classify_energy_trend(const std::vector<double>& energies, const TrendOptions& opt = {}) {
  TrendReport rep;
  if (energies.empty()) return rep;
  const double last = energies.back();
  if (!(last <= opt.divergence_threshold)) {
    rep.trend = CapacityTrend::Zero;
    return rep;
  }
  // Exactly repeated energies come from levels whose grids coincide and
  // carry no information about the trend.
  std::vector<double> inc;
  for (std::size_t i = energies.size() - 1; i >= 1 && inc.size() < opt.window; --i)
    if (energies[i] != energies[i - 1]) inc.push_back(energies[i] - energies[i - 1]);
  std::reverse(inc.begin(), inc.end());
  if (inc.size() < 2) return rep;

  const auto finish_positive = [&](double q) {
    rep.trend = CapacityTrend::Positive;
    rep.increment_ratio = q;
    const double tail = inc.back() > 0.0 && q < 1.0 ? inc.back() * q / (1.0 - q) : 0.0;
    rep.extrapolated_energy = last + tail;
    rep.extrapolated_capacity = rep.extrapolated_energy > 0.0 ? 1.0 / rep.extrapolated_energy : kInfinity;
    return rep;
  };

  if (inc.back() <= 0.0 || inc.back() <= opt.flat_fraction * std::abs(last)) return finish_positive(0.0);
  const bool all_positive = std::all_of(inc.begin(), inc.end(), [](double v) { return v > 0.0; });
  if (!all_positive) {
    // Oscillating increments: converged when the amplitude shrinks.
    if (std::abs(inc.back()) < std::abs(inc.front())) return finish_positive(0.0);
    return rep;
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(inc.size());
  for (std::size_t i = 0; i < inc.size(); ++i) {
    const double x = static_cast<double>(i), y = std::log(inc[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double q = std::exp((sxy - sx * sy / m) / (sxx - sx * sx / m));
  rep.increment_ratio = q;
  if (q <= opt.converge_ratio) return finish_positive(q);
  if (q >= opt.diverge_ratio) rep.trend = CapacityTrend::Zero;
  return rep;
}

struct RefinementLevel {
  std::size_t level = 0;
  double time_resolution = 0.0;
  double space_resolution = 0.0;
  std::size_t n_pairs = 0;
  double energy = 0.0;
  double capacity = 0.0;
  bool converged = false;
};

struct RefinementStudy {
  double gamma = 0.0;
  std::vector<RefinementLevel> levels;
  TrendReport trend;
};

/// Thermal capacity of E x F along the schedule. IFS depths are truncated to
/// each level's resolution so that every level is a genuine coarsening.
inline RefinementStudy capacity_refinement_study(const SetSpec& E, const SetSpec& F, double gamma,
                                                 const RefinementSchedule& schedule, const CapacityOptions& cap = {},
                                                 const GridOptions& grid = {}, const TrendOptions& trend = {}) {
  schedule.validate();
  require(gamma >= 0.0, ErrorKind::InvalidInput, "gamma must be nonnegative");
  RefinementStudy study;
  study.gamma = gamma;
  std::vector<double> energies;
  for (std::size_t l = 0; l < schedule.levels.size(); ++l) {
    const auto [tr, sr] = schedule.levels[l];
    const auto g = build_product_grid(at_resolution(E, tr), at_resolution(F, sr), tr, sr, grid);
    const auto r = thermal_capacity(g, gamma, cap);
    study.levels.push_back({l, tr, sr, r.n_pairs, r.energy, r.capacity, r.converged});
    energies.push_back(r.energy);
  }
  study.trend = classify_energy_trend(energies, trend);
  return study;
}

/// CSV: refinement_level, n_pairs, energy_star, capacity.
inline void write_refinement_csv(std::ostream& os, const RefinementStudy& s) {
  os << "refinement_level,n_pairs,energy_star,capacity\n";
  os.precision(17);
  for (const auto& l : s.levels) os << l.level << ',' << l.n_pairs << ',' << l.energy << ',' << l.capacity << '\n';
}

struct GammaStarEstimate {
  /// Largest scanned gamma with a positive trend (0 if none).
  double last_positive = 0.0;
  /// Smallest scanned gamma with a zero trend above last_positive (infinite if none).
  double first_zero = kInfinity;
  std::vector<RefinementStudy> studies;
};

/// Scans increasing gammas; gamma* lies in [last_positive, first_zero]
/// whenever the trends are monotone in gamma.
inline GammaStarEstimate estimate_gamma_star(const SetSpec& E, const SetSpec& F, const std::vector<double>& gammas,
                                             const RefinementSchedule& schedule, const CapacityOptions& cap = {},
                                             const GridOptions& grid = {}, const TrendOptions& trend = {}) {
  require(!gammas.empty(), ErrorKind::InvalidConfig, "gamma scan is empty");
  for (std::size_t i = 1; i < gammas.size(); ++i)
    require(gammas[i] > gammas[i - 1], ErrorKind::InvalidConfig, "gamma scan must be strictly increasing");
  GammaStarEstimate est;
  for (double g : gammas) {
    est.studies.push_back(capacity_refinement_study(E, F, g, schedule, cap, grid, trend));
    const auto t = est.studies.back().trend.trend;
    if (t == CapacityTrend::Positive) {
      est.last_positive = g;
      est.first_zero = kInfinity;
    } else if (t == CapacityTrend::Zero && !(est.first_zero < kInfinity)) {
      est.first_zero = g;
    }
  }
  return est;
}

}  // namespace thermocap
