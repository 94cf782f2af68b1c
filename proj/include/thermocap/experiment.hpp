#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "thermocap/capacity.hpp"
#include "thermocap/config.hpp"
#include "thermocap/dimension.hpp"
#include "thermocap/error.hpp"
#include "thermocap/geometry.hpp"
#include "thermocap/hitting.hpp"
#include "thermocap/refinement.hpp"

namespace thermocap {

inline constexpr const char* kToolVersion = "thermocap 0.1.0";
inline constexpr std::size_t kMaxPaths = 1000000;

struct ReportBundle {
  std::string mode;
  std::string name;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  /// CSV tables by file name.
  std::map<std::string, std::string> tables;
  /// Named checks with their verdicts, in run order.
  std::vector<std::pair<std::string, std::string>> checks;
  /// Per-study results.
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
  bool complete = true;
  std::string failed_study;
  std::string error;
  std::optional<ErrorKind> error_kind;
};

namespace detail {

using ojson = nlohmann::ordered_json;

// JSON has no infinities; they are written as strings.
inline ojson num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Predictions {
  std::optional<std::string> dichotomy;
  std::optional<double> intersection_dim;
};

inline std::string dichotomy_prediction(const DimBounds& b, int d) {
  const auto lo = hit_dichotomy(b.lower, d), hi = hit_dichotomy(b.upper, d);
  return lo == hi ? to_string(lo) : "Undetermined";
}

inline Predictions dimension_study(const ExperimentConfig& c, ReportBundle& out) {
  Predictions pr;
  const int N = static_cast<int>(c.E->ambient_dim), d = static_cast<int>(c.F->ambient_dim);
  ojson r;
  r["N"] = N;
  r["d"] = d;
  SetDimensions dE, dF;
  try {
    dE = closed_form_dimensions(*c.E);
    dF = closed_form_dimensions(*c.F);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Unsupported) throw;
    r["available"] = false;
    r["reason"] = e.what();
    out.results["dimension"] = r;
    return pr;
  }
  r["dimH_E"] = dE.hausdorff;
  r["dimP_E"] = dE.packing;
  r["dimH_F"] = dF.hausdorff;
  r["dimP_F"] = dF.packing;
  const auto b = product_dim_bounds(dE.hausdorff, dE.packing, dF.hausdorff, dF.packing);
  r["dim_rho_lower"] = b.lower;
  r["dim_rho_upper"] = b.upper;
  pr.dichotomy = dichotomy_prediction(b, d);
  r["dichotomy"] = *pr.dichotomy;
  const auto br = gamma_star_bracket(dE.hausdorff, dF.hausdorff, b.upper, d);
  r["gamma_star_lower"] = br.lower;
  r["gamma_star_upper"] = br.upper;
  const bool exact = dE.hausdorff == dE.packing || dF.hausdorff == dF.packing;
  if (exact) r["gamma_star_closed_form"] = gamma_star_closed_form(dE.hausdorff, dF.hausdorff, d);
  out.checks.emplace_back("hitting dichotomy prediction", *pr.dichotomy);
  if (exact && b.lower == b.upper && d >= 2 * N) {
    const double lhs = gamma_star_closed_form(dE.hausdorff, dF.hausdorff, d);
    const double rhs = std::max(0.0, b.upper - d);
    out.checks.emplace_back("gamma* closed form equals max(0, dim_rho - d)",
                            std::abs(lhs - rhs) <= 1e-12 ? "pass" : "fail");
  }
  try {
    if (b.lower == b.upper) {
      pr.intersection_dim = intersection_dim_formula(b.upper, d, dE.hausdorff, has_interior(*c.F), N);
      r["intersection_dim_formula"] = *pr.intersection_dim;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Unsupported) throw;
  }
  out.results["dimension"] = r;
  return pr;
}

inline RefinementStudy capacity_study(const ExperimentConfig& c, double gamma, ReportBundle& out,
                                      const std::string& key = "capacity") {
  CapacityOptions opt;
  opt.matrix.threads = c.threads;
  const auto s = capacity_refinement_study(*c.E, *c.F, gamma, c.schedule(), opt);
  std::ostringstream csv;
  write_refinement_csv(csv, s);
  out.tables[key + ".csv"] = csv.str();
  ojson r;
  r["gamma"] = gamma;
  r["levels"] = s.levels.size();
  r["final_energy"] = num(s.levels.back().energy);
  r["trend"] = to_string(s.trend.trend);
  r["increment_ratio"] = num(s.trend.increment_ratio);
  r["extrapolated_energy"] = num(s.trend.extrapolated_energy);
  r["extrapolated_capacity"] = num(s.trend.extrapolated_capacity);
  out.results[key] = r;
  return s;
}

inline ojson hit_trend_json(const HitTrendReport& t) {
  ojson r;
  r["trend"] = to_string(t.trend);
  r["floor"] = t.floor;
  r["decay_exponent"] = t.decay_exponent;
  r["amplitude"] = t.amplitude;
  r["plateau_gain"] = num(t.plateau_gain);
  return r;
}

inline std::string hit_verdict(HitTrend t) {
  switch (t) {
    case HitTrend::Positive: return "Hits";
    case HitTrend::Vanishing: return "NoHit";
    case HitTrend::Undetermined: return "Undetermined";
  }
  return "?";
}

inline HitEstimate hit_study(const ExperimentConfig& c, const Predictions& pr, ReportBundle& out) {
  HitOptions opt;
  opt.threads = c.threads;
  if (c.resolution) opt.resolution = *c.resolution;
  const auto h = estimate_hit_prob(*c.E, *c.F, c.epsilon_schedule, *c.n_paths, *c.seed, opt);
  std::ostringstream csv;
  write_hit_csv(csv, h);
  out.tables["hit.csv"] = csv.str();
  const auto t = classify_hit_trend(h);
  ojson r;
  r["engine"] = to_string(h.engine);
  r["n_paths"] = h.n_paths;
  r["resolution"] = h.resolution;
  r["rate_at_min_epsilon"] = h.rates.back();
  r["rate_trend"] = hit_trend_json(t);
  r["verdict"] = hit_verdict(t.trend);
  out.results["hit"] = r;
  out.checks.emplace_back("hit rate along epsilon", hit_verdict(t.trend));
  if (pr.dichotomy && (*pr.dichotomy == "Hits" || *pr.dichotomy == "NoHit"))
    out.checks.emplace_back("hit verdict matches dichotomy", hit_verdict(t.trend) == *pr.dichotomy ? "pass" : "fail");
  return h;
}

inline void intersection_study(const ExperimentConfig& c, const Predictions& pr, ReportBundle& out) {
  IntersectionDimOptions opt;
  opt.threads = c.threads;
  const auto st = estimate_intersection_dim(*c.E, *c.F, *c.epsilon, *c.n_paths, *c.seed, opt);
  std::ostringstream csv;
  write_intersection_dim_csv(csv, st);
  out.tables["intersection_dim.csv"] = csv.str();
  ojson r;
  r["epsilon"] = *c.epsilon;
  r["n_paths"] = st.n_paths;
  r["n_hitting"] = st.n_hitting;
  r["n_reported"] = st.per_path_dims.size();
  r["no_hits"] = st.no_hits;
  r["ess_sup_estimate"] = st.ess_sup_estimate;
  r["resolution"] = st.resolution;
  r["scale_window"] = {std::ldexp(1.0, -st.k_min), std::ldexp(1.0, -st.k_max)};
  out.results["intersection_dim"] = r;
  if (st.no_hits) {
    out.checks.emplace_back("intersection dimension", "no hitting paths");
  } else if (pr.intersection_dim) {
    // The max over finitely many paths is biased low; 0.2 is the tolerance.
    const bool ok = std::abs(st.ess_sup_estimate - *pr.intersection_dim) <= 0.2;
    out.checks.emplace_back("intersection dimension within 0.2 of formula", ok ? "pass" : "fail");
  }
}

inline void gamma_star_study(const ExperimentConfig& c, ReportBundle& out) {
  if (c.gammas.empty()) return;
  CapacityOptions opt;
  opt.matrix.threads = c.threads;
  const auto est = estimate_gamma_star(*c.E, *c.F, c.gammas, c.schedule(), opt);
  std::ostringstream csv;
  csv << "gamma,trend,increment_ratio,final_energy\n";
  csv.precision(17);
  for (const auto& s : est.studies)
    csv << s.gamma << ',' << to_string(s.trend.trend) << ',' << s.trend.increment_ratio << ','
        << s.levels.back().energy << '\n';
  out.tables["gamma_star.csv"] = csv.str();
  ojson r;
  r["last_positive"] = est.last_positive;
  r["first_zero"] = num(est.first_zero);
  out.results["gamma_star_scan"] = r;
  const auto& dim = out.results["dimension"];
  if (dim.contains("gamma_star_lower")) {
    // The scan brackets gamma* in [last_positive, first_zero]; it agrees when
    // that interval meets the closed-form bracket.
    const double lo = dim["gamma_star_lower"].get<double>(), hi = dim["gamma_star_upper"].get<double>();
    const bool ok = est.last_positive <= hi + 1e-12 && lo <= est.first_zero + 1e-12;
    out.checks.emplace_back("gamma* scan meets closed-form bracket", ok ? "pass" : "fail");
  }
}

inline void codimension_study(const ExperimentConfig& c, ReportBundle& out) {
  CodimensionOptions opt;
  opt.threads = c.threads;
  opt.capacity.matrix.threads = c.threads;
  if (c.epsilon) opt.epsilon = *c.epsilon;
  if (c.refinement_schedule) opt.schedule = *c.refinement_schedule;
  const auto r = codimension_probe(*c.E, *c.F, *c.alpha, *c.n, *c.n_paths, *c.seed, opt);
  std::ostringstream csv;
  csv << "gamma,hits,n_paths,hit_rate,wilson_halfwidth,riesz_positive\n";
  csv.precision(17);
  csv << r.gamma << ',' << r.hits << ',' << r.n_paths << ',' << r.hit_rate << ',' << r.wilson_halfwidth << ','
      << (r.riesz_positive ? 1 : 0) << '\n';
  out.tables["codimension.csv"] = csv.str();
  if (!r.study.levels.empty()) {
    std::ostringstream cap;
    write_refinement_csv(cap, r.study);
    out.tables["codimension_capacity.csv"] = cap.str();
  }
  ojson j;
  j["gamma"] = r.gamma;
  j["epsilon"] = opt.epsilon;
  j["hits"] = r.hits;
  j["n_paths"] = r.n_paths;
  j["hit_rate"] = r.hit_rate;
  j["wilson_halfwidth"] = r.wilson_halfwidth;
  j["riesz_positive"] = r.riesz_positive;
  j["capacity_trend"] = to_string(r.study.trend.trend);
  out.results["codimension"] = j;
  const bool agree = r.riesz_positive ? r.hits > 0 : r.hits == 0;
  out.checks.emplace_back("codimension probe agrees with capacity trend", agree ? "pass" : "fail");
}

}  // namespace detail

/// Runs every study of the config's mode. A failing study stops the run;
/// the bundle then holds the earlier results and is flagged incomplete.
inline ReportBundle run_experiment(const ExperimentConfig& c) {
  ReportBundle out;
  out.mode = to_string(c.mode);
  out.name = c.name;
  out.config_hash = config_hash(c);
  out.seed = c.seed.value_or(0);
  std::string study = "config";
  try {
    require(c.seed.has_value() && c.E && c.F, ErrorKind::InvalidConfig, "config needs seed, E and F");
    require(!c.n_paths || *c.n_paths <= kMaxPaths, ErrorKind::ResourceLimit,
            "n_paths exceeds the path budget of " + std::to_string(kMaxPaths));
    study = "dimension";
    const auto pr = detail::dimension_study(c, out);
    switch (c.mode) {
      case Mode::Capacity: {
        study = "capacity";
        const auto s = detail::capacity_study(c, c.gamma.value_or(0.0), out);
        out.checks.emplace_back("capacity trend", to_string(s.trend.trend));
        break;
      }
      case Mode::Dimension:
        if (c.epsilon && c.n_paths) {
          study = "intersection_dim";
          detail::intersection_study(c, pr, out);
        }
        break;
      case Mode::Hit:
        study = "hit";
        detail::hit_study(c, pr, out);
        break;
      case Mode::GammaStar:
        study = "gamma_star";
        detail::gamma_star_study(c, out);
        break;
      case Mode::Codimension:
        study = "codimension";
        detail::codimension_study(c, out);
        break;
      case Mode::FullBattery: {
        study = "capacity";
        const auto s = detail::capacity_study(c, c.gamma.value_or(0.0), out);
        out.checks.emplace_back("capacity trend", to_string(s.trend.trend));
        study = "hit";
        const auto h = detail::hit_study(c, pr, out);
        study = "consistency";
        const auto v = capacity_consistency_check(h, s.trend);
        detail::ojson r;
        r["verdict"] = to_string(v.verdict);
        r["capacity_trend"] = to_string(v.capacity.trend);
        r["hit_trend"] = detail::hit_trend_json(v.hit);
        out.results["consistency"] = r;
        out.checks.emplace_back("capacity and hitting consistency", to_string(v.verdict));
        if (pr.dichotomy && (*pr.dichotomy == "Hits" || *pr.dichotomy == "NoHit")) {
          const bool ok = (*pr.dichotomy == "Hits" && v.verdict == Verdict::ConsistentHits) ||
                          (*pr.dichotomy == "NoHit" && v.verdict == Verdict::ConsistentNoHit);
          out.checks.emplace_back("consistency verdict matches dichotomy", ok ? "pass" : "fail");
        }
        if (c.epsilon) {
          study = "intersection_dim";
          detail::intersection_study(c, pr, out);
        }
        break;
      }
    }
  } catch (const Error& e) {
    out.complete = false;
    out.failed_study = study;
    out.error = e.what();
    out.error_kind = e.kind();
  }
  return out;
}

inline nlohmann::ordered_json summary_json(const ReportBundle& b) {
  nlohmann::ordered_json j;
  j["provenance"] = {{"config_hash", detail::hex64(b.config_hash)}, {"seed", b.seed}, {"tool_version", kToolVersion}};
  j["mode"] = b.mode;
  if (!b.name.empty()) j["name"] = b.name;
  j["complete"] = b.complete;
  if (!b.complete) j["failure"] = {{"study", b.failed_study}, {"error", b.error}};
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& [k, v] : b.checks) checks.push_back({{"check", k}, {"verdict", v}});
  j["checks"] = checks;
  j["results"] = b.results;
  return j;
}

inline std::string summary_text(const ReportBundle& b) {
  std::ostringstream os;
  os << "mode: " << b.mode << '\n';
  if (!b.name.empty()) os << "name: " << b.name << '\n';
  os << "config_hash: " << detail::hex64(b.config_hash) << '\n';
  os << "seed: " << b.seed << '\n';
  os << "tool_version: " << kToolVersion << '\n';
  os << "status: " << (b.complete ? "complete" : "incomplete") << '\n';
  if (!b.complete) os << "failed study: " << b.failed_study << " (" << b.error << ")\n";
  os << "checks:\n";
  for (const auto& [k, v] : b.checks) os << "  " << k << ": " << v << '\n';
  os << "results:\n";
  for (const auto& [study, r] : b.results.items()) {
    for (const auto& [k, v] : r.items()) os << "  " << study << '.' << k << ": " << v.dump() << '\n';
  }
  return os.str();
}

/// Output directory: explicit path, else $THERMOCAP_OUT_DIR, else "thermocap_out".
inline std::filesystem::path resolve_output_dir(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("THERMOCAP_OUT_DIR"); env && *env) return env;
  return "thermocap_out";
}

/// Writes the CSV tables, summary.json and summary.txt into dir.
inline void emit_report(const ReportBundle& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create output directory " + dir.string());
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot write " + (dir / name).string());
    f << text;
    require(static_cast<bool>(f), ErrorKind::Io, "write failed for " + (dir / name).string());
  };
  for (const auto& [name, text] : b.tables) write(name, text);
  write("summary.json", summary_json(b).dump(2) + "\n");
  write("summary.txt", summary_text(b));
}

}  // namespace thermocap
