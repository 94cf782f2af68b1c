// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "thermocap/thermocap.hpp"

using namespace thermocap;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

ExperimentConfig load_config(const std::string& name) {
  std::ifstream in(std::string(THERMOCAP_CONFIG_DIR) + "/" + name);
  require(in.good(), ErrorKind::Io, "cannot open config " + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string check_value(const ReportBundle& b, const std::string& name) {
  for (const auto& [k, v] : b.checks)
    if (k == name) return v;
  return "missing";
}

// 1. Solver against brute-force simplex search.
Outcome solver_oracle() {
  Outcome o;
  Rng rng(91);
  int bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(4);
    std::vector<double> e(n * n);
    if (trial % 3 == 2) {
      // Gram matrix of nonnegative vectors: convex, nonnegative instance.
      std::vector<double> v(n * 3);
      for (double& x : v) x = rng.uniform(0.0, 1.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t a = 0; a < 3; ++a) s += v[i * 3 + a] * v[j * 3 + a];
          e[i * n + j] = s;
        }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) e[i * n + j] = e[j * n + i] = rng.uniform(0.0, 2.0);
    }
    auto k = EnergyMatrix::from_entries(n, e);
    double cap = 1.0;
    if (trial % 2 == 1) {
      for (std::size_t i = 0; i < n; ++i) k.slice[i] = i % 2;
      k.n_slices = 2;
      cap = 0.5 + 0.05 * static_cast<double>(rng.index(8));
    }
    SolverOptions opt;
    opt.slice_cap = cap;
    const double got = minimize_energy(k, opt).energy;
    const double ref = oracle::brute_force_simplex_min(e, n, k.slice, k.n_slices, cap);
    const double rel = std::abs(got - ref) / std::max(1.0, std::abs(ref));
    worst = std::max(worst, rel);
    if (rel > 1e-6) ++bad;
  }
  o.pass = bad == 0;
  o.detail = "50 instances, " + std::to_string(bad) + " mismatches, worst rel diff " + fmt("%.2e", worst);
  return o;
}

// 2. Sheet covariance equals the product of minima.
Outcome sheet_law() {
  Outcome o;
  int checked = 0, bad = 0;
  auto run = [&](const Lattice& l, std::size_t d,
                 const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs) {
    std::vector<std::vector<double>> pts;
    auto idx = [&](const std::vector<double>& t) {
      const auto it = std::find(pts.begin(), pts.end(), t);
      if (it != pts.end()) return static_cast<std::size_t>(it - pts.begin());
      pts.push_back(t);
      return pts.size() - 1;
    };
    std::vector<std::pair<std::size_t, std::size_t>> ij;
    for (const auto& [s, t] : pairs) ij.emplace_back(idx(s), idx(t));
    const auto c = empirical_covariance(sheet_observer(l, d, pts), 10000, 1234 + d, 1);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      double expect = 1.0;
      for (std::size_t k = 0; k < pairs[p].first.size(); ++k) expect *= std::min(pairs[p].first[k], pairs[p].second[k]);
      for (std::size_t a = 0; a < d; ++a) {
        const std::size_t r = ij[p].first * d + a, s = ij[p].second * d + a;
        ++checked;
        if (std::abs(c(r, s) - expect) > 3.0 * c.se(r, s)) ++bad;
      }
    }
  };
  run({{0.25, 0.5, 1, 1.5, 2}}, 1,
      {{{0.5}, {0.5}}, {{0.5}, {1}}, {{1}, {2}}, {{2}, {2}}, {{1.5}, {0.25}}, {{0.25}, {2}}});
  run({{0.5, 1, 1.5, 2}, {0.5, 1, 1.5, 2}}, 2,
      {{{1, 1}, {1, 1}}, {{1, 1}, {2, 2}}, {{1, 2}, {2, 1}}, {{2, 2}, {2, 2}}, {{0.5, 1.5}, {1.5, 0.5}},
       {{0.5, 2}, {2, 2}}});
  o.pass = bad == 0;
  o.detail = std::to_string(checked) + " covariance entries, " + std::to_string(bad) + " outside 3 s.e.";
  return o;
}

// 3. Pinned sheet: decorrelation from W(s), variance comparable to |t - s|.
Outcome pinned_sheet() {
  Outcome o;
  Lattice l;
  std::vector<double> ax(9);
  for (std::size_t i = 0; i < 9; ++i) ax[i] = 1.0 + static_cast<double>(i) / 8.0;
  l = {ax, ax};
  const std::size_t npts = lattice_size(l);
  const std::vector<std::vector<std::size_t>> pins{{0, 0}, {4, 4}, {8, 8}, {2, 6}, {7, 1}};
  const std::vector<std::size_t> t_for_pin{lattice_index(l, {8, 8}), lattice_index(l, {0, 8}),
                                           lattice_index(l, {3, 5}), lattice_index(l, {6, 6}),
                                           lattice_index(l, {0, 0})};
  const std::size_t n = 10000;
  std::vector<std::vector<double>> sum2(pins.size(), std::vector<double>(npts, 0.0));
  std::vector<double> sxy(pins.size(), 0.0), sxx(pins.size(), 0.0), syy(pins.size(), 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const auto path = sample_sheet(l, 1, derive_seed(77, p));
    for (std::size_t k = 0; k < pins.size(); ++k) {
      const auto w = pinned_sheet_values(path, pins[k]);
      const double ws = path.at(pins[k])[0];
      for (std::size_t i = 0; i < npts; ++i) sum2[k][i] += w[i] * w[i];
      const double wt = w[t_for_pin[k]];
      sxy[k] += wt * ws;
      sxx[k] += wt * wt;
      syy[k] += ws * ws;
    }
  }
  const double bound = 3.0 / std::sqrt(static_cast<double>(n));
  double worst_corr = 0.0;
  for (std::size_t k = 0; k < pins.size(); ++k)
    worst_corr = std::max(worst_corr, std::abs(sxy[k] / std::sqrt(sxx[k] * syy[k])));
  double lo = 1e300, hi = 0.0;
  for (std::size_t k = 0; k < pins.size(); ++k) {
    const auto s = lattice_point(l, lattice_index(l, pins[k]));
    for (std::size_t i = 0; i < npts; ++i) {
      const auto t = lattice_point(l, i);
      const double dist = std::hypot(t[0] - s[0], t[1] - s[1]);
      if (dist == 0.0) continue;
      const double ratio = sum2[k][i] / static_cast<double>(n) / dist;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  o.pass = worst_corr < bound && lo > 0.0 && hi / lo < 20.0;
  o.detail = "max |corr| " + fmt("%.4f", worst_corr) + " (bound " + fmt("%.4f", bound) + "), variance/distance in [" +
             fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "], ratio " + fmt("%.2f", hi / lo);
  return o;
}

// 4. Hitting dichotomy battery.
Outcome battery() {
  Outcome o;
  const char* files[] = {"battery_a_segment_point.json", "battery_b_square_point_d5.json",
                         "battery_c_cantor_nohit.json", "battery_d_cantor_hits.json"};
  for (const char* f : files) {
    const auto c = load_config(f);
    const auto t0 = std::chrono::steady_clock::now();
    const auto b = run_experiment(c);
    const double secs = seconds_since(t0);
    const double min_eps = *std::min_element(c.epsilon_schedule.begin(), c.epsilon_schedule.end());
    const std::string verdict = check_value(b, "capacity and hitting consistency");
    const std::string match = check_value(b, "consistency verdict matches dichotomy");
    const bool ok = b.complete && match == "pass" && c.n_paths == 2000u && min_eps <= std::ldexp(1.0, -7) &&
                    secs < 300.0;
    o.pass = o.pass && ok;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += std::string(f).substr(0, 9) + " " + check_value(b, "hitting dichotomy prediction") + " -> " +
                verdict + " " + fmt("%.0fs", secs);
  }
  return o;
}

// 5. Closed-form gamma* equals dim_rho - d on self-similar triples.
Outcome frostman_identity() {
  Outcome o;
  auto corners = [](double r, std::size_t dim) {
    std::vector<std::vector<double>> off;
    for (std::size_t m = 0; m < (std::size_t{1} << dim); ++m) {
      std::vector<double> v(dim);
      for (std::size_t a = 0; a < dim; ++a) v[a] = (m >> a & 1) ? 1.0 - r : 0.0;
      off.push_back(v);
    }
    return SetSpec::ifs(r, off, 20, std::vector<double>(dim, 0.0));
  };
  struct Triple {
    SetSpec E, F;
    int d;
    double dimE, dimF;  // log(branches) / log(1 / ratio)
  };
  auto sim = [](double m, double r) { return std::log(m) / std::log(1.0 / r); };
  const std::vector<Triple> triples{
      {SetSpec::cantor(1.0 / 3, 2, 20, 1.0), corners(0.4, 2), 2, sim(2, 1.0 / 3), sim(4, 0.4)},
      {SetSpec::cantor(0.25, 3, 20, 1.0), corners(0.45, 2), 2, sim(3, 0.25), sim(4, 0.45)},
      {SetSpec::cantor(0.2, 4, 20, 1.0), corners(1.0 / 3, 2), 2, sim(4, 0.2), sim(4, 1.0 / 3)},
      {SetSpec::cantor(0.25, 2, 20, 1.0), corners(0.3, 2), 2, sim(2, 0.25), sim(4, 0.3)},
      {SetSpec::cantor(1.0 / 3, 2, 20, 1.0), corners(0.45, 3), 3, sim(2, 1.0 / 3), sim(8, 0.45)},
      {SetSpec::cantor(0.3, 3, 20, 1.0), corners(0.4, 3), 3, sim(3, 0.3), sim(8, 0.4)},
      {SetSpec::cantor(0.45, 2, 20, 1.0), corners(0.45, 4), 4, sim(2, 0.45), sim(16, 0.45)},
      {corners(0.4, 2), corners(0.4, 4), 4, sim(4, 0.4), sim(16, 0.4)},
      {corners(0.45, 2), corners(0.3, 5), 5, sim(4, 0.45), sim(32, 0.3)},
      {corners(1.0 / 3, 2), corners(0.35, 4), 4, sim(4, 1.0 / 3), sim(16, 0.35)},
  };
  double worst = 0.0;
  for (const auto& t : triples) {
    const auto dE = closed_form_dimensions(t.E), dF = closed_form_dimensions(t.F);
    const int N = static_cast<int>(t.E.ambient_dim);
    const auto b = product_dim_bounds(dE.hausdorff, dE.packing, dF.hausdorff, dF.packing);
    const double g = gamma_star_closed_form(dE.hausdorff, dF.hausdorff, t.d);
    const bool shape = t.d >= 2 * N && b.lower == b.upper && b.upper > t.d;
    const double dim_err = std::max(std::abs(dE.hausdorff - t.dimE), std::abs(dF.hausdorff - t.dimF));
    worst = std::max({worst, std::abs(g - (b.upper - t.d)), dim_err});
    if (!shape) o.pass = false;
  }
  o.pass = o.pass && worst <= 1e-12;
  o.detail = "10 triples, max |gamma* - (dim_rho - d)| and dimension error " + fmt("%.1e", worst);
  return o;
}

// 6. Intersection dimension of the path with a ball.
Outcome intersection_dim() {
  Outcome o;
  const std::pair<const char*, std::pair<double, double>> cases[] = {
      {"dimension_planar_ball.json", {1.8, 2.0}}, {"dimension_line_ball.json", {0.85, 1.0}}};
  for (const auto& [f, range] : cases) {
    const auto c = load_config(f);
    const auto t0 = std::chrono::steady_clock::now();
    const auto b = run_experiment(c);
    const double secs = seconds_since(t0);
    double est = -1.0;
    if (b.complete) est = b.results["intersection_dim"]["ess_sup_estimate"].get<double>();
    const bool ok = b.complete && c.n_paths == 200u && est >= range.first && est <= range.second && secs < 300.0;
    o.pass = o.pass && ok;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += "d=" + std::to_string(c.F->ambient_dim) + " ess sup " + fmt("%.3f", est) + " in [" +
                fmt("%.2f", range.first) + ", " + fmt("%.2f", range.second) + "] " + fmt("%.0fs", secs);
  }
  return o;
}

// 7. Box-counting calibration.
Outcome box_counting() {
  Outcome o;
  auto sample = [](const SetSpec& s, std::size_t n) {
    Rng rng(17);
    return sample_set(s, n, rng);
  };
  const double cantor = box_dimension(sample(SetSpec::cantor(1.0 / 3, 2, 10), 100000)).estimate;
  const double segment = box_dimension(sample(SetSpec::interval(0, 1), 100000)).estimate;
  auto pts = sample(SetSpec::interval(0, 1), 200000);
  for (auto& p : pts) p.push_back(0.0);
  BoxCountOptions opt;
  opt.metric = Metric::Parabolic;
  opt.time_dim = 1;
  const double parabolic = box_dimension(pts, opt).estimate;
  o.pass = std::abs(cantor - std::log(2.0) / std::log(3.0)) <= 0.05 && std::abs(segment - 1.0) <= 0.05 &&
           std::abs(parabolic - 2.0) <= 0.1;
  o.detail = "Cantor " + fmt("%.3f", cantor) + ", segment " + fmt("%.3f", segment) + ", parabolic segment x point " +
             fmt("%.3f", parabolic);
  return o;
}

// 8. Characteristic function of the additive stable process.
Outcome stable_law() {
  Outcome o;
  struct Probe {
    double xi0, xi1;
    std::size_t i0, i1;
  };
  const std::vector<std::vector<double>> grid{{0.0, 0.5, 1.0}, {0.0, 0.25, 1.0}};
  const Probe probes[] = {{0.3, 0.0, 2, 0}, {1.0, 0.0, 1, 1},  {0.0, 1.5, 2, 2}, {0.7, 0.7, 2, 1},
                          {2.0, -1.0, 1, 0}, {0.2, 0.1, 2, 2}, {-1.2, 0.4, 0, 2}, {0.5, 2.5, 1, 2},
                          {3.0, 0.0, 0, 1}, {1.0, 1.0, 2, 2}};
  const std::size_t n = 10000;
  int bad = 0;
  double worst = 0.0;
  for (double alpha : {0.5, 1.0, 1.5}) {
    std::vector<double> s(std::size(probes), 0.0), s2(std::size(probes), 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      const auto path = sample_additive_stable(grid, 2, alpha, derive_seed(303, p));
      for (std::size_t k = 0; k < std::size(probes); ++k) {
        const auto& q = probes[k];
        const auto x = path.at({q.i0, q.i1});
        const double v = std::cos(q.xi0 * x[0] + q.xi1 * x[1]);
        s[k] += v;
        s2[k] += v * v;
      }
    }
    for (std::size_t k = 0; k < std::size(probes); ++k) {
      const auto& q = probes[k];
      const double u1 = grid[0][q.i0] + grid[1][q.i1];
      const double expect = std::exp(-u1 * std::pow(std::hypot(q.xi0, q.xi1), alpha) / 2.0);
      const double mean = s[k] / n;
      const double se = std::sqrt(std::max(1e-12, s2[k] / n - mean * mean) / n);
      const double z = std::abs(mean - expect) / se;
      worst = std::max(worst, z);
      if (z > 3.0) ++bad;
    }
  }
  o.pass = bad == 0;
  o.detail = "30 probes, " + std::to_string(bad) + " outside 3 s.e., worst " + fmt("%.2f", worst) + " s.e.";
  return o;
}

// 9. Codimension probe on both sides of the threshold.
Outcome codimension() {
  Outcome o;
  double total = 0.0;
  for (const char* f : {"codimension_positive.json", "codimension_zero.json"}) {
    const auto c = load_config(f);
    const auto t0 = std::chrono::steady_clock::now();
    const auto b = run_experiment(c);
    const double secs = seconds_since(t0);
    total += secs;
    if (!b.complete) {
      o.pass = false;
      o.detail += std::string(f) + " failed: " + b.error + "; ";
      continue;
    }
    const auto& r = b.results["codimension"];
    const auto hits = r["hits"].get<std::size_t>();
    const bool positive = r["riesz_positive"].get<bool>();
    const bool ok = c.n_paths == 2000u && (positive ? hits >= 5 : hits == 0);
    o.pass = o.pass && ok;
    o.detail += std::string(positive ? "positive side " : "zero side ") + std::to_string(hits) + "/2000 hits " +
                fmt("%.0fs", secs) + "; ";
  }
  o.pass = o.pass && total < 600.0;
  o.detail += "total " + fmt("%.0fs", total);
  return o;
}

// 10. Byte-identical tables on rerun and across thread counts.
Outcome determinism() {
  Outcome o;
  const std::string sets = R"("E": {"type": "interval", "lo": 1, "hi": 2}, "seed": 8,)";
  const std::string sched = R"("refinement_schedule": {"h0": 0.5, "factor": 0.5, "count": 4},)";
  const std::vector<std::string> configs{
      R"({"mode": "capacity", "name": "c", )" + sets + sched +
          R"("F": {"type": "cantor", "ratio": 0.3333333333333333, "depth": 12, "origin": -0.5}})",
      R"({"mode": "dimension", "name": "c", )" + sets +
          R"("F": {"type": "ball", "center": [0], "radius": 1}, "epsilon": 0.0625, "n_paths": 20})",
      R"({"mode": "hit", "name": "c", )" + sets +
          R"("F": {"type": "point", "at": [0]}, "epsilon_schedule": [0.5, 0.25, 0.125], "n_paths": 200})",
      R"({"mode": "hit", "name": "c", "seed": 8, "E": {"type": "box", "lo": [1, 1], "hi": [2, 2]},
          "F": {"type": "point", "at": [0, 0]}, "epsilon_schedule": [0.5, 0.25], "n_paths": 50})",
      R"({"mode": "gamma_star", "name": "c", )" + sets + sched +
          R"("F": {"type": "cantor", "ratio": 0.3333333333333333, "depth": 12, "origin": -0.5}, "gammas": [0.2, 0.8]})",
      R"({"mode": "codimension", "name": "c", )" + sets +
          R"("F": {"type": "cantor", "ratio": 0.3333333333333333, "depth": 12, "origin": -0.5},
             "alpha": 0.8, "n": 1, "n_paths": 100, "epsilon": 0.03125,
             "refinement_schedule": {"h0": 0.3333333333333333, "factor": 0.3333333333333333, "count": 4,
                                    "time_floor": 0.03125}})",
      R"({"mode": "full_battery", "name": "c", )" + sets + sched +
          R"("F": {"type": "point", "at": [0]}, "epsilon_schedule": [0.5, 0.25, 0.125], "n_paths": 200,
             "epsilon": 0.0625})",
  };
  int studies = 0, tables = 0;
  for (const auto& text : configs) {
    auto c = parse_config(text);
    std::vector<std::map<std::string, std::string>> runs;
    for (unsigned threads : {1u, 1u, 3u}) {
      c.threads = threads;
      const auto b = run_experiment(c);
      if (!b.complete || b.tables.empty()) {
        o.pass = false;
        o.detail += std::string(to_string(c.mode)) + " incomplete: " + b.error + "; ";
      }
      runs.push_back(b.tables);
    }
    ++studies;
    tables += static_cast<int>(runs.front().size());
    if (runs[0] != runs[1] || runs[0] != runs[2]) {
      o.pass = false;
      o.detail += std::string(to_string(c.mode)) + " differs; ";
    }
  }
  o.detail += std::to_string(studies) + " studies, " + std::to_string(tables) + " CSV tables compared at 1, 1, 3 threads";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* title;
    std::function<Outcome()> run;
    double time_limit;  // seconds, 0 when the criterion times its own parts
  };
  const std::vector<Criterion> criteria{
      {"solver matches brute-force simplex search", solver_oracle, 30},
      {"sheet covariance is the product of minima", sheet_law, 60},
      {"pinned sheet invariants", pinned_sheet, 0},
      {"hitting dichotomy battery", battery, 0},
      {"gamma* closed form equals dim_rho - d", frostman_identity, 0},
      {"intersection dimension with a ball", intersection_dim, 0},
      {"box-counting calibration", box_counting, 0},
      {"additive stable characteristic function", stable_law, 0},
      {"codimension probe on both sides of the threshold", codimension, 0},
      {"deterministic CSV output", determinism, 0},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (criteria[i].time_limit > 0 && secs >= criteria[i].time_limit) {
      o.pass = false;
      o.detail += ", over the " + fmt("%.0fs", criteria[i].time_limit) + " limit";
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %zu: %s | %s | %.1fs\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].title,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
