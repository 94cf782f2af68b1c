#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "thermocap/hitting.hpp"

using namespace thermocap;

namespace {

// Brute-force distance to a finite-depth IFS through its cylinder list.
double cylinder_distance(const SetSpec& F, const std::vector<double>& x) {
  const auto& k = std::get<SelfSimilarIFS>(F.kind);
  const auto [corners, width] = ifs_cylinders(k, 1u << 22);
  double best = kInfinity;
  for (const auto& c : corners) best = std::min(best, std::sqrt(detail::box_gap2(x, c, width)));
  return best;
}

std::vector<double> halving(int from, int to) {
  std::vector<double> e;
  for (int k = from; k <= to; ++k) e.push_back(std::ldexp(1.0, -k));
  return e;
}

}  // namespace

TEST(SetDistance, Shapes) {
  const std::vector<double> x{3.0, 4.0};
  EXPECT_DOUBLE_EQ(set_distance(SetSpec::point({0, 0}), x), 5.0);
  EXPECT_DOUBLE_EQ(set_distance(SetSpec::ball({0, 0}, 2.0), x), 3.0);
  EXPECT_DOUBLE_EQ(set_distance(SetSpec::box({0, 0}, {3, 1}), x), 3.0);
  EXPECT_DOUBLE_EQ(set_distance(SetSpec::box({0, 0}, {3, 1}), x, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(set_distance(SetSpec::union_of({SetSpec::point({0, 0}), SetSpec::point({3, 3})}), x), 1.0);
  EXPECT_EQ(set_distance(SetSpec::points({}, 2), x), kInfinity);
}

TEST(SetDistance, IfsMatchesCylinderEnumeration) {
  const auto cantor = SetSpec::cantor(1.0 / 3, 2, 9, -0.5);
  const auto dust = SetSpec::ifs(1.0 / 3, {{0, 0}, {2.0 / 3, 0}, {1.0 / 3, 2.0 / 3}}, 6, {0.1, -0.2}, 2.0);
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    const std::vector<double> x1{rng.uniform(-1.5, 1.5)};
    EXPECT_NEAR(set_distance(cantor, x1), cylinder_distance(cantor, x1), 1e-14);
    const std::vector<double> x2{rng.uniform(-1, 3), rng.uniform(-1, 3)};
    EXPECT_NEAR(set_distance(dust, x2), cylinder_distance(dust, x2), 1e-14);
    const double cut = 0.05;
    EXPECT_NEAR(set_distance(dust, x2, cut), std::min(cut, cylinder_distance(dust, x2)), 1e-14);
  }
}

TEST(Wilson, KnownValues) {
  // Reference bounds from statsmodels' proportion_confint(method="wilson").
  const auto [c, h] = wilson_interval(50, 100);
  EXPECT_NEAR(c - h, 0.4038315303659956, 1e-6);
  EXPECT_NEAR(c + h, 0.5961684696340044, 1e-6);
  const auto [c0, h0] = wilson_interval(0, 100);
  EXPECT_NEAR(c0 - h0, 0.0, 1e-12);
  EXPECT_NEAR(c0 + h0, 0.03699349820698569, 1e-6);
  EXPECT_THROW(wilson_interval(3, 2), Error);
}

TEST(LazySheet, CovarianceMatchesProductOfMinima) {
  // Points at levels 1 and 2 of [1,2]^2 reached through refinement.
  const std::size_t n = 20000;
  const double pts[][2] = {{1.5, 1.5}, {2.0, 2.0}, {1.5, 1.0}, {1.25, 1.75}};
  double s[4][4] = {};
  for (std::size_t p = 0; p < n; ++p) {
    LazyRectSheet sh({1, 1}, {2, 2}, 1, derive_seed(9, p));
    const auto w = sh.root_corners();
    const auto m1 = sh.refine(0, 0, 0, w);
    const std::array<LazyRectSheet::Vec, 4> tl{m1[2], m1[4], w[2], m1[1]};  // cell (0,1) at level 1
    const auto m2 = sh.refine(1, 0, 1, tl);
    const double v[4] = {sh.full(1, 1, 1, m1[4])[0], sh.full(0, 1, 1, w[3])[0], sh.full(1, 1, 0, m1[0])[0],
                         sh.full(2, 1, 3, m2[4])[0]};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) s[i][j] += v[i] * v[j];
  }
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double expect = std::min(pts[i][0], pts[j][0]) * std::min(pts[i][1], pts[j][1]);
      // Sample covariance of Gaussians: sd sqrt((s_ii s_jj + s_ij^2) / n).
      const double sd = std::sqrt((pts[i][0] * pts[i][1] * pts[j][0] * pts[j][1] + expect * expect) / n);
      EXPECT_NEAR(s[i][j] / n, expect, 4.0 * sd) << i << ' ' << j;
    }
}

TEST(LazySheet, EdgeValuesAgreeAcrossNeighbouringCells) {
  LazyRectSheet sh({1, 1}, {3, 2}, 3, 5);
  const auto w = sh.root_corners();
  const auto m1 = sh.refine(0, 0, 0, w);
  // Cells (0,0) and (1,0) at level 1 share the vertical edge x = 1/2.
  const std::array<LazyRectSheet::Vec, 4> left{w[0], m1[0], m1[2], m1[4]};
  const std::array<LazyRectSheet::Vec, 4> right{m1[0], w[1], m1[4], m1[3]};
  const auto a = sh.refine(1, 0, 0, left), b = sh.refine(1, 1, 0, right);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(a[3][c], b[2][c]);
}

TEST(HitProb, GaussianTailExamples) {
  const auto E = SetSpec::interval(1, 2);
  const auto big = estimate_hit_prob(E, SetSpec::ball({0}, 10.0), {0.5, 0.25}, 500, 1);
  EXPECT_GE(big.rates[1], 0.99);
  const auto far = estimate_hit_prob(E, SetSpec::ball({100}, 0.1), {0.5, 0.25}, 500, 1);
  EXPECT_LE(far.rates[0], 0.01);
  const auto none = estimate_hit_prob(E, SetSpec::points({}, 1), {0.5, 0.25}, 100, 1);
  EXPECT_EQ(none.rates[0], 0.0);
  EXPECT_EQ(none.rates[1], 0.0);
}

TEST(HitProb, ValidationErrors) {
  const auto E = SetSpec::interval(1, 2);
  const auto F = SetSpec::point({0});
  auto kind = [&](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  HitOptions coarse;
  coarse.resolution = 0.1;
  EXPECT_EQ(kind([&] { estimate_hit_prob(E, F, {0.5, 0.25}, 10, 1, coarse); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind([&] { estimate_hit_prob(E, F, {0.25, 0.5}, 10, 1); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind([&] { estimate_hit_prob(E, F, {}, 10, 1); }), ErrorKind::InvalidConfig);
}

TEST(HitProb, PointTargetOneParameterMatchesReflection) {
  // P(BM on [1,2] crosses 0) = 1/2 (arcsine law); finite epsilon adds mass.
  const auto h = estimate_hit_prob(SetSpec::interval(1, 2), SetSpec::point({0}), halving(3, 6), 4000, 3);
  EXPECT_NEAR(h.rates.back(), 0.5, 0.035);
  for (std::size_t k = 1; k < h.rates.size(); ++k) EXPECT_LE(h.rates[k], h.rates[k - 1]);
}

TEST(HitProb, DeterministicAcrossThreads) {
  HitOptions one, four;
  four.threads = 4;
  for (const auto& E : {SetSpec::interval(1, 2), SetSpec::box({1, 1}, {2, 2}), SetSpec::box({1, 1, 1}, {1.5, 1.5, 1.5})}) {
    const auto F = SetSpec::point(std::vector<double>(3, 0.0));
    const auto a = estimate_hit_prob(E, F, {0.5, 0.25}, 64, 8, one);
    const auto b = estimate_hit_prob(E, F, {0.5, 0.25}, 64, 8, four);
    EXPECT_EQ(a.path_min_distance, b.path_min_distance);
    EXPECT_EQ(a.hits, b.hits);
  }
}

TEST(HitProb, LazyRectAgreesWithFullLattice) {
  // Same law, different sampling: rates agree statistically.
  const auto F = SetSpec::ball({0.3, -0.2}, 0.2);
  const std::vector<double> eps{0.5, 0.25};
  const auto lazy = estimate_hit_prob(SetSpec::box({1, 1}, {2, 2}), F, eps, 3000, 2);
  EXPECT_EQ(lazy.engine, HitEngine::LazyRect);
  // A union forces the full-lattice engine on the same rectangle.
  const auto E2 = SetSpec::union_of({SetSpec::box({1, 1}, {2, 1.5}), SetSpec::box({1, 1.5}, {2, 2})});
  const auto full = estimate_hit_prob(E2, F, eps, 3000, 2);
  EXPECT_EQ(full.engine, HitEngine::Lattice);
  for (std::size_t k = 0; k < eps.size(); ++k)
    EXPECT_NEAR(lazy.rates[k], full.rates[k], 2.5 * (lazy.wilson_halfwidth[k] + full.wilson_halfwidth[k]) / 2.0);
}

TEST(HitProb, HalfwidthsScaleWithBudget) {
  const auto E = SetSpec::interval(1, 2);
  const auto F = SetSpec::point({0});
  const auto a = estimate_hit_prob(E, F, {0.25}, 500, 6);
  const auto b = estimate_hit_prob(E, F, {0.25}, 2000, 6);
  const double ratio = a.wilson_halfwidth[0] / b.wilson_halfwidth[0];
  EXPECT_NEAR(ratio, 2.0, 0.4);
}

TEST(HitProb, CsvSchema) {
  const auto h = estimate_hit_prob(SetSpec::interval(1, 2), SetSpec::point({0}), {0.5, 0.25}, 20, 1);
  std::ostringstream os;
  write_hit_csv(os, h);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "epsilon,rate,wilson_halfwidth");
}

TEST(LazySearch, PrunedMatchesUnprunedBuckets) {
  const auto F = SetSpec::point({0, 0, 0});
  const auto thr = halving(1, 5);
  const std::vector<double> asc(thr.rbegin(), thr.rend());
  for (std::uint64_t p = 0; p < 60; ++p) {
    LazyRectSheet a({1, 1}, {2, 2}, 3, derive_seed(4, p)), b({1, 1}, {2, 2}, 3, derive_seed(4, p));
    const auto pruned = lazy_min_distance(a, 7, F, asc, 3.0);
    const auto full = lazy_min_distance(b, 7, F, asc, 1e9);
    EXPECT_LE(pruned.points, full.points);
    for (double t : asc) EXPECT_EQ(pruned.min_distance < t, full.min_distance < t) << p << ' ' << t;
  }
}

namespace {

HitEstimate synthetic(const std::vector<double>& rates, std::size_t n) {
  HitEstimate h;
  h.epsilon_schedule = halving(1, static_cast<int>(rates.size()));
  h.n_paths = n;
  for (double r : rates) {
    const auto k = static_cast<std::size_t>(std::llround(r * n));
    h.hits.push_back(k);
    h.rates.push_back(static_cast<double>(k) / n);
    h.wilson_halfwidth.push_back(wilson_interval(k, n).second);
  }
  return h;
}

std::vector<double> curve(double P, double C, double theta) {
  std::vector<double> r;
  for (double e : halving(1, 7)) r.push_back(P + C * std::pow(e, theta));
  return r;
}

}  // namespace

TEST(HitTrend, PlateauIsPositive) {
  const auto t = classify_hit_trend(synthetic(curve(0.5, 0.4, 1.0), 2000));
  EXPECT_EQ(t.trend, HitTrend::Positive);
  EXPECT_NEAR(t.floor, 0.5, 0.02);
  EXPECT_NEAR(t.decay_exponent, 1.0, 0.2);
  EXPECT_GT(t.plateau_gain, 9.0);
}

TEST(HitTrend, PowerLawIsVanishing) {
  for (double theta : {0.3, 1.0}) {
    const auto t = classify_hit_trend(synthetic(curve(0.0, 0.9, theta), 2000));
    EXPECT_EQ(t.trend, HitTrend::Vanishing) << theta;
    EXPECT_EQ(t.floor, 0.0);
    EXPECT_NEAR(t.decay_exponent, theta, 0.05) << theta;
  }
  EXPECT_EQ(classify_hit_trend(synthetic(std::vector<double>(7, 0.0), 2000)).trend, HitTrend::Vanishing);
}

TEST(HitTrend, FloorWithinNoiseIsUndetermined) {
  const auto t = classify_hit_trend(synthetic(std::vector<double>(7, 0.004), 2000));
  EXPECT_GT(t.floor, 0.0);
  EXPECT_EQ(t.trend, HitTrend::Undetermined);
  EXPECT_EQ(classify_hit_trend(synthetic({0.5, 0.4}, 2000)).trend, HitTrend::Undetermined);
}

TEST(HitTrend, FlatCurveIsPositive) {
  const auto t = classify_hit_trend(synthetic(std::vector<double>(7, 0.5), 2000));
  EXPECT_EQ(t.trend, HitTrend::Positive);
  EXPECT_NEAR(t.floor, 0.5, 1e-12);
}

TEST(Consistency, VerdictTable) {
  const auto plateau = synthetic(curve(0.5, 0.4, 1.0), 2000);
  const auto decay = synthetic(curve(0.0, 0.9, 0.5), 2000);
  TrendReport pos, zero, und;
  pos.trend = CapacityTrend::Positive;
  zero.trend = CapacityTrend::Zero;
  EXPECT_EQ(capacity_consistency_check(plateau, pos).verdict, Verdict::ConsistentHits);
  EXPECT_EQ(capacity_consistency_check(decay, zero).verdict, Verdict::ConsistentNoHit);
  EXPECT_EQ(capacity_consistency_check(plateau, zero).verdict, Verdict::Inconsistent);
  EXPECT_EQ(capacity_consistency_check(decay, pos).verdict, Verdict::Inconsistent);
  EXPECT_EQ(capacity_consistency_check(decay, und).verdict, Verdict::Inconsistent);
  const auto v = capacity_consistency_check(decay, zero);
  EXPECT_EQ(v.capacity.trend, CapacityTrend::Zero);
  EXPECT_EQ(v.hit.trend, HitTrend::Vanishing);
  EXPECT_STREQ(to_string(v.verdict), "Consistent-NoHit");
}

TEST(Consistency, SegmentAndPointHits) {
  const auto E = SetSpec::interval(1, 2), F = SetSpec::point({0});
  const auto hit = estimate_hit_prob(E, F, halving(1, 5), 1000, 8);
  const auto cap = capacity_refinement_study(E, F, 0.0, parabolic_schedule(0.5, 0.5, 5));
  EXPECT_EQ(capacity_consistency_check(hit, cap.trend).verdict, Verdict::ConsistentHits);
}

TEST(IntersectionDim, SegmentInsideInterval) {
  const auto st = estimate_intersection_dim(SetSpec::interval(1, 2), SetSpec::ball({0}, 1.0), 1.0 / 32, 20, 3);
  ASSERT_FALSE(st.per_path_dims.empty());
  EXPECT_GE(st.ess_sup_estimate, 0.85);
  EXPECT_LE(st.ess_sup_estimate, 1.0);
  double mx = 0.0;
  for (const auto& r : st.per_path_dims) mx = std::max(mx, r.estimate);
  EXPECT_EQ(st.ess_sup_estimate, mx);
  EXPECT_EQ(st.path_ids.size(), st.per_path_dims.size());
}

TEST(IntersectionDim, PointTargetIsZeroDimensional) {
  const auto st = estimate_intersection_dim(SetSpec::interval(1, 2), SetSpec::point({0}), 1.0 / 32, 60, 5);
  EXPECT_GT(st.n_hitting, 0u);
  EXPECT_FALSE(st.per_path_dims.empty());
  EXPECT_LE(st.ess_sup_estimate, 0.2);
}

TEST(IntersectionDim, NoHitsIsFlagged) {
  const auto st = estimate_intersection_dim(SetSpec::interval(1, 2), SetSpec::ball({100}, 0.1), 1.0 / 16, 10, 1);
  EXPECT_TRUE(st.no_hits);
  EXPECT_TRUE(st.per_path_dims.empty());
  EXPECT_EQ(st.ess_sup_estimate, 0.0);
  EXPECT_TRUE(estimate_intersection_dim(SetSpec::interval(1, 2), SetSpec::points({}, 1), 0.1, 5, 1).no_hits);
}

TEST(IntersectionDim, DeterministicAcrossThreads) {
  IntersectionDimOptions o1, o4;
  o4.threads = 4;
  const auto E = SetSpec::interval(1, 2), F = SetSpec::ball({0, 0}, 1.0);
  const auto a = estimate_intersection_dim(E, F, 1.0 / 16, 12, 9, o1);
  const auto b = estimate_intersection_dim(E, F, 1.0 / 16, 12, 9, o4);
  std::ostringstream sa, sb;
  write_intersection_dim_csv(sa, a);
  write_intersection_dim_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')), "path_id,dim_estimate");
}

TEST(Codimension, EmptyTargetAndValidation) {
  CodimensionOptions o;
  o.schedule = parabolic_schedule(0.5, 0.5, 3);
  const auto E = SetSpec::interval(1, 2);
  const auto r = codimension_probe(E, SetSpec::points({}, 1), 0.8, 1, 50, 1, o);
  EXPECT_EQ(r.hits, 0u);
  EXPECT_EQ(r.hit_rate, 0.0);
  EXPECT_NEAR(r.gamma, 0.2, 1e-12);
  const auto F = SetSpec::point({0});
  EXPECT_THROW(codimension_probe(E, F, 2.0, 1, 10, 1, o), Error);
  EXPECT_THROW(codimension_probe(E, F, 1.0, 1, 10, 1, o), Error);
  auto bad = o;
  bad.m = 1.0;
  EXPECT_THROW(codimension_probe(E, F, 0.5, 1, 10, 1, bad), Error);
}

TEST(Codimension, ThickTargetIsHitByBoth) {
  // F = [-1, 1] in d = 1 with alpha = 0.5: both processes sit in F often.
  CodimensionOptions o;
  o.epsilon = 1.0 / 16;
  o.schedule = parabolic_schedule(0.5, 0.5, 3);
  const auto r = codimension_probe(SetSpec::interval(1, 2), SetSpec::interval(-1, 1), 0.5, 1, 200, 2, o);
  EXPECT_GT(r.hit_rate, 0.2);
  EXPECT_TRUE(r.riesz_positive);
}
