#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "thermocap/geometry.hpp"

using namespace thermocap;

namespace {

ParabolicPoint pp(std::vector<double> t, std::vector<double> x) { return {TimePoint{std::move(t)}, SpacePoint{std::move(x)}}; }

}  // namespace

TEST(ParabolicDistance, Examples) {
  EXPECT_DOUBLE_EQ(parabolic_distance(pp({1}, {0}), pp({1}, {0})), 0.0);
  EXPECT_DOUBLE_EQ(parabolic_distance(pp({1}, {0}), pp({5}, {1})), 2.0);
  // |s - t| = sqrt(5), x = y
  EXPECT_NEAR(parabolic_distance(pp({0, 0}, {3, 3}), pp({1, 2}, {3, 3})), std::pow(5.0, 0.25), 1e-12);
  EXPECT_NEAR(std::pow(5.0, 0.25), 1.4953, 1e-4);
}

TEST(ParabolicDistance, DimensionMismatch) {
  try {
    parabolic_distance(pp({1}, {0}), pp({1, 2}, {0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
  EXPECT_THROW(parabolic_distance(pp({1}, {0}), pp({1}, {0, 0})), Error);
}

TEST(ParabolicDistance, MetricAxiomsOnRandomTriples) {
  Rng rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    auto draw = [&] { return pp({rng.uniform(0, 3), rng.uniform(0, 3)}, {rng.normal(), rng.normal(), rng.normal()}); };
    const auto a = draw(), b = draw(), c = draw();
    const double ab = parabolic_distance(a, b), bc = parabolic_distance(b, c), ac = parabolic_distance(a, c);
    ASSERT_GE(ab, 0.0);
    ASSERT_EQ(ab, parabolic_distance(b, a));
    ASSERT_LE(ac, ab + bc + 1e-12);
    ASSERT_EQ(parabolic_distance(a, a), 0.0);
    ASSERT_GT(ab, 0.0);
  }
}

TEST(SetSpec, Validation) {
  EXPECT_THROW(SetSpec::interval(1, 1), Error);
  EXPECT_THROW(SetSpec::box({0, 1}, {1, 0.5}), Error);
  EXPECT_THROW(SetSpec::cantor(1.2, 2, 3), Error);
  EXPECT_THROW(SetSpec::cantor(0.6, 2, 3), Error);  // first-level images overlap
  EXPECT_THROW(SetSpec::ball({0, 0}, 0.0), Error);
  EXPECT_THROW(SetSpec::union_of({SetSpec::interval(0, 1), SetSpec::box({0, 0}, {1, 1})}), Error);
  EXPECT_NO_THROW(SetSpec::cantor(0.5, 2, 3));  // touching images are allowed
  EXPECT_NO_THROW(SetSpec::points({}, 2));
}

TEST(Discretize, UnitIntervalQuarter) {
  const auto cells = discretize_set(SetSpec::interval(0, 1), 0.25);
  ASSERT_EQ(cells.size(), 4u);
  const double expect[] = {0.125, 0.375, 0.625, 0.875};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(cells[i].rep[0], expect[i], 1e-15);
    EXPECT_NEAR(cells[i].half_diameter, 0.125, 1e-15);
  }
}

TEST(Discretize, CantorDepthTwo) {
  const auto cells = discretize_set(SetSpec::cantor(1.0 / 3, 2, 2), 0.5);
  ASSERT_EQ(cells.size(), 4u);
  // Level-2 intervals [0,1/9], [2/9,1/3], [2/3,7/9], [8/9,1].
  const double lo[] = {0.0, 2.0 / 9, 6.0 / 9, 8.0 / 9};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(cells[i].rep[0], lo[i] + 1.0 / 18, 1e-15);
    EXPECT_NEAR(cells[i].half_diameter, 1.0 / 18, 1e-15);
  }
}

TEST(Discretize, PointAtom) {
  DiscretizeOptions opt;
  opt.atom_radius = 3e-4;
  const auto cells = discretize_set(SetSpec::point({0.5}), 0.1, opt);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0].rep[0], 0.5);
  EXPECT_EQ(cells[0].half_diameter, 3e-4);
  EXPECT_EQ(discretize_set(SetSpec::point({0.5}), 0.1)[0].half_diameter, 1e-6);
}

TEST(Discretize, CellCap) {
  DiscretizeOptions opt;
  opt.max_cells = 1000;
  try {
    discretize_set(SetSpec::box({0, 0}, {1, 1}), 1e-3, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ResourceLimit);
  }
}

TEST(Discretize, Deterministic) {
  const auto spec = SetSpec::ball({0.2, -0.1}, 0.7);
  const auto a = discretize_set(spec, 0.05), b = discretize_set(spec, 0.05);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].rep, b[i].rep);
    EXPECT_EQ(a[i].half_diameter, b[i].half_diameter);
  }
}

TEST(Discretize, BallRepresentativesInsideAndWidthBound) {
  const auto spec = SetSpec::ball({0.0, 0.0, 0.0}, 1.0);
  for (const auto& c : discretize_set(spec, 0.2)) {
    EXPECT_LE(euclidean_norm(c.rep), 1.0 + 1e-12);
    EXPECT_GT(c.half_diameter, 0.0);
    EXPECT_LE(c.half_diameter, 0.2 * std::sqrt(3.0) + 1e-12);
  }
}

namespace {

void expect_cover(const SetSpec& spec, double resolution) {
  const auto cells = discretize_set(spec, resolution);
  Rng rng(11);
  for (const auto& p : sample_set(spec, 3000, rng)) {
    double best = 1e300;
    for (const auto& c : cells) best = std::min(best, euclidean_distance(p, c.rep) - c.half_diameter);
    ASSERT_LE(best, 1e-12);
  }
}

}  // namespace

TEST(Discretize, CoversDenseSamples) {
  expect_cover(SetSpec::interval(1, 2), 0.07);
  expect_cover(SetSpec::box({0, 1}, {1, 1.5}), 0.1);
  expect_cover(SetSpec::cantor(1.0 / 3, 2, 8), 0.01);
  expect_cover(SetSpec::ifs(0.25, {{0, 0}, {0.75, 0}, {0, 0.75}, {0.75, 0.75}}, 4, {-0.5, -0.5}), 0.05);
  expect_cover(SetSpec::ball({0.3, 0.3}, 0.5), 0.08);
  expect_cover(SetSpec::union_of({SetSpec::interval(0, 0.5), SetSpec::cantor(1.0 / 3, 2, 5, 2.0)}), 0.05);
}

TEST(Discretize, RefinementGrowth) {
  for (double res : {0.3, 0.1, 0.037}) {
    const auto box = SetSpec::box({0, 0}, {1, 2});
    EXPECT_GE(discretize_set(box, res / 2).size(), 2 * discretize_set(box, res).size());
  }
  for (int depth = 1; depth < 9; ++depth) {
    const auto a = discretize_set(SetSpec::cantor(0.25, 3, depth), 1.0);
    const auto b = discretize_set(SetSpec::cantor(0.25, 3, depth + 1), 1.0);
    EXPECT_EQ(b.size(), 3 * a.size());
  }
}

TEST(ProductGrid, PairCounts) {
  EXPECT_EQ(build_product_grid(SetSpec::interval(1, 2), SetSpec::point({0}), 0.5, 0.1).size(), 2u);
  EXPECT_EQ(build_product_grid(SetSpec::interval(1, 2), SetSpec::interval(0, 1), 0.25, 0.5).size(), 8u);
  const auto cantor_time = SetSpec::cantor(1.0 / 3, 2, 2, 1.0);
  const auto cantor_space = SetSpec::cantor(1.0 / 3, 2, 2);
  const auto g = build_product_grid(cantor_time, cantor_space, 1.0, 1.0);
  EXPECT_EQ(g.size(), 16u);
  std::set<std::pair<std::size_t, std::size_t>> unique(g.pairs.begin(), g.pairs.end());
  EXPECT_EQ(unique.size(), g.size());
}

TEST(ProductGrid, RejectsNonPositiveTimesAndCap) {
  EXPECT_THROW(build_product_grid(SetSpec::interval(0, 1), SetSpec::point({0}), 0.5, 0.5), Error);
  GridOptions opt;
  opt.max_pairs = 100;
  try {
    build_product_grid(SetSpec::interval(1, 2), SetSpec::interval(0, 1), 0.01, 0.01, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ResourceLimit);
  }
}

TEST(ClosedForm, Dimensions) {
  const auto c = closed_form_dimensions(SetSpec::cantor(1.0 / 3, 2, 5));
  EXPECT_NEAR(c.hausdorff, std::log(2.0) / std::log(3.0), 1e-15);
  EXPECT_NEAR(c.hausdorff, 0.63093, 1e-5);
  EXPECT_EQ(c.packing, c.hausdorff);
  const auto b = closed_form_dimensions(SetSpec::box({0, 0}, {1, 1}));
  EXPECT_EQ(b.hausdorff, 2.0);
  EXPECT_EQ(b.packing, 2.0);
  EXPECT_EQ(closed_form_dimensions(SetSpec::points({{1.0}, {2.0}}, 1)).hausdorff, 0.0);
  try {
    closed_form_dimensions(SetSpec::union_of({SetSpec::interval(0, 1)}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
  }
}
