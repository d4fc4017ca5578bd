#include <gtest/gtest.h>

#include <cmath>

#include "rootseg/cmaes.hpp"
#include "rootseg/frangi_tuning.hpp"
#include "rootseg/synth.hpp"

using namespace rootseg;

namespace {

double sphere(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return s;
}

CmaConfig sphere_config(int n, std::uint64_t seed = 1) {
  CmaConfig c;
  c.dimension = n;
  c.initial_mean.assign(n, 3.0);
  c.initial_sigma = 1.0;
  c.max_evaluations = 5000;
  c.seed = seed;
  return c;
}

RasterImage mask_with(int n_on, int offset) {
  RasterImage m(4, 10, 1);
  for (int i = 0; i < n_on; ++i) m.data()[offset + i] = 1;
  return m;
}

}  // namespace

TEST(CmaConfig, DefaultPopulation) {
  CmaConfig c;
  c.dimension = 6;
  EXPECT_EQ(c.lambda(), 4 + static_cast<int>(std::floor(3 * std::log(6.0))));
  c.population_size = 12;
  EXPECT_EQ(c.lambda(), 12);
}

TEST(CmaConfig, ValidationErrors) {
  CmaConfig c;
  c.dimension = 2;
  c.initial_mean = {0.0};
  EXPECT_THROW(cmaes_minimize(sphere, c), std::invalid_argument);
  c.initial_mean = {0.0, 0.0};
  c.initial_sigma = 0;
  EXPECT_THROW(cmaes_minimize(sphere, c), std::invalid_argument);
  c.initial_sigma = 1;
  c.bounds = std::vector<std::pair<double, double>>{{0, 1}, {2, 2}};
  EXPECT_THROW(cmaes_minimize(sphere, c), std::invalid_argument);
}

TEST(Cmaes, FiveDimensionalSphere) {
  auto r = cmaes_minimize(sphere, sphere_config(5));
  EXPECT_LT(r.best_fitness, 1e-12);
  EXPECT_LE(r.evaluations_used, 5000);
  for (double v : r.best_point) EXPECT_LT(std::abs(v), 1e-6);
}

TEST(Cmaes, OneDimensionalQuadratic) {
  CmaConfig c;
  c.dimension = 1;
  c.initial_mean = {-4.0};
  c.initial_sigma = 1.0;
  c.max_evaluations = 2000;
  auto r = cmaes_minimize([](const std::vector<double>& x) { return (x[0] - 2) * (x[0] - 2); }, c);
  EXPECT_NEAR(r.best_point[0], 2.0, 1e-6);
}

TEST(Cmaes, ConstantObjectiveUsesWholeBudget) {
  CmaConfig c = sphere_config(3);
  c.max_evaluations = 200;
  auto r = cmaes_minimize([](const std::vector<double>&) { return 7.0; }, c);
  EXPECT_EQ(r.best_fitness, 7.0);
  EXPECT_EQ(r.evaluations_used, 200);
}

TEST(Cmaes, ZeroBudgetReturnsInitialPoint) {
  CmaConfig c = sphere_config(3);
  c.max_evaluations = 0;
  auto r = cmaes_minimize(sphere, c);
  EXPECT_EQ(r.evaluations_used, 0);
  EXPECT_EQ(r.best_point, c.initial_mean);
}

TEST(Cmaes, HistoryIsMonotoneAndEndsAtBest) {
  auto r = cmaes_minimize(sphere, sphere_config(4, 9));
  ASSERT_FALSE(r.history.empty());
  for (std::size_t i = 1; i < r.history.size(); ++i)
    EXPECT_LE(r.history[i].best_fitness, r.history[i - 1].best_fitness);
  EXPECT_EQ(r.history.back().best_fitness, r.best_fitness);
}

TEST(Cmaes, DeterministicUnderSeed) {
  auto a = cmaes_minimize(sphere, sphere_config(5, 3));
  auto b = cmaes_minimize(sphere, sphere_config(5, 3));
  EXPECT_EQ(a.best_point, b.best_point);
  EXPECT_EQ(a.best_fitness, b.best_fitness);
  EXPECT_EQ(a.evaluations_used, b.evaluations_used);
  auto c = cmaes_minimize(sphere, sphere_config(5, 4));
  EXPECT_NE(a.best_point, c.best_point);
}

// Rank-based selection: a strictly increasing transform of the objective
// yields the same sequence of evaluated candidates.
TEST(Cmaes, InvariantUnderMonotoneTransform) {
  std::vector<std::vector<double>> seen_f, seen_g;
  CmaConfig c = sphere_config(4, 5);
  c.max_evaluations = 600;
  cmaes_minimize([&](const std::vector<double>& x) { seen_f.push_back(x); return sphere(x); }, c);
  cmaes_minimize([&](const std::vector<double>& x) { seen_g.push_back(x); return std::pow(sphere(x), 3.0); }, c);
  EXPECT_EQ(seen_f, seen_g);
}

TEST(Cmaes, BoundsClipCandidates) {
  CmaConfig c = sphere_config(2);
  c.initial_mean = {0.5, 0.5};
  c.bounds = std::vector<std::pair<double, double>>{{0.2, 1.0}, {0.3, 1.0}};
  c.max_evaluations = 400;
  auto r = cmaes_minimize(
      [&](const std::vector<double>& x) {
        EXPECT_GE(x[0], 0.2);
        EXPECT_GE(x[1], 0.3);
        EXPECT_LE(x[0], 1.0);
        return sphere(x);
      },
      c);
  EXPECT_NEAR(r.best_point[0], 0.2, 1e-9);
  EXPECT_NEAR(r.best_point[1], 0.3, 1e-9);
}

TEST(Cmaes, NonFiniteValuesRankedLastWithoutCrash) {
  CmaConfig c = sphere_config(3);
  c.max_evaluations = 1500;
  auto r = cmaes_minimize(
      [](const std::vector<double>& x) {
        return x[0] > 2.5 ? std::numeric_limits<double>::quiet_NaN() : sphere(x);
      },
      c);
  EXPECT_GT(r.nonfinite_evaluations, 0);
  EXPECT_TRUE(std::isfinite(r.best_fitness));
  EXPECT_LT(r.best_fitness, 1e-6);
}

TEST(FrangiObjective, PerfectAndEmptyPredictions) {
  std::vector<RasterImage> truths{mask_with(5, 0), mask_with(7, 3)};
  EXPECT_DOUBLE_EQ(mean_f1_loss(truths, truths), 0.0);
  std::vector<RasterImage> empty{RasterImage(4, 10, 1), RasterImage(4, 10, 1)};
  EXPECT_DOUBLE_EQ(mean_f1_loss(empty, truths), 1.0);
}

TEST(FrangiObjective, MeanOfTwoImages) {
  // Overlap 2 of 5 -> F1 0.4; overlap 3 of 5 -> F1 0.6.
  std::vector<RasterImage> truths{mask_with(5, 0), mask_with(5, 0)};
  std::vector<RasterImage> preds{mask_with(5, 3), mask_with(5, 2)};
  EXPECT_NEAR(mean_f1_loss(preds, truths), 0.5, 1e-12);
}

TEST(FrangiObjective, EmptyTruthsSkippedOrRejected) {
  std::vector<RasterImage> truths{mask_with(5, 0), RasterImage(4, 10, 1)};
  std::vector<RasterImage> preds{mask_with(5, 0), mask_with(3, 10)};
  EXPECT_DOUBLE_EQ(mean_f1_loss(preds, truths), 0.0);
  std::vector<RasterImage> none{RasterImage(4, 10, 1)};
  EXPECT_THROW(mean_f1_loss(none, none), std::invalid_argument);
}

TEST(FrangiObjective, DatasetOfEmptyMasksIsUndefined) {
  SceneConfig c;
  c.root_count_min = c.root_count_max = 0;
  c.height = c.width = 48;
  auto [img, mask] = generate_scene(c);
  std::vector<ImagePair> ds{{img, mask}};
  EXPECT_THROW(frangi_objective(ds, FrangiParams{}), std::invalid_argument);
}

TEST(FrangiSearchSpace, DecodeStaysLegalAndEncodeInverts) {
  FrangiSearchSpace s;
  for (double u : {-1.0, 0.0, 0.3, 1.0, 2.0}) {
    auto p = s.decode(std::vector<double>(6, u));
    EXPECT_NO_THROW(p.validate());
  }
  FrangiParams p;
  p.sigmas = {1.5, 2.5, 3.5};
  p.beta = 0.8;
  p.c = 20;
  p.vesselness_threshold = 0.3;
  p.min_component_size = 60;
  auto q = s.decode(s.encode(p));
  ASSERT_EQ(q.sigmas.size(), 3u);
  EXPECT_NEAR(q.sigmas[0], 1.5, 1e-9);
  EXPECT_NEAR(q.sigmas[2], 3.5, 1e-9);
  EXPECT_NEAR(q.beta, 0.8, 1e-9);
  EXPECT_NEAR(q.c, 20, 1e-9);
  EXPECT_NEAR(q.vesselness_threshold, 0.3, 1e-9);
  EXPECT_EQ(q.min_component_size, 60);
}
