#include <gtest/gtest.h>

#include <cmath>

#include "rootseg/augment.hpp"
#include "rootseg/dataio.hpp"
#include "rootseg/synth.hpp"
#include "test_util.hpp"

using namespace rootseg;
using rootseg::testing::random_image;
using rootseg::testing::random_mask;

TEST(Normalize, EndpointsAndMidpoint) {
  RasterImage img(1, 3, 1);
  img(0, 0) = 0;
  img(0, 1) = 255;
  img(0, 2) = 127.5f;
  auto n = normalize(img);
  EXPECT_FLOAT_EQ(n(0, 0), -0.5f);
  EXPECT_FLOAT_EQ(n(0, 1), 0.5f);
  EXPECT_NEAR(n(0, 2), 0.0f, 1e-7);
}

TEST(Normalize, DenormalizeInverts) {
  auto img = random_image(20, 20, 3, 1);
  auto back = denormalize(normalize(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.data()[i], img.data()[i], 1e-6 * 255);
}

TEST(Elastic, GammaEndpoints) {
  auto a = ElasticParams::from_gamma(0.0, 1.0);
  EXPECT_DOUBLE_EQ(a.sigma, 15);
  EXPECT_DOUBLE_EQ(a.alpha, 200);
  auto b = ElasticParams::from_gamma(1.0, 1.0);
  EXPECT_DOUBLE_EQ(b.sigma, 60);
  EXPECT_DOUBLE_EQ(b.alpha, 2500);
  EXPECT_DOUBLE_EQ(ElasticParams::from_gamma(0.5, 0.5).alpha, 1350 * 0.5);
}

TEST(Elastic, SampledParametersFollowRanges) {
  Rng rng(3);
  double sum = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto p = sample_elastic(rng);
    EXPECT_GE(p.gamma, 0);
    EXPECT_LT(p.gamma, 1);
    EXPECT_GE(p.alpha_scale, 0.4);
    EXPECT_LT(p.alpha_scale, 1.0);
    EXPECT_NEAR(p.sigma, 15 + p.gamma * 45, 1e-9);
    EXPECT_NEAR(p.alpha, (200 + p.gamma * 2300) * p.alpha_scale, 1e-9);
    EXPECT_DOUBLE_EQ(p.apply_probability, 0.9);
    sum += p.gamma;
  }
  EXPECT_GE(sum / n, 0.48);
  EXPECT_LE(sum / n, 0.52);
}

TEST(Elastic, ZeroAlphaGivesZeroField) {
  Rng rng(4);
  ElasticParams p = ElasticParams::from_gamma(0.3, 1.0);
  p.alpha = 0;
  auto f = make_field(32, 40, p, rng);
  for (float v : f.dy.data()) EXPECT_EQ(v, 0.f);
  for (float v : f.dx.data()) EXPECT_EQ(v, 0.f);
}

TEST(Elastic, DisplacementBoundedByAlpha) {
  Rng rng(5);
  for (int i = 0; i < 5; ++i) {
    auto p = sample_elastic(rng);
    auto f = make_field(64, 64, p, rng);
    for (float v : f.dy.data()) EXPECT_LE(std::abs(v), p.alpha);
    for (float v : f.dx.data()) EXPECT_LE(std::abs(v), p.alpha);
  }
}

TEST(Elastic, SameSeedSameField) {
  Rng a(6), b(6);
  auto p = ElasticParams::from_gamma(0.4, 0.7);
  auto fa = make_field(30, 30, p, a), fb = make_field(30, 30, p, b);
  EXPECT_EQ(fa.dy, fb.dy);
  EXPECT_EQ(fa.dx, fb.dx);
}

TEST(Elastic, LargerSigmaIsSmoother) {
  Rng rng(7);
  Raster<float> ny(96, 96, 1), nx(96, 96, 1);
  for (auto& v : ny.data()) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : nx.data()) v = static_cast<float>(rng.uniform(-1, 1));
  auto roughness = [](const DisplacementField& f) {
    double s = 0;
    for (int r = 0; r < f.dy.height(); ++r)
      for (int c = 1; c < f.dy.width(); ++c) s += std::abs(f.dy(r, c) - f.dy(r, c - 1));
    return s;
  };
  EXPECT_GT(roughness(field_from_noise(ny, nx, 15, 500)), roughness(field_from_noise(ny, nx, 60, 500)));
}

TEST(Warp, ZeroFieldIsIdentity) {
  auto img = random_image(20, 25, 3, 8);
  auto mask = random_mask(20, 25, 0.3, 9);
  DisplacementField f{Raster<float>(20, 25, 1), Raster<float>(20, 25, 1)};
  auto [wi, wm] = warp(img, mask, f);
  EXPECT_EQ(wi, img);
  EXPECT_EQ(wm, mask);
}

TEST(Warp, MaskMatchesNearestNeighbourOracle) {
  auto img = random_image(40, 40, 3, 10);
  auto mask = random_mask(40, 40, 0.4, 11);
  Rng rng(12);
  auto f = make_field(40, 40, ElasticParams::from_gamma(0.2, 0.8), rng);
  auto [wi, wm] = warp(img, mask, f);
  auto refl = [](int i, int n) {
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  };
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 40; ++c) {
      const int y = refl(static_cast<int>(std::lround(r + static_cast<double>(f.dy(r, c)))), 40);
      const int x = refl(static_cast<int>(std::lround(c + static_cast<double>(f.dx(r, c)))), 40);
      ASSERT_EQ(wm(r, c), mask(y, x));
      ASSERT_TRUE(wm(r, c) == 0.f || wm(r, c) == 1.f);
    }
}

TEST(Warp, IntegerShiftMovesImage) {
  auto img = random_image(10, 10, 3, 13);
  DisplacementField f{Raster<float>(10, 10, 1, 1.f), Raster<float>(10, 10, 1, 2.f)};
  auto [wi, wm] = warp(img, RasterImage(10, 10, 1), f);
  EXPECT_FLOAT_EQ(wi(3, 4, 1), img(4, 6, 1));
}

TEST(Warp, DimensionMismatchThrows) {
  DisplacementField f{Raster<float>(10, 10, 1), Raster<float>(10, 10, 1)};
  EXPECT_THROW(warp(RasterImage(10, 10, 3), RasterImage(10, 9, 1), f), std::invalid_argument);
  EXPECT_THROW(warp(RasterImage(10, 11, 3), RasterImage(10, 11, 1), f), std::invalid_argument);
}

// Warping keeps roots: over 100 synthetic tiles the mean relative change in
// root-pixel count stays under 10% and no tile keeps less than half its roots.
// Individual tiles can move by up to about a third as strokes cross the border.
TEST(Warp, RootsSurviveDeformation) {
  SceneConfig c;
  c.height = c.width = 188;
  c.root_count_min = 2;
  c.root_count_max = 3;
  double sum = 0;
  for (int i = 0; i < 100; ++i) {
    c.seed = scene_seed(31, i);
    auto [img, mask] = generate_scene(c);
    Rng rng(derive_seed(99, i));
    auto f = make_field(188, 188, sample_elastic(rng), rng);
    const double before = count_root_pixels(mask);
    const double after = count_root_pixels(warp(img, mask, f).second);
    EXPECT_GT(after, 0.5 * before);
    EXPECT_LT(after, 1.5 * before);
    sum += std::abs(after - before) / before;
  }
  EXPECT_LT(sum / 100, 0.10);
}

TEST(ColorJitter, ZeroMagnitudesAreIdentity) {
  auto img = random_image(16, 16, 3, 14);
  Rng rng(15);
  EXPECT_EQ(color_jitter(img, JitterParams{0, 0, 0, 0}, rng), img);
}

TEST(ColorJitter, BrightnessOnlyScalesConstantImage) {
  RasterImage img(8, 8, 3, 120.f);
  JitterParams p{0.3, 0, 0, 0};
  Rng rng(16), probe(16);
  const double f = probe.uniform(0.7, 1.3);
  auto out = color_jitter(img, p, rng);
  for (float v : out.data()) EXPECT_NEAR(v, std::min(255.0, 120.0 * f), 1e-3);
}

TEST(ColorJitter, OutputAlwaysInRange) {
  auto img = random_image(8, 8, 3, 17);
  Rng rng(18);
  JitterParams p{0.9, 0.9, 0.9, 0.5};
  for (int i = 0; i < 1000; ++i)
    for (float v : color_jitter(img, p, rng).data()) {
      ASSERT_GE(v, 0.f);
      ASSERT_LE(v, 255.f);
    }
}

TEST(ColorJitter, RejectsSingleChannel) {
  Rng rng(19);
  EXPECT_THROW(color_jitter(RasterImage(4, 4, 1), JitterParams{}, rng), std::invalid_argument);
}

TEST(AugmentTile, ReproducibleAndMaskStaysBinary) {
  auto img = random_image(48, 48, 3, 20);
  auto mask = random_mask(48, 48, 0.1, 21);
  Rng a(22), b(22);
  auto x = augment_tile(img, mask, AugmentConfig{}, a);
  auto y = augment_tile(img, mask, AugmentConfig{}, b);
  EXPECT_EQ(x.first, y.first);
  EXPECT_EQ(x.second, y.second);
  for (float v : x.second.data()) EXPECT_TRUE(v == 0.f || v == 1.f);
}
