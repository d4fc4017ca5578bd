#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "rootseg/frangi.hpp"
#include "rootseg/synth.hpp"
#include "test_util.hpp"

using namespace rootseg;
using rootseg::testing::random_image;
using rootseg::testing::random_mask;

namespace {

RasterImage bar_image(int h, int w, int row0, int thickness, float base, float bright) {
  RasterImage img(h, w, 1, base);
  for (int r = row0; r < row0 + thickness; ++r)
    for (int c = 0; c < w; ++c) img(r, c) = bright;
  return img;
}

// Independent labelling: repeated BFS with an explicit queue.
std::vector<int> component_sizes(const RasterImage& m) {
  const int H = m.height(), W = m.width();
  std::vector<int> seen(static_cast<std::size_t>(H) * W, 0), sizes;
  for (int r0 = 0; r0 < H; ++r0)
    for (int c0 = 0; c0 < W; ++c0) {
      if (seen[r0 * W + c0] || m(r0, c0) < 0.5f) continue;
      std::vector<std::pair<int, int>> q{{r0, c0}};
      seen[r0 * W + c0] = 1;
      for (std::size_t i = 0; i < q.size(); ++i) {
        auto [r, c] = q[i];
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            int rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= H || cc >= W || seen[rr * W + cc] || m(rr, cc) < 0.5f) continue;
            seen[rr * W + cc] = 1;
            q.push_back({rr, cc});
          }
      }
      sizes.push_back(static_cast<int>(q.size()));
    }
  return sizes;
}

}  // namespace

TEST(Hessian, ConstantImageGivesZeroField) {
  RasterImage img(30, 30, 1, 100.f);
  auto h = gaussian_hessian(img, 2.0);
  for (auto* m : {&h.hxx, &h.hxy, &h.hyy})
    for (double v : m->data()) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(Hessian, LinearRampHasZeroInteriorSecondDerivatives) {
  RasterImage img(60, 60, 1);
  for (int r = 0; r < 60; ++r)
    for (int c = 0; c < 60; ++c) img(r, c) = static_cast<float>(0.7 * r + 1.3 * c);
  const double sigma = 2.0;
  auto h = gaussian_hessian(img, sigma);
  const int m = static_cast<int>(std::ceil(4 * sigma)) + 1;
  for (int r = m; r < 60 - m; ++r)
    for (int c = m; c < 60 - m; ++c) {
      EXPECT_NEAR(h.hxx(r, c), 0.0, 1e-6);
      EXPECT_NEAR(h.hxy(r, c), 0.0, 1e-6);
      EXPECT_NEAR(h.hyy(r, c), 0.0, 1e-6);
    }
}

// A Gaussian blob of width s smoothed at scale sigma is a Gaussian of variance
// s^2 + sigma^2; its second x-derivative at the centre is -A s^2 / (s^2+sigma^2)^2.
TEST(Hessian, GaussianBlobMatchesClosedForm) {
  const int N = 101, c0 = 50;
  const double A = 100, s = 4, sigma = 3;
  RasterImage img(N, N, 1);
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c)
      img(r, c) = static_cast<float>(A * std::exp(-((r - c0) * (r - c0) + (c - c0) * (c - c0)) / (2 * s * s)));
  auto h = gaussian_hessian(img, sigma);
  const double v = s * s + sigma * sigma;
  const double expected = -A * s * s / (v * v) * sigma * sigma;
  EXPECT_NEAR(h.hxx(c0, c0), expected, 0.01 * std::abs(expected));
  EXPECT_NEAR(h.hyy(c0, c0), expected, 0.01 * std::abs(expected));
  EXPECT_NEAR(h.hxy(c0, c0), 0.0, 1e-6);
}

TEST(Hessian, RejectsColourInput) {
  EXPECT_THROW(gaussian_hessian(RasterImage(10, 10, 3), 1.0), std::invalid_argument);
}

TEST(Vesselness, ZeroFieldGivesZero) {
  RasterImage img(20, 20, 1, 3.f);
  for (float v : vesselness(gaussian_hessian(img, 1.5), 0.5, 15).data()) EXPECT_EQ(v, 0.f);
}

TEST(Vesselness, DarkRidgeGivesZero) {
  auto img = bar_image(40, 40, 18, 4, 200.f, 50.f);
  auto v = vesselness(gaussian_hessian(img, 2.0), 0.5, 15);
  for (int c = 0; c < 40; ++c) EXPECT_EQ(v(19, c), 0.f);
}

TEST(Vesselness, OutputInUnitInterval) {
  auto img = random_image(40, 40, 1, 3);
  for (float v : vesselness(gaussian_hessian(img, 1.0), 0.5, 15).data()) {
    EXPECT_GE(v, 0.f);
    EXPECT_LE(v, 1.f);
  }
}

// The bar centre line responds more strongly than pixels well off the bar,
// checked against a per-pixel eigen-decomposition.
TEST(Vesselness, BrightBarCentreDominates) {
  auto img = bar_image(64, 64, 30, 4, 50.f, 150.f);
  auto h = gaussian_hessian(img, 2.0);
  auto v = vesselness(h, 0.5, 15);
  int good = 0, total = 0;
  for (int c = 0; c < 64; ++c) {
    const double centre = v(31, c);
    const double off = std::max(v(10, c), v(52, c));
    double l1, l2;
    hessian_eigen(h.hxx(31, c), h.hxy(31, c), h.hyy(31, c), l1, l2);
    EXPECT_LT(l2, 0);
    EXPECT_NEAR(centre, vesselness_at(h.hxx(31, c), h.hxy(31, c), h.hyy(31, c), 0.5, 15), 1e-6);
    ++total;
    if (centre > off) ++good;
  }
  EXPECT_GT(good, 0.99 * total);
}

TEST(Vesselness, InvariantToConstantOffset) {
  auto img = random_image(40, 40, 1, 4, 0, 100);
  auto shifted = img;
  for (auto& v : shifted.data()) v += 37.f;
  auto a = vesselness(gaussian_hessian(img, 1.5), 0.5, 15);
  auto b = vesselness(gaussian_hessian(shifted, 1.5), 0.5, 15);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-4);
}

TEST(Vesselness, MultiscaleIsPixelwiseMax) {
  auto img = random_image(40, 40, 1, 5);
  FrangiParams p;
  auto m = multiscale_vesselness(img, p);
  for (double s : p.sigmas) {
    auto v = vesselness(gaussian_hessian(img, s), p.beta, p.c);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_GE(m.data()[i], v.data()[i]);
  }
}

TEST(ComponentFilter, MinSizeZeroIsIdentity) {
  auto m = random_mask(30, 30, 0.2, 6);
  EXPECT_EQ(component_filter(m, 0), m);
}

TEST(ComponentFilter, SmallBlobRemoved) {
  RasterImage m(20, 20, 1);
  for (int c = 3; c < 8; ++c) m(5, c) = 1;
  for (float v : component_filter(m, 10).data()) EXPECT_EQ(v, 0.f);
}

TEST(ComponentFilter, KeepsOnlyLargeBlob) {
  RasterImage m(30, 30, 1);
  m(1, 1) = m(1, 2) = m(2, 2) = 1;  // 3 pixels
  for (int r = 10; r < 15; ++r)
    for (int c = 10; c < 20; ++c) m(r, c) = 1;  // 50 pixels
  auto out = component_filter(m, 10);
  EXPECT_EQ(out(1, 1), 0.f);
  EXPECT_EQ(component_sizes(out), std::vector<int>{50});
}

TEST(ComponentFilter, DiagonalNeighboursConnect) {
  RasterImage m(10, 10, 1);
  for (int i = 0; i < 6; ++i) m(i, i) = 1;
  EXPECT_EQ(count_root_pixels(component_filter(m, 6)), 6);
}

TEST(ComponentFilter, SurvivorsAllMeetMinSize) {
  auto m = random_mask(60, 60, 0.35, 7);
  auto out = component_filter(m, 12);
  for (int s : component_sizes(out)) EXPECT_GE(s, 12);
  // Removal never adds pixels.
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_LE(out.data()[i], m.data()[i]);
}

TEST(FrangiSegment, ConstantImageIsEmpty) {
  RasterImage img(40, 40, 3, 90.f);
  EXPECT_EQ(count_root_pixels(frangi_segment(img, FrangiParams{})), 0);
}

TEST(FrangiSegment, HugeMinSizeIsEmpty) {
  auto img = bar_image(40, 40, 18, 4, 50.f, 150.f);
  FrangiParams p;
  p.min_component_size = 40 * 40 + 1;
  EXPECT_EQ(count_root_pixels(frangi_segment(img, p)), 0);
}

TEST(FrangiSegment, FindsBrightBar) {
  auto img = bar_image(64, 64, 30, 4, 60.f, 140.f);
  auto mask = frangi_segment(img, FrangiParams{});
  int hit = 0;
  for (int r = 30; r < 34; ++r)
    for (int c = 0; c < 64; ++c) hit += mask(r, c) > 0.5f;
  EXPECT_GE(hit, 0.5 * 4 * 64);
}

TEST(FrangiSegment, OverlapsSyntheticRoots) {
  SceneConfig c;
  c.debris_count_min = c.debris_count_max = 0;
  c.root_count_min = c.root_count_max = 2;
  c.seed = 21;
  auto [img, truth] = generate_scene(c);
  auto pred = frangi_segment(img, FrangiParams{});
  long long both = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) both += truth.data()[i] > 0.5f && pred.data()[i] > 0.5f;
  EXPECT_GE(static_cast<double>(both), 0.5 * count_root_pixels(truth));
}

TEST(FrangiSegment, InvalidParamsThrow) {
  RasterImage img(20, 20, 1);
  FrangiParams p;
  p.sigmas.clear();
  EXPECT_THROW(frangi_segment(img, p), std::invalid_argument);
  p = FrangiParams{};
  p.beta = 0;
  EXPECT_THROW(frangi_segment(img, p), std::invalid_argument);
  p = FrangiParams{};
  p.vesselness_threshold = 1.2;
  EXPECT_THROW(frangi_segment(img, p), std::invalid_argument);
}
