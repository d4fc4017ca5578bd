#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rootseg/filters.hpp"
#include "rootseg/png_io.hpp"
#include "rootseg/raster.hpp"
#include "rootseg/tiling.hpp"
#include "test_util.hpp"

using namespace rootseg;
using rootseg::testing::random_image;
using rootseg::testing::TempDir;

TEST(Raster, DataLengthMatchesShape) {
  RasterImage img(7, 5, 3);
  EXPECT_EQ(img.size(), 7u * 5u * 3u);
  EXPECT_EQ(img.pixel_count(), 35u);
  EXPECT_THROW(RasterImage(-1, 2), std::invalid_argument);
}

TEST(Raster, GrayIsChannelMean) {
  RasterImage img(1, 1, 3);
  img(0, 0, 0) = 30;
  img(0, 0, 1) = 60;
  img(0, 0, 2) = 90;
  EXPECT_FLOAT_EQ(to_gray(img)(0, 0), 60.f);
}

TEST(MirrorPad, ZeroMarginIsIdentity) {
  auto img = random_image(9, 11, 3, 1);
  EXPECT_EQ(mirror_pad(img, 0), img);
}

TEST(MirrorPad, ReflectsWithoutRepeatingEdge) {
  auto img = random_image(10, 12, 1, 2);
  auto p = mirror_pad(img, 3);
  for (int c = 0; c < img.width(); ++c) {
    EXPECT_EQ(p(3 - 1, c + 3), img(1, c));
    EXPECT_EQ(p(3 - 2, c + 3), img(2, c));
    EXPECT_EQ(p(3 + img.height(), c + 3), img(img.height() - 2, c));
  }
  for (int r = 0; r < img.height(); ++r) EXPECT_EQ(p(r + 3, 0), img(r, 3));
}

TEST(MirrorPad, CropBackIsIdentity) {
  auto img = random_image(20, 17, 3, 3);
  auto p = mirror_pad(img, 8);
  EXPECT_EQ(crop(p, 8, 8, 20, 17), img);
}

TEST(MirrorPad, LargeImageShape) {
  RasterImage img(3991, 1842, 1);
  auto p = mirror_pad(img, 92);
  EXPECT_EQ(p.height(), 4175);
  EXPECT_EQ(p.width(), 2026);
}

TEST(MirrorPad, MarginTooLargeThrows) {
  RasterImage img(5, 8, 1);
  EXPECT_THROW(mirror_pad(img, 5), std::invalid_argument);
  EXPECT_THROW(mirror_pad(img, -1), std::invalid_argument);
  EXPECT_NO_THROW(mirror_pad(img, 4));
}

TEST(TileGrid, SingleTileForExactFit) {
  auto tiles = plan_tile_grid(388, 388, 572, 388);
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0].out_row, 0);
  EXPECT_EQ(tiles[0].out_col, 0);
}

TEST(TileGrid, CeilingCountOnLargeImage) {
  // 1842 rows x 3991 columns: 5 x 11 windows.
  EXPECT_EQ(plan_tile_grid(1842, 3991, 572, 388).size(), 55u);
  EXPECT_EQ(plan_tile_grid(3991, 1842, 572, 388).size(), 55u);
}

TEST(TileGrid, OddDifferenceThrows) {
  EXPECT_THROW(plan_tile_grid(500, 500, 571, 388), std::invalid_argument);
  EXPECT_THROW(plan_tile_grid(500, 500, 388, 388), std::invalid_argument);
}

TEST(TileGrid, SmallerThanWindowNeedsPadding) {
  EXPECT_THROW(plan_tile_grid(300, 500, 572, 388), std::invalid_argument);
}

TEST(TileGrid, CoversEveryPixelInsideBounds) {
  for (auto [h, w] : {std::pair{500, 500}, std::pair{401, 777}, std::pair{388, 1000}}) {
    auto tiles = plan_tile_grid(h, w, 572, 388);
    std::vector<int> hits(static_cast<std::size_t>(h) * w, 0);
    for (const auto& t : tiles) {
      EXPECT_GE(t.out_row, 0);
      EXPECT_GE(t.out_col, 0);
      EXPECT_LE(t.out_row + t.out_size, h);
      EXPECT_LE(t.out_col + t.out_size, w);
      EXPECT_EQ(t.in_row, t.out_row);
      EXPECT_EQ(t.in_col, t.out_col);
      for (int r = 0; r < t.out_size; ++r)
        for (int c = 0; c < t.out_size; ++c) ++hits[static_cast<std::size_t>(t.out_row + r) * w + t.out_col + c];
    }
    long long covered_once = 0, overlap = 0;
    for (int v : hits) {
      EXPECT_GE(v, 1);
      if (v == 1) ++covered_once;
      else ++overlap;
    }
    EXPECT_EQ(covered_once + overlap, static_cast<long long>(h) * w);
  }
}

TEST(ExtractTile, MatchesManualSlice) {
  auto img = random_image(40, 50, 3, 4);
  TileSpec spec{5, 7, 20, 5, 7, 10};
  auto t = extract_tile(img, spec);
  ASSERT_EQ(t.height(), 20);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c)
      for (int k = 0; k < 3; ++k) ASSERT_EQ(t(r, c, k), img(5 + r, 7 + c, k));
}

TEST(ExtractTile, ConstantImageGivesConstantTile) {
  RasterImage img(30, 30, 1, 4.5f);
  auto t = extract_tile(img, TileSpec{0, 0, 20, 0, 0, 10});
  for (float v : t.data()) EXPECT_EQ(v, 4.5f);
}

TEST(ExtractTile, OutOfBoundsThrows) {
  RasterImage img(30, 30, 1);
  EXPECT_THROW(extract_tile(img, TileSpec{15, 0, 20, 15, 0, 10}), std::invalid_argument);
}

TEST(Assemble, SingleTileIsIdentity) {
  auto img = random_image(12, 12, 1, 5);
  EXPECT_EQ(assemble<float>({{TileSpec{0, 0, 16, 0, 0, 12}, img}}), img);
}

TEST(Assemble, LaterTileWinsOnOverlap) {
  RasterImage a(4, 4, 1, 1.f), b(4, 4, 1, 2.f);
  auto out = assemble<float>({{TileSpec{0, 0, 6, 0, 0, 4}, a}, {TileSpec{0, 2, 6, 0, 2, 4}, b}});
  EXPECT_EQ(out.width(), 6);
  EXPECT_EQ(out(0, 1), 1.f);
  EXPECT_EQ(out(0, 2), 2.f);
  EXPECT_EQ(out(3, 3), 2.f);
}

TEST(Assemble, ReportsUncoveredPixels) {
  RasterImage a(4, 4, 1, 1.f);
  EXPECT_THROW(assemble<float>({{TileSpec{0, 0, 6, 0, 0, 4}, a}, {TileSpec{0, 6, 6, 0, 6, 4}, a}}),
               std::runtime_error);
}

// A pixel-local function applied tile by tile equals applying it to the whole image.
TEST(Assemble, PixelwiseFunctionThroughTilesIsExact) {
  auto f = [](float v) { return std::sin(v * 0.01f) * 0.5f + 0.5f; };
  auto img = random_image(123, 97, 1, 6);
  const int in = 40, out = 24, m = 8;
  auto padded = mirror_pad(img, m);
  std::vector<std::pair<TileSpec, RasterImage>> tiles;
  for (const auto& s : plan_tile_grid(img.height(), img.width(), in, out)) {
    auto t = center_crop(extract_tile(padded, s), s);
    for (auto& v : t.data()) v = f(v);
    tiles.emplace_back(s, t);
  }
  auto whole = img;
  for (auto& v : whole.data()) v = f(v);
  EXPECT_EQ(assemble(tiles), whole);
}

TEST(Binarize, AllZeroGivesEmptyMask) {
  RasterImage p(5, 5, 1, 0.f);
  for (float v : binarize(p, 0.5).data()) EXPECT_EQ(v, 0.f);
}

TEST(Binarize, ThresholdIsInclusive) {
  RasterImage p(1, 1, 1, 0.5f);
  EXPECT_EQ(binarize(p, 0.5)(0, 0), 1.f);
}

TEST(Binarize, MatchesLoopAndIsBinary) {
  auto p = random_image(30, 30, 1, 7, 0, 1);
  auto m = binarize(p, 0.37);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(m.data()[i], p.data()[i] >= 0.37f ? 1.f : 0.f);
    EXPECT_TRUE(m.data()[i] == 0.f || m.data()[i] == 1.f);
  }
}

TEST(Binarize, ThresholdOutsideUnitIntervalThrows) {
  RasterImage p(2, 2, 1);
  EXPECT_THROW(binarize(p, 1.5), std::invalid_argument);
  EXPECT_THROW(binarize(p, -0.1), std::invalid_argument);
}

TEST(PngIo, ImageRoundTripIsLossless) {
  TempDir dir("png");
  RasterImage img(13, 21, 3);
  Rng rng(8);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform_int(0, 255));
  write_image((dir / "a.png").string(), img);
  EXPECT_EQ(read_image((dir / "a.png").string()), img);
}

TEST(PngIo, MaskThresholdAbove127) {
  TempDir dir("png");
  RasterImage raw(1, 4, 1);
  raw(0, 0) = 0;
  raw(0, 1) = 127;
  raw(0, 2) = 128;
  raw(0, 3) = 255;
  write_image((dir / "m.png").string(), raw);
  auto m = read_mask((dir / "m.png").string());
  EXPECT_EQ(m(0, 0), 0.f);
  EXPECT_EQ(m(0, 1), 0.f);
  EXPECT_EQ(m(0, 2), 1.f);
  EXPECT_EQ(m(0, 3), 1.f);
}

TEST(PngIo, ProbabilityUses16Bits) {
  TempDir dir("png");
  RasterImage p(1, 3, 1);
  p(0, 0) = 0.f;
  p(0, 1) = 0.5f;
  p(0, 2) = 1.f;
  write_probability((dir / "p.png").string(), p);
  auto raw = detail::read_png_raw((dir / "p.png").string());
  EXPECT_EQ(raw.bit_depth, 16);
  EXPECT_EQ(raw.samples[1], 32768);
  auto q = read_probability((dir / "p.png").string());
  EXPECT_NEAR(q(0, 1), 0.5, 1e-4);
  EXPECT_EQ(q(0, 2), 1.f);
}

TEST(PngIo, MissingFileNamesPath) {
  try {
    read_image("/nonexistent/dir/x.png");
    FAIL();
  } catch (const ImageIoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.png"), std::string::npos);
  }
}

TEST(Filters, GaussianKernelMoments) {
  for (double sigma : {0.7, 1.5, 3.0}) {
    auto g0 = gaussian_kernel(sigma, 0), g1 = gaussian_kernel(sigma, 1), g2 = gaussian_kernel(sigma, 2);
    const int R = static_cast<int>(g0.size() / 2);
    double s0 = 0, m1 = 0, s2 = 0, m2 = 0;
    for (int i = -R; i <= R; ++i) {
      s0 += g0[i + R];
      m1 += g1[i + R] * -i;  // correlation of the derivative kernel with f(x) = x
      s2 += g2[i + R];
      m2 += g2[i + R] * i * i / 2.0;
    }
    EXPECT_NEAR(s0, 1.0, 1e-12);
    EXPECT_NEAR(std::abs(m1), 1.0, 1e-12);
    EXPECT_NEAR(s2, 0.0, 1e-12);
    EXPECT_NEAR(m2, 1.0, 1e-12);
  }
}

TEST(Filters, SmoothingPreservesConstant) {
  RasterImage img(20, 30, 1, 7.f);
  auto s = gaussian_smooth(img, 2.0);
  for (float v : s.data()) EXPECT_NEAR(v, 7.f, 1e-5);
}

TEST(Rng, DeterministicAndStreamsDiffer) {
  Rng a(5), b(5), c(derive_seed(5, 1));
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.uniform(), b.uniform());
  EXPECT_NE(Rng(5).uniform(), c.uniform());
  EXPECT_NE(derive_seed(5, 1), derive_seed(5, 2));
}
