#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "rootseg/dataio.hpp"
#include "rootseg/filters.hpp"
#include "rootseg/png_io.hpp"
#include "rootseg/raster.hpp"
#include "rootseg/rng.hpp"

namespace rootseg {

// Synthetic root scene: bright quadratic strokes over a noisy, blotchy soil
// strewn with short pale debris. Debris is bluish where roots are yellowish,
// so it only differs from a root in colour and length; a grayscale ridge
// filter sees both. Defaults give roughly 0.5% root pixels averaged over seeds.
struct SceneConfig {
  int height = 256;
  int width = 256;
  int root_count_min = 1;
  int root_count_max = 2;
  double root_width_min = 3.0;
  double root_width_max = 5.0;
  double root_brightness_min = 35.0;
  double root_brightness_max = 80.0;
  double background_noise_sigma = 10.0;
  double curvature = 0.25;
  std::uint64_t seed = 1;

  // Not part of the scene identity; exposed so tests can tune ranges.
  double root_length_min = 0.12; // fraction of the shorter image side
  double root_length_max = 0.3;
  double blotch_amplitude = 30.0;
  int debris_count_min = 2;
  int debris_count_max = 8;
  double debris_length_min = 10.0;  // pixels
  double debris_length_max = 50.0;

  void validate() const {
    if (height < 16 || width < 16)
      throw std::invalid_argument("SceneConfig: image must be at least 16x16");
    if (root_count_min < 0 || root_count_max < root_count_min)
      throw std::invalid_argument("SceneConfig: bad root_count range");
    if (!(root_width_min > 0) || root_width_max < root_width_min ||
        root_width_max > std::min(height, width) / 2.0)
      throw std::invalid_argument("SceneConfig: bad root_width range");
    if (root_brightness_min < 0 || root_brightness_max < root_brightness_min ||
        root_brightness_max > 255)
      throw std::invalid_argument("SceneConfig: bad root_brightness range");
    if (background_noise_sigma < 0) throw std::invalid_argument("SceneConfig: negative noise");
    if (curvature < 0) throw std::invalid_argument("SceneConfig: negative curvature");
    if (!(root_length_min > 0) || root_length_max < root_length_min)
      throw std::invalid_argument("SceneConfig: bad root_length range");
    if (debris_count_min < 0 || debris_count_max < debris_count_min)
      throw std::invalid_argument("SceneConfig: bad debris_count range");
    if (!(debris_length_min > 0) || debris_length_max < debris_length_min)
      throw std::invalid_argument("SceneConfig: bad debris_length range");
  }
};

struct SceneDetail {
  RasterImage image;       // 3 channels, [0,255]
  RasterImage mask;        // 1 where a stroke covers the pixel
  RasterImage background;  // noiseless soil brightness (gray) incl. debris, before roots
};

namespace detail {

struct Stroke {
  std::array<double, 2> p0, p1, p2;  // (row, col) control points
  double width;
  double brightness;
};

inline void stamp_stroke(const Stroke& s, RasterImage& coverage) {
  const double len_est = std::hypot(s.p1[0] - s.p0[0], s.p1[1] - s.p0[1]) +
                         std::hypot(s.p2[0] - s.p1[0], s.p2[1] - s.p1[1]);
  const int steps = std::max(2, static_cast<int>(std::ceil(len_est / 0.25)));
  const double rad = s.width / 2.0, rad2 = rad * rad;
  const int H = coverage.height(), W = coverage.width();
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps, u = 1 - t;
    const double y = u * u * s.p0[0] + 2 * u * t * s.p1[0] + t * t * s.p2[0];
    const double x = u * u * s.p0[1] + 2 * u * t * s.p1[1] + t * t * s.p2[1];
    const int r0 = std::max(0, static_cast<int>(std::floor(y - rad)));
    const int r1 = std::min(H - 1, static_cast<int>(std::ceil(y + rad)));
    const int c0 = std::max(0, static_cast<int>(std::floor(x - rad)));
    const int c1 = std::min(W - 1, static_cast<int>(std::ceil(x + rad)));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) {
        const double dy = r - y, dx = c - x;
        if (dy * dy + dx * dx <= rad2) coverage(r, c) = std::max(coverage(r, c), float(s.brightness));
      }
  }
}

inline double truncated_normal(Rng& rng) {
  for (;;) {
    const double z = rng.normal();
    if (std::abs(z) <= 3.0) return z;
  }
}

}  // namespace detail

inline SceneDetail render_scene(const SceneConfig& cfg) {
  cfg.validate();
  const int H = cfg.height, W = cfg.width;
  Rng rng(cfg.seed);

  // Soil: per-scene base colour, low-frequency blotches in brightness.
  const std::array<double, 3> soil{100 + rng.uniform(-10, 10), 78 + rng.uniform(-8, 8),
                                   58 + rng.uniform(-6, 6)};
  const double blotch_sigma = std::max(2.0, std::min(H, W) / 12.0);
  RasterImage noise(H, W, 1);
  for (auto& v : noise.data()) v = static_cast<float>(rng.uniform(-1, 1));
  RasterImage blotch = gaussian_smooth(noise, blotch_sigma);
  float peak = 1e-6f;
  for (float v : blotch.data()) peak = std::max(peak, std::abs(v));

  SceneDetail out{RasterImage(H, W, 3), RasterImage(H, W, 1), RasterImage(H, W, 1)};
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const double b = cfg.blotch_amplitude * blotch(r, c) / peak;
      double gray = 0;
      for (int k = 0; k < 3; ++k) {
        out.image(r, c, k) = static_cast<float>(soil[k] + b);
        gray += soil[k] + b;
      }
      out.background(r, c) = static_cast<float>(gray / 3);
    }

  // Debris: short, nearly straight, any orientation, root-like width and brightness.
  static constexpr std::array<double, 3> debris_tint{0.85, 0.95, 1.1};
  const int n_debris = static_cast<int>(rng.uniform_int(cfg.debris_count_min, cfg.debris_count_max));
  RasterImage debris(H, W, 1, 0.f);
  for (int i = 0; i < n_debris; ++i) {
    detail::Stroke s;
    s.width = rng.uniform(cfg.root_width_min, cfg.root_width_max);
    s.brightness = std::max(1e-3, rng.uniform(cfg.root_brightness_min, cfg.root_brightness_max));
    const double len = rng.uniform(cfg.debris_length_min, cfg.debris_length_max);
    const double angle = rng.uniform(0, M_PI);
    const double dy = std::sin(angle), dx = std::cos(angle);
    s.p0 = {rng.uniform(0, H - 1), rng.uniform(0, W - 1)};
    s.p2 = {s.p0[0] + len * dy, s.p0[1] + len * dx};
    const double bend = 0.1 * len * rng.uniform(-1, 1);
    s.p1 = {(s.p0[0] + s.p2[0]) / 2 - dx * bend, (s.p0[1] + s.p2[1]) / 2 + dy * bend};
    detail::stamp_stroke(s, debris);
  }
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const float b = debris(r, c);
      if (b <= 0) continue;
      double gray = 0;
      for (int k = 0; k < 3; ++k) {
        out.image(r, c, k) += static_cast<float>(b * debris_tint[k]);
        gray += out.image(r, c, k);
      }
      out.background(r, c) = static_cast<float>(gray / 3);
    }

  // Roots enter predominantly downward, bent by a jittered middle control point.
  const int count = static_cast<int>(rng.uniform_int(cfg.root_count_min, cfg.root_count_max));
  RasterImage coverage(H, W, 1, 0.f);
  const double side = std::min(H, W);
  for (int i = 0; i < count; ++i) {
    detail::Stroke s;
    s.width = rng.uniform(cfg.root_width_min, cfg.root_width_max);
    s.brightness = rng.uniform(cfg.root_brightness_min, cfg.root_brightness_max);
    if (s.brightness <= 0) s.brightness = 1e-3;
    const double len = side * rng.uniform(cfg.root_length_min, cfg.root_length_max);
    const double angle = M_PI / 2 + rng.uniform(-M_PI / 3, M_PI / 3);
    const double dy = std::sin(angle), dx = std::cos(angle);
    s.p0 = {rng.uniform(0, H - 1 - 0.5 * len * dy), rng.uniform(0, W - 1)};
    s.p2 = {s.p0[0] + len * dy, s.p0[1] + len * dx};
    const double bend = cfg.curvature * len * rng.uniform(-1, 1);
    s.p1 = {(s.p0[0] + s.p2[0]) / 2 - dx * bend, (s.p0[1] + s.p2[1]) / 2 + dy * bend};
    detail::stamp_stroke(s, coverage);
  }

  // Roots are paler than soil: they lift all channels nearly equally.
  static constexpr std::array<double, 3> tint{1.0, 0.97, 0.9};
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const float b = coverage(r, c);
      if (b > 0) {
        out.mask(r, c) = 1.f;
        for (int k = 0; k < 3; ++k) out.image(r, c, k) += static_cast<float>(b * tint[k]);
      }
      for (int k = 0; k < 3; ++k) {
        const double v = out.image(r, c, k) + cfg.background_noise_sigma * detail::truncated_normal(rng);
        out.image(r, c, k) = static_cast<float>(std::clamp(v, 0.0, 255.0));
      }
    }
  return out;
}

inline std::pair<RasterImage, RasterImage> generate_scene(const SceneConfig& cfg) {
  auto d = render_scene(cfg);
  return {std::move(d.image), std::move(d.mask)};
}

inline std::uint64_t scene_seed(std::uint64_t dataset_seed, int index) {
  return derive_seed(dataset_seed, static_cast<std::uint64_t>(index));
}

inline std::string scene_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04d", index);
  return buf;
}

// Writes n image/mask pairs and manifest.csv into out_dir.
inline DatasetManifest generate_dataset(const SceneConfig& cfg, int n, const fs::path& out_dir) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error(out_dir.string() + ": " + ec.message());
  DatasetManifest m;
  std::vector<fs::path> written;
  try {
    for (int i = 0; i < n; ++i) {
      SceneConfig sc = cfg;
      sc.seed = scene_seed(cfg.seed, i);
      auto [img, mask] = generate_scene(sc);
      const std::string stem = scene_stem(i);
      ManifestRow row{out_dir / (stem + ".png"), out_dir / (stem + "_mask.png"), count_root_pixels(mask)};
      written.push_back(row.image);
      write_image(row.image.string(), img);
      written.push_back(row.mask);
      write_mask(row.mask.string(), mask);
      m.rows.push_back(std::move(row));
    }
    written.push_back(out_dir / "manifest.csv");
    write_manifest(out_dir / "manifest.csv", m.rows);
  } catch (...) {
    // Leave no partial dataset behind.
    for (const auto& f : written) fs::remove(f, ec);
    throw;
  }
  return m;
}

}  // namespace rootseg
