#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "rootseg/filters.hpp"
#include "rootseg/raster.hpp"
#include "rootseg/rng.hpp"

namespace rootseg {

inline RasterImage normalize(const RasterImage& tile) {
  RasterImage out = tile;
  for (auto& v : out.data()) v = v / 255.0f - 0.5f;
  return out;
}

inline RasterImage denormalize(const RasterImage& tile) {
  RasterImage out = tile;
  for (auto& v : out.data()) v = (v + 0.5f) * 255.0f;
  return out;
}

// Elastic grid deformation strength. sigma and alpha are interpolated jointly by
// gamma so stronger displacement always comes with a smoother field.
struct ElasticParams {
  double gamma = 0.0;
  double sigma = 15.0;
  double alpha = 200.0;
  double alpha_scale = 1.0;
  double apply_probability = 0.9;

  static constexpr double kSigmaLo = 15, kSigmaHi = 60;
  static constexpr double kAlphaLo = 200, kAlphaHi = 2500;

  static ElasticParams from_gamma(double gamma, double alpha_scale) {
    ElasticParams p;
    p.gamma = gamma;
    p.alpha_scale = alpha_scale;
    p.sigma = kSigmaLo + gamma * (kSigmaHi - kSigmaLo);
    p.alpha = (kAlphaLo + gamma * (kAlphaHi - kAlphaLo)) * alpha_scale;
    return p;
  }
};

inline ElasticParams sample_elastic(Rng& rng) {
  const double gamma = rng.uniform();
  const double scale = rng.uniform(0.4, 1.0);
  return ElasticParams::from_gamma(gamma, scale);
}

struct DisplacementField {
  Raster<float> dy, dx;
};

// alpha * GaussianSmooth(noise, sigma) per axis. The smoothing kernel sums to one,
// so |offset| <= alpha for noise in [-1,1].
inline DisplacementField field_from_noise(const Raster<float>& noise_y, const Raster<float>& noise_x,
                                          double sigma, double alpha) {
  DisplacementField f{gaussian_smooth(noise_y, sigma), gaussian_smooth(noise_x, sigma)};
  for (auto* m : {&f.dy, &f.dx})
    for (auto& v : m->data()) v = static_cast<float>(v * alpha);
  return f;
}

inline DisplacementField make_field(int height, int width, const ElasticParams& p, Rng& rng) {
  Raster<float> ny(height, width, 1), nx(height, width, 1);
  for (auto& v : ny.data()) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : nx.data()) v = static_cast<float>(rng.uniform(-1, 1));
  return field_from_noise(ny, nx, p.sigma, p.alpha);
}

// Samples img at (y + dy, x + dx): bilinear with reflected borders for the
// image, nearest neighbour at identical coordinates for the mask.
inline std::pair<RasterImage, RasterImage> warp(const RasterImage& img, const RasterImage& mask,
                                                const DisplacementField& f) {
  const int H = img.height(), W = img.width(), C = img.channels();
  if (mask.height() != H || mask.width() != W || f.dy.height() != H || f.dy.width() != W ||
      f.dx.height() != H || f.dx.width() != W)
    throw std::invalid_argument("warp: image, mask and field must share dimensions");
  RasterImage out_img(H, W, C), out_mask(H, W, mask.channels());
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const double y = r + static_cast<double>(f.dy(r, c));
      const double x = c + static_cast<double>(f.dx(r, c));
      const double fy = std::floor(y), fx = std::floor(x);
      const double ty = y - fy, tx = x - fx;
      const int y0 = reflect_any(static_cast<int>(fy), H), y1 = reflect_any(static_cast<int>(fy) + 1, H);
      const int x0 = reflect_any(static_cast<int>(fx), W), x1 = reflect_any(static_cast<int>(fx) + 1, W);
      for (int k = 0; k < C; ++k) {
        const double v = (1 - ty) * ((1 - tx) * img(y0, x0, k) + tx * img(y0, x1, k)) +
                         ty * ((1 - tx) * img(y1, x0, k) + tx * img(y1, x1, k));
        out_img(r, c, k) = static_cast<float>(v);
      }
      const int ny = reflect_any(static_cast<int>(std::lround(y)), H);
      const int nx = reflect_any(static_cast<int>(std::lround(x)), W);
      for (int k = 0; k < mask.channels(); ++k) out_mask(r, c, k) = mask(ny, nx, k);
    }
  return {std::move(out_img), std::move(out_mask)};
}

// Maximum jitter magnitudes.
struct JitterParams {
  double brightness = 0.3;
  double contrast = 0.3;
  double saturation = 0.2;
  double hue = 0.001;  // in turns
};

namespace detail {

inline void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0;
  if (d == 0) {
    h = 0;
    return;
  }
  if (mx == r) h = (g - b) / d;
  else if (mx == g) h = 2 + (b - r) / d;
  else h = 4 + (r - g) / d;
  h /= 6;
  if (h < 0) h += 1;
}

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = (h - std::floor(h)) * 6;
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

inline float clip255(double v) { return static_cast<float>(std::clamp(v, 0.0, 255.0)); }

}  // namespace detail

// Brightness, contrast and saturation factors drawn from [1-m, 1+m], hue shift
// from [-m_h, m_h] turns; the four operations run in a random order and each
// result is clipped to [0,255]. Operations with a neutral draw are skipped.
inline RasterImage color_jitter(const RasterImage& img, const JitterParams& p, Rng& rng) {
  if (img.channels() != 3) throw std::invalid_argument("color_jitter: expected a 3-channel image");
  const double fb = rng.uniform(1 - p.brightness, 1 + p.brightness);
  const double fc = rng.uniform(1 - p.contrast, 1 + p.contrast);
  const double fs = rng.uniform(1 - p.saturation, 1 + p.saturation);
  const double dh = rng.uniform(-p.hue, p.hue);
  std::array<int, 4> order{0, 1, 2, 3};
  for (int i = 3; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);

  RasterImage out = img;
  const std::size_t npix = out.pixel_count();
  float* d = out.data().data();
  for (int op : order) {
    if (op == 0 && fb != 1.0) {
      for (std::size_t i = 0; i < out.size(); ++i) d[i] = detail::clip255(d[i] * fb);
    } else if (op == 1 && fc != 1.0) {
      double mean = 0;
      for (std::size_t i = 0; i < npix; ++i) mean += (d[3 * i] + d[3 * i + 1] + d[3 * i + 2]) / 3.0;
      mean /= static_cast<double>(npix);
      for (std::size_t i = 0; i < out.size(); ++i) d[i] = detail::clip255(mean + fc * (d[i] - mean));
    } else if (op == 2 && fs != 1.0) {
      for (std::size_t i = 0; i < npix; ++i) {
        const double g = (d[3 * i] + d[3 * i + 1] + d[3 * i + 2]) / 3.0;
        for (int k = 0; k < 3; ++k) d[3 * i + k] = detail::clip255(g + fs * (d[3 * i + k] - g));
      }
    } else if (op == 3 && dh != 0.0) {
      for (std::size_t i = 0; i < npix; ++i) {
        double h, s, v, r, g, b;
        detail::rgb_to_hsv(d[3 * i], d[3 * i + 1], d[3 * i + 2], h, s, v);
        detail::hsv_to_rgb(h + dh, s, v, r, g, b);
        d[3 * i] = detail::clip255(r);
        d[3 * i + 1] = detail::clip255(g);
        d[3 * i + 2] = detail::clip255(b);
      }
    }
  }
  return out;
}

struct AugmentConfig {
  JitterParams jitter;
  bool elastic = true;
};

// Training-time augmentation of an input tile and its aligned mask tile.
inline std::pair<RasterImage, RasterImage> augment_tile(const RasterImage& img, const RasterImage& mask,
                                                        const AugmentConfig& cfg, Rng& rng) {
  RasterImage jittered = color_jitter(img, cfg.jitter, rng);
  const ElasticParams ep = sample_elastic(rng);
  if (!cfg.elastic || rng.uniform() >= ep.apply_probability) return {std::move(jittered), mask};
  const auto field = make_field(img.height(), img.width(), ep, rng);
  return warp(jittered, mask, field);
}

}  // namespace rootseg
