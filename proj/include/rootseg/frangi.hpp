#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rootseg/filters.hpp"
#include "rootseg/raster.hpp"

namespace rootseg {

struct FrangiParams {
  std::vector<double> sigmas{1.0, 2.0, 3.0};
  double beta = 0.5;
  double c = 15.0;  // in gray-level units of a [0,255] image
  double vesselness_threshold = 0.15;
  long long min_component_size = 20;

  void validate() const {
    if (sigmas.empty()) throw std::invalid_argument("FrangiParams: no scales");
    for (double s : sigmas)
      if (!(s > 0)) throw std::invalid_argument("FrangiParams: scale must be > 0");
    if (!(beta > 0)) throw std::invalid_argument("FrangiParams: beta must be > 0");
    if (!(c > 0)) throw std::invalid_argument("FrangiParams: c must be > 0");
    if (!(vesselness_threshold >= 0 && vesselness_threshold <= 1))
      throw std::invalid_argument("FrangiParams: threshold outside [0,1]");
    if (min_component_size < 0) throw std::invalid_argument("FrangiParams: negative min size");
  }
};

// Scale-normalised second derivatives (times sigma^2) of the Gaussian-smoothed image.
// x runs along columns, y along rows.
struct HessianField {
  int height = 0;
  int width = 0;
  Raster<double> hxx, hxy, hyy;
};

inline HessianField gaussian_hessian(const RasterImage& gray, double sigma) {
  if (gray.channels() != 1) throw std::invalid_argument("gaussian_hessian: expected grayscale image");
  if (!(sigma > 0)) throw std::invalid_argument("gaussian_hessian: sigma must be > 0");
  Raster<double> src(gray.height(), gray.width(), 1);
  std::copy(gray.data().begin(), gray.data().end(), src.data().begin());
  const auto g0 = gaussian_kernel(sigma, 0), g1 = gaussian_kernel(sigma, 1),
             g2 = gaussian_kernel(sigma, 2);
  const auto h0 = convolve_horizontal(src, g0);
  const auto h1 = convolve_horizontal(src, g1);
  const auto h2 = convolve_horizontal(src, g2);
  HessianField f{gray.height(), gray.width(), convolve_vertical(h2, g0),
                 convolve_vertical(h1, g1), convolve_vertical(h0, g2)};
  const double s2 = sigma * sigma;
  for (auto* m : {&f.hxx, &f.hxy, &f.hyy})
    for (auto& v : m->data()) v *= s2;
  return f;
}

// Eigenvalues ordered |l1| <= |l2|.
inline void hessian_eigen(double hxx, double hxy, double hyy, double& l1, double& l2) {
  const double mean = 0.5 * (hxx + hyy);
  const double d = std::sqrt(0.25 * (hxx - hyy) * (hxx - hyy) + hxy * hxy);
  const double a = mean + d, b = mean - d;
  if (std::abs(a) <= std::abs(b)) {
    l1 = a;
    l2 = b;
  } else {
    l1 = b;
    l2 = a;
  }
}

// Bright-ridge vesselness in [0,1]; zero wherever l2 >= 0.
inline double vesselness_at(double hxx, double hxy, double hyy, double beta, double c) {
  double l1, l2;
  hessian_eigen(hxx, hxy, hyy, l1, l2);
  if (l2 >= 0) return 0.0;
  const double rb = l1 / l2;
  const double s2 = l1 * l1 + l2 * l2;
  return std::exp(-rb * rb / (2 * beta * beta)) * (1 - std::exp(-s2 / (2 * c * c)));
}

inline RasterImage vesselness(const HessianField& h, double beta, double c) {
  RasterImage out(h.height, h.width, 1);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<float>(
        vesselness_at(h.hxx.data()[i], h.hxy.data()[i], h.hyy.data()[i], beta, c));
  return out;
}

// Pixel-wise maximum of single-scale responses.
inline RasterImage multiscale_vesselness(const RasterImage& gray, const FrangiParams& p) {
  RasterImage best(gray.height(), gray.width(), 1, 0.f);
  for (double s : p.sigmas) {
    const auto v = vesselness(gaussian_hessian(gray, s), p.beta, p.c);
    for (std::size_t i = 0; i < best.size(); ++i)
      best.data()[i] = std::max(best.data()[i], v.data()[i]);
  }
  return best;
}

// Removes 8-connected components with fewer than min_size pixels.
inline RasterImage component_filter(const RasterImage& mask, long long min_size) {
  if (min_size <= 1) {
    RasterImage out = mask;
    for (auto& v : out.data()) v = v > 0.5f ? 1.f : 0.f;
    return out;
  }
  const int H = mask.height(), W = mask.width();
  RasterImage out(H, W, 1, 0.f);
  std::vector<std::int32_t> label(mask.pixel_count(), -1);
  std::vector<int> stack, members;
  for (int start = 0; start < H * W; ++start) {
    if (label[start] != -1 || mask.data()[start] <= 0.5f) continue;
    members.clear();
    stack.assign(1, start);
    label[start] = start;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const int r = p / W, c = p % W;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
          const int q = rr * W + cc;
          if (label[q] == -1 && mask.data()[q] > 0.5f) {
            label[q] = start;
            stack.push_back(q);
          }
        }
    }
    if (static_cast<long long>(members.size()) >= min_size)
      for (int p : members) out.data()[p] = 1.f;
  }
  return out;
}

inline RasterImage frangi_segment(const RasterImage& image, const FrangiParams& p) {
  p.validate();
  const RasterImage gray = to_gray(image);
  const RasterImage v = multiscale_vesselness(gray, p);
  RasterImage mask(gray.height(), gray.width(), 1);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = v.data()[i] >= p.vesselness_threshold ? 1.f : 0.f;
  return component_filter(mask, p.min_component_size);
}

}  // namespace rootseg
