#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rootseg/raster.hpp"

namespace rootseg {

// Reflection without edge duplication, valid for any index (period 2(n-1)).
inline int reflect_any(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Sampled Gaussian (order 0), first or second derivative, radius ceil(4 sigma).
// Moments are corrected so the discrete kernels are exact on polynomials up to
// the derivative order: sum g = 1; g' differentiates x to 1; g'' maps x^2/2 to 1
// and annihilates constants.
inline std::vector<double> gaussian_kernel(double sigma, int order, int radius = -1) {
  if (!(sigma > 0)) throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
  if (radius < 0) radius = static_cast<int>(std::ceil(4.0 * sigma));
  const int n = 2 * radius + 1;
  std::vector<double> g(n), k(n);
  const double s2 = sigma * sigma;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double x = i - radius;
    g[i] = std::exp(-x * x / (2 * s2));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  if (order == 0) return g;
  if (order == 1) {
    // Convolution index j contributes f(i - j); derivative of f(x)=x must be 1.
    double m = 0;
    for (int i = 0; i < n; ++i) {
      const double x = i - radius;
      k[i] = -x / s2 * g[i];
      m += -x * k[i];
    }
    for (auto& v : k) v /= m;
    return k;
  }
  if (order == 2) {
    double ksum = 0;
    for (int i = 0; i < n; ++i) {
      const double x = i - radius;
      k[i] = (x * x / (s2 * s2) - 1.0 / s2) * g[i];
      ksum += k[i];
    }
    double m2 = 0;
    for (int i = 0; i < n; ++i) {
      k[i] -= ksum * g[i];
      const double x = i - radius;
      m2 += x * x * k[i] / 2;
    }
    for (auto& v : k) v /= m2;
    return k;
  }
  throw std::invalid_argument("gaussian_kernel: order must be 0, 1 or 2");
}

// 1-D convolution along columns (horizontal) of a single-channel raster,
// reflected boundary. out(r,c) = sum_j in(r, c - j) k(j).
template <typename T>
Raster<T> convolve_horizontal(const Raster<T>& in, const std::vector<double>& k) {
  const int H = in.height(), W = in.width(), R = static_cast<int>(k.size()) / 2;
  Raster<T> out(H, W, 1);
  std::vector<T> row(W + 2 * R);
  for (int r = 0; r < H; ++r) {
    for (int c = -R; c < W + R; ++c) row[c + R] = in(r, reflect_any(c, W));
    for (int c = 0; c < W; ++c) {
      double acc = 0;
      for (int j = -R; j <= R; ++j) acc += row[c - j + R] * k[j + R];
      out(r, c) = static_cast<T>(acc);
    }
  }
  return out;
}

template <typename T>
Raster<T> convolve_vertical(const Raster<T>& in, const std::vector<double>& k) {
  const int H = in.height(), W = in.width(), R = static_cast<int>(k.size()) / 2;
  Raster<T> out(H, W, 1);
  std::vector<double> acc(W);
  for (int r = 0; r < H; ++r) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int j = -R; j <= R; ++j) {
      const int sr = reflect_any(r - j, H);
      const double w = k[j + R];
      for (int c = 0; c < W; ++c) acc[c] += in(sr, c) * w;
    }
    for (int c = 0; c < W; ++c) out(r, c) = static_cast<T>(acc[c]);
  }
  return out;
}

template <typename T>
Raster<T> gaussian_smooth(const Raster<T>& in, double sigma) {
  const auto g = gaussian_kernel(sigma, 0);
  return convolve_vertical(convolve_horizontal(in, g), g);
}

}  // namespace rootseg
