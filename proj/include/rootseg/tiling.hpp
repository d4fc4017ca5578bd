#pragma once

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rootseg/raster.hpp"

namespace rootseg {

// Placement of one network input window and its output window.
// in_origin is in padded-image coordinates (padding = (in_size - out_size) / 2),
// out_origin in original-image coordinates. With that padding the two origins
// coincide numerically.
struct TileSpec {
  int in_row = 0;
  int in_col = 0;
  int in_size = 572;
  int out_row = 0;
  int out_col = 0;
  int out_size = 388;

  int margin() const { return (in_size - out_size) / 2; }

  friend bool operator==(const TileSpec&, const TileSpec&) = default;
};

inline int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

// Symmetric reflection that does not repeat the edge pixel: padded(-1) == original(1).
template <typename T>
Raster<T> mirror_pad(const Raster<T>& img, int margin) {
  if (margin < 0) throw std::invalid_argument("mirror_pad: negative margin");
  if (margin > 0 && margin >= std::min(img.height(), img.width()))
    throw std::invalid_argument("mirror_pad: margin " + std::to_string(margin) +
                                " too large for " + std::to_string(img.height()) + "x" +
                                std::to_string(img.width()) + " image");
  if (margin == 0) return img;
  const int H = img.height(), W = img.width(), C = img.channels();
  Raster<T> out(H + 2 * margin, W + 2 * margin, C);
  for (int r = 0; r < out.height(); ++r) {
    const int sr = reflect_index(r - margin, H);
    for (int c = 0; c < out.width(); ++c) {
      const int sc = reflect_index(c - margin, W);
      for (int k = 0; k < C; ++k) out(r, c, k) = img(sr, sc, k);
    }
  }
  return out;
}

inline void check_tile_sizes(int in_size, int out_size) {
  if (in_size <= 0 || out_size <= 0 || in_size <= out_size)
    throw std::invalid_argument("tile sizes must satisfy in_size > out_size > 0");
  if ((in_size - out_size) % 2 != 0)
    throw std::invalid_argument("tile sizes: in_size - out_size must be even");
}

// Row-major grid of output windows covering the image. The last row/column is
// shifted inward so every window stays inside the image. Images smaller than
// out_size must be padded by the caller first.
inline std::vector<TileSpec> plan_tile_grid(int height, int width, int in_size, int out_size) {
  check_tile_sizes(in_size, out_size);
  if (height < out_size || width < out_size)
    throw std::invalid_argument("plan_tile_grid: image " + std::to_string(height) + "x" +
                                std::to_string(width) + " smaller than output window " +
                                std::to_string(out_size));
  auto origins = [out_size](int extent) {
    std::vector<int> o;
    for (int p = 0; p < extent; p += out_size) o.push_back(std::min(p, extent - out_size));
    return o;
  };
  std::vector<TileSpec> tiles;
  for (int r : origins(height))
    for (int c : origins(width)) tiles.push_back(TileSpec{r, c, in_size, r, c, out_size});
  return tiles;
}

template <typename T>
Raster<T> extract_tile(const Raster<T>& padded, const TileSpec& spec) {
  if (spec.in_row < 0 || spec.in_col < 0 || spec.in_row + spec.in_size > padded.height() ||
      spec.in_col + spec.in_size > padded.width())
    throw std::invalid_argument("extract_tile: window outside padded image");
  return crop(padded, spec.in_row, spec.in_col, spec.in_size, spec.in_size);
}

// Centre out_size x out_size block of an in_size tile.
template <typename T>
Raster<T> center_crop(const Raster<T>& tile, const TileSpec& spec) {
  const int m = spec.margin();
  return crop(tile, m, m, spec.out_size, spec.out_size);
}

// Writes each tile at its out window; later tiles overwrite earlier ones.
template <typename T>
Raster<T> assemble(const std::vector<std::pair<TileSpec, Raster<T>>>& tiles) {
  if (tiles.empty()) throw std::invalid_argument("assemble: no tiles");
  int H = 0, W = 0;
  const int C = tiles.front().second.channels();
  for (const auto& [spec, img] : tiles) {
    if (img.height() != spec.out_size || img.width() != spec.out_size || img.channels() != C)
      throw std::invalid_argument("assemble: tile image does not match out_size");
    H = std::max(H, spec.out_row + spec.out_size);
    W = std::max(W, spec.out_col + spec.out_size);
  }
  Raster<T> out(H, W, C);
  std::vector<char> covered(static_cast<std::size_t>(H) * W, 0);
  for (const auto& [spec, img] : tiles)
    for (int r = 0; r < spec.out_size; ++r)
      for (int c = 0; c < spec.out_size; ++c) {
        const int R = spec.out_row + r, Cc = spec.out_col + c;
        covered[static_cast<std::size_t>(R) * W + Cc] = 1;
        for (int k = 0; k < C; ++k) out(R, Cc, k) = img(r, c, k);
      }
  std::size_t missing = 0;
  std::ostringstream first;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      if (!covered[static_cast<std::size_t>(r) * W + c]) {
        if (missing < 8) first << " (" << r << "," << c << ")";
        ++missing;
      }
  if (missing)
    throw std::runtime_error("assemble: " + std::to_string(missing) +
                             " uncovered pixels, first:" + first.str());
  return out;
}

// 1 where prob >= threshold.
template <typename T>
Raster<T> binarize(const Raster<T>& prob, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("binarize: threshold outside [0,1]");
  if (prob.channels() != 1) throw std::invalid_argument("binarize: expected single channel");
  Raster<T> out(prob.height(), prob.width(), 1);
  for (std::size_t i = 0; i < prob.size(); ++i)
    out.data()[i] = static_cast<double>(prob.data()[i]) >= threshold ? T(1) : T(0);
  return out;
}

}  // namespace rootseg
