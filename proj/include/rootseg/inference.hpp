#pragma once

#include <utility>
#include <vector>

#include "rootseg/augment.hpp"
#include "rootseg/filters.hpp"
#include "rootseg/net/unet.hpp"
#include "rootseg/tiling.hpp"

namespace rootseg {

// Reflective padding that stays valid for any pad width.
inline RasterImage reflect_pad(const RasterImage& img, int top, int bottom, int left, int right) {
  const int H = img.height(), W = img.width(), C = img.channels();
  RasterImage out(H + top + bottom, W + left + right, C);
  for (int r = 0; r < out.height(); ++r) {
    const int sr = reflect_any(r - top, H);
    for (int c = 0; c < out.width(); ++c) {
      const int sc = reflect_any(c - left, W);
      for (int k = 0; k < C; ++k) out(r, c, k) = img(sr, sc, k);
    }
  }
  return out;
}

template <typename T>
RasterImage predict_tile(const net::NetworkParams<T>& params, const RasterImage& tile) {
  return net::to_raster(net::forward(params, net::to_tensor<T>(normalize(tile)), false).prob);
}

// Root probability for a whole image: mirror padding, a tile grid of output
// windows, one forward pass per tile, last-writer-wins assembly.
template <typename T>
RasterImage predict_probability(const net::NetworkParams<T>& params, const RasterImage& image, int in_size) {
  const int out_size = net::output_geometry(params.arch, in_size);
  const int margin = (in_size - out_size) / 2;
  const int H = image.height(), W = image.width();
  const int extra_r = std::max(0, out_size - H), extra_c = std::max(0, out_size - W);
  const RasterImage padded = reflect_pad(image, margin, margin + extra_r, margin, margin + extra_c);
  std::vector<std::pair<TileSpec, RasterImage>> tiles;
  for (const auto& spec : plan_tile_grid(H + extra_r, W + extra_c, in_size, out_size))
    tiles.emplace_back(spec, predict_tile(params, extract_tile(padded, spec)));
  RasterImage full = assemble(tiles);
  if (extra_r || extra_c) full = crop(full, 0, 0, H, W);
  return full;
}

}  // namespace rootseg
