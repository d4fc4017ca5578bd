#pragma once

#include <array>
#include <vector>

#include "rootseg/raster.hpp"

namespace rootseg {

namespace detail {

// Neighbour order: N, NE, E, SE, S, SW, W, NW.
inline constexpr std::array<int, 8> kDr{-1, -1, 0, 1, 1, 1, 0, -1};
inline constexpr std::array<int, 8> kDc{0, 1, 1, 1, 0, -1, -1, -1};

// A foreground pixel is simple (8-connected foreground, 4-connected background)
// when removing it changes neither the number of components nor holes: the
// 8-neighbourhood has exactly one 8-connected foreground component that touches
// a 4-neighbour of the background, i.e. the crossing number over N4 is 1.
inline bool is_simple(const std::array<bool, 8>& n) {
  // Count 8-connected foreground groups in the ring, where a corner pixel only
  // links through adjacent edge pixels (standard Yokoi-style connectivity number).
  int conn = 0;
  for (int k = 0; k < 8; k += 2) {
    const bool x1 = n[k], x2 = n[(k + 1) % 8], x3 = n[(k + 2) % 8];
    // 8-connectivity number with complemented values.
    conn += (!x1) - ((!x1) && (!x2) && (!x3));
  }
  return conn == 1;
}

}  // namespace detail

// Directional topology-preserving thinning. Each pass visits the current
// north/south/east/west border pixels in raster order and deletes those that are
// still simple and are not end points (fewer than two neighbours). Sequential
// deletion keeps every 8-connected component connected and non-empty.
inline RasterImage skeletonize(const RasterImage& mask) {
  const int H = mask.height(), W = mask.width();
  std::vector<unsigned char> img(mask.pixel_count());
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = mask.data()[i] > 0.5f;
  auto at = [&](int r, int c) -> bool {
    return r >= 0 && r < H && c >= 0 && c < W && img[static_cast<std::size_t>(r) * W + c];
  };

  // Border direction index into the N8 ring: N, S, E, W.
  static constexpr std::array<int, 4> kBorder{0, 4, 2, 6};
  std::vector<int> candidates;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int dir : kBorder) {
      candidates.clear();
      for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
          if (at(r, c) && !at(r + detail::kDr[dir], c + detail::kDc[dir])) candidates.push_back(r * W + c);
      for (int p : candidates) {
        const int r = p / W, c = p % W;
        std::array<bool, 8> n;
        int count = 0;
        for (int k = 0; k < 8; ++k) {
          n[k] = at(r + detail::kDr[k], c + detail::kDc[k]);
          count += n[k];
        }
        if (count < 2) continue;
        if (!detail::is_simple(n)) continue;
        img[p] = 0;
        changed = true;
      }
    }
  }
  RasterImage out(H, W, 1);
  for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = img[i] ? 1.f : 0.f;
  return out;
}

inline long long root_length_px(const RasterImage& mask) {
  long long n = 0;
  for (float v : skeletonize(mask).data()) n += v > 0.5f;
  return n;
}

}  // namespace rootseg
