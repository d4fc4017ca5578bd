#pragma once

#include <stdexcept>
#include <vector>

#include "rootseg/dataio.hpp"
#include "rootseg/rng.hpp"
#include "rootseg/tiling.hpp"

namespace rootseg {

struct TrainingTile {
  int image_index = 0;
  TileSpec spec;
  RasterImage image;  // in_size x in_size, 3 channels, [0,255]
  RasterImage mask;   // in_size x in_size; the centre out window is the target
};

// A training image with its mirror-padded copies, prepared once.
struct PaddedPair {
  RasterImage image;
  RasterImage mask;
  int height = 0, width = 0;  // original size
};

inline PaddedPair pad_pair(const ImagePair& p, int margin) {
  return {mirror_pad(p.image, margin), mirror_pad(p.mask, margin), p.image.height(), p.image.width()};
}

inline bool window_has_root(const RasterImage& mask, int row, int col, int size) {
  for (int r = row; r < row + size; ++r)
    for (int c = col; c < col + size; ++c)
      if (mask(r, c) > 0.5f) return true;
  return false;
}

struct InstanceConfig {
  int in_size = 572;
  int out_size = 388;
  int sampled = 90;
  int kept = 40;
};

// Per image: `sampled` uniform placements of the output window inside the
// image, keeping those whose output window holds at least one root pixel, up to
// `kept` tiles in draw order.
inline std::vector<TrainingTile> select_instances(const std::vector<PaddedPair>& images, const InstanceConfig& cfg,
                                                  Rng& rng) {
  check_tile_sizes(cfg.in_size, cfg.out_size);
  const int margin = (cfg.in_size - cfg.out_size) / 2;
  std::vector<TrainingTile> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.height < cfg.out_size || img.width < cfg.out_size)
      throw std::invalid_argument("select_instances: image smaller than output window");
    int kept = 0;
    for (int k = 0; k < cfg.sampled; ++k) {
      const int r = static_cast<int>(rng.uniform_int(0, img.height - cfg.out_size));
      const int c = static_cast<int>(rng.uniform_int(0, img.width - cfg.out_size));
      if (kept >= cfg.kept) continue;  // keep drawing so the stream length is fixed
      if (!window_has_root(img.mask, r + margin, c + margin, cfg.out_size)) continue;
      TileSpec spec{r, c, cfg.in_size, r, c, cfg.out_size};
      out.push_back({static_cast<int>(i), spec, extract_tile(img.image, spec), extract_tile(img.mask, spec)});
      ++kept;
    }
  }
  return out;
}

}  // namespace rootseg
