#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "rootseg/raster.hpp"
#include "rootseg/rng.hpp"

namespace rootseg::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("rootseg_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline RasterImage random_image(int h, int w, int c, std::uint64_t seed, double lo = 0, double hi = 255) {
  Rng rng(seed);
  RasterImage img(h, w, c);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return img;
}

inline RasterImage random_mask(int h, int w, double p, std::uint64_t seed) {
  Rng rng(seed);
  RasterImage m(h, w, 1);
  for (auto& v : m.data()) v = rng.uniform() < p ? 1.f : 0.f;
  return m;
}

}  // namespace rootseg::testing
