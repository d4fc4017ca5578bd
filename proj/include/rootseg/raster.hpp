#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rootseg {

// Row-major H x W x C pixel container. Channels are interleaved.
template <typename T = float>
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 1)
      throw std::invalid_argument("Raster: bad dimensions " + std::to_string(height) + "x" +
                                  std::to_string(width) + "x" + std::to_string(channels));
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c, int ch = 0) { return data_[index(r, c, ch)]; }
  const T& operator()(int r, int c, int ch = 0) const { return data_[index(r, c, ch)]; }

  std::vector<T>& data() & { return data_; }
  const std::vector<T>& data() const& { return data_; }
  // By value on temporaries, so `for (v : f().data())` does not dangle.
  std::vector<T> data() && { return std::move(data_); }

  bool same_shape(const Raster& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t index(int r, int c, int ch) const {
    return (static_cast<std::size_t>(r) * width_ + c) * channels_ + ch;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using RasterImage = Raster<float>;

// Channel average; single-channel input is returned as a copy.
template <typename T>
Raster<T> to_gray(const Raster<T>& img) {
  if (img.channels() == 1) return img;
  Raster<T> out(img.height(), img.width(), 1);
  const int ch = img.channels();
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      T acc{};
      for (int k = 0; k < ch; ++k) acc += img(r, c, k);
      out(r, c) = acc / static_cast<T>(ch);
    }
  return out;
}

template <typename T>
Raster<T> crop(const Raster<T>& img, int row, int col, int height, int width) {
  if (row < 0 || col < 0 || height < 0 || width < 0 || row + height > img.height() ||
      col + width > img.width())
    throw std::invalid_argument("crop: window outside image");
  Raster<T> out(height, width, img.channels());
  const int ch = img.channels();
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      for (int k = 0; k < ch; ++k) out(r, c, k) = img(row + r, col + c, k);
  return out;
}

}  // namespace rootseg
