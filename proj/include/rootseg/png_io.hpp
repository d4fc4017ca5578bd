#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rootseg/raster.hpp"

namespace rootseg {

class ImageIoError : public std::runtime_error {
 public:
  ImageIoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what) {}
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}
inline void png_warning_fn(png_structp, png_const_charp) {}

// Decoded samples, one vector per file; values are raw sample integers.
struct PngData {
  int height = 0;
  int width = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

inline PngData read_png_raw(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ImageIoError(path, "cannot open for reading");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw ImageIoError(path, "not a PNG file");

  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw ImageIoError(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngData out;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError(path, "decode error: " + err);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // host little-endian order for uint16 reads
  png_read_update_info(png, info);

  out.height = static_cast<int>(png_get_image_height(png, info));
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (int r = 0; r < out.height; ++r) rows[r] = buffer.data() + rowbytes * r;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(out.height) * out.width * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i)
      out.samples[i] = static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
  } else {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  }
  return out;
}

inline void write_png_raw(const std::string& path, int height, int width, int channels,
                          int bit_depth, const std::vector<std::uint16_t>& samples) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw ImageIoError(path, "cannot open for writing");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw ImageIoError(path, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  const int bytes = bit_depth == 16 ? 2 : 1;
  std::vector<unsigned char> row(static_cast<std::size_t>(width) * channels * bytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError(path, "encode error: " + err);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t per_row = static_cast<std::size_t>(width) * channels;
  for (int r = 0; r < height; ++r) {
    const std::uint16_t* src = samples.data() + per_row * r;
    if (bit_depth == 16) {
      for (std::size_t i = 0; i < per_row; ++i) {
        row[2 * i] = static_cast<unsigned char>(src[i] >> 8);  // PNG is big-endian
        row[2 * i + 1] = static_cast<unsigned char>(src[i] & 0xff);
      }
    } else {
      for (std::size_t i = 0; i < per_row; ++i) row[i] = static_cast<unsigned char>(src[i]);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw ImageIoError(path, "write failed");
}

inline std::uint16_t quantize(double v, double max) {
  if (!(v > 0)) return 0;
  if (v >= max) return static_cast<std::uint16_t>(max);
  return static_cast<std::uint16_t>(std::lround(v));
}

}  // namespace detail

// Colour photo as 3 channels in [0,255]; grayscale files are replicated.
inline RasterImage read_image(const std::string& path) {
  auto raw = detail::read_png_raw(path);
  const double scale = raw.bit_depth == 16 ? 255.0 / 65535.0 : 1.0;
  RasterImage img(raw.height, raw.width, 3);
  for (int r = 0; r < raw.height; ++r)
    for (int c = 0; c < raw.width; ++c)
      for (int k = 0; k < 3; ++k) {
        const int src = raw.channels >= 3 ? k : 0;
        img(r, c, k) = static_cast<float>(
            raw.samples[(static_cast<std::size_t>(r) * raw.width + c) * raw.channels + src] * scale);
      }
  return img;
}

// Binary mask: first channel > 127 decodes to 1.
inline RasterImage read_mask(const std::string& path) {
  auto raw = detail::read_png_raw(path);
  const unsigned cut = raw.bit_depth == 16 ? 127u * 257u : 127u;
  RasterImage mask(raw.height, raw.width, 1);
  for (int r = 0; r < raw.height; ++r)
    for (int c = 0; c < raw.width; ++c)
      mask(r, c) =
          raw.samples[(static_cast<std::size_t>(r) * raw.width + c) * raw.channels] > cut ? 1.f : 0.f;
  return mask;
}

// 8-bit PNG of a 1- or 3-channel image with values in [0,255].
inline void write_image(const std::string& path, const RasterImage& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw ImageIoError(path, "only 1 or 3 channel images can be written");
  std::vector<std::uint16_t> s(img.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = detail::quantize(img.data()[i], 255.0);
  detail::write_png_raw(path, img.height(), img.width(), img.channels(), 8, s);
}

// Mask written as 0/255 single-channel PNG.
inline void write_mask(const std::string& path, const RasterImage& mask) {
  std::vector<std::uint16_t> s(mask.pixel_count());
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      s[static_cast<std::size_t>(r) * mask.width() + c] = mask(r, c) > 0.5f ? 255 : 0;
  detail::write_png_raw(path, mask.height(), mask.width(), 1, 8, s);
}

// Probability map in [0,1] as 16-bit grayscale scaled by 65535.
inline void write_probability(const std::string& path, const RasterImage& prob) {
  std::vector<std::uint16_t> s(prob.pixel_count());
  for (int r = 0; r < prob.height(); ++r)
    for (int c = 0; c < prob.width(); ++c)
      s[static_cast<std::size_t>(r) * prob.width() + c] =
          detail::quantize(static_cast<double>(prob(r, c)) * 65535.0, 65535.0);
  detail::write_png_raw(path, prob.height(), prob.width(), 1, 16, s);
}

inline RasterImage read_probability(const std::string& path) {
  auto raw = detail::read_png_raw(path);
  const double scale = raw.bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  RasterImage prob(raw.height, raw.width, 1);
  for (int r = 0; r < raw.height; ++r)
    for (int c = 0; c < raw.width; ++c)
      prob(r, c) = static_cast<float>(
          raw.samples[(static_cast<std::size_t>(r) * raw.width + c) * raw.channels] * scale);
  return prob;
}

}  // namespace rootseg
