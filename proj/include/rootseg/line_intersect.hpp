#pragma once

#include <cmath>
#include <stdexcept>

#include "rootseg/raster.hpp"

namespace rootseg {

// Overlaid counting grid. Lines sit at positive multiples of the square size;
// panel borders are not grid lines. Panel size 0 means "the whole image".
struct GridSpec {
  double square_size_mm = 10.0;
  double mm_per_pixel = 0.5;
  double panel_width_mm = 0.0;
  double panel_height_mm = 0.0;
};

struct IntersectResult {
  long long intersections = 0;
  double root_intensity = 0.0;  // intersections per metre of grid line
  int horizontal_lines = 0;
  int vertical_lines = 0;
  double line_length_m = 0.0;
};

namespace detail {
inline int count_runs(const RasterImage& m, bool horizontal, int index) {
  const int n = horizontal ? m.width() : m.height();
  int runs = 0;
  bool in_run = false;
  for (int i = 0; i < n; ++i) {
    const bool on = (horizontal ? m(index, i) : m(i, index)) > 0.5f;
    if (on && !in_run) ++runs;
    in_run = on;
  }
  return runs;
}
}  // namespace detail

// Each maximal run of root pixels along a grid line is one intersection.
inline IntersectResult line_intersect(const RasterImage& mask, const GridSpec& grid) {
  if (!(grid.square_size_mm > 0) || !(grid.mm_per_pixel > 0))
    throw std::invalid_argument("line_intersect: grid spacing and scale must be positive");
  const double pw = grid.panel_width_mm > 0 ? grid.panel_width_mm : mask.width() * grid.mm_per_pixel;
  const double ph = grid.panel_height_mm > 0 ? grid.panel_height_mm : mask.height() * grid.mm_per_pixel;
  IntersectResult res;
  // Small tolerance so a line exactly on the far border is excluded.
  const double eps = 1e-9 * grid.square_size_mm;
  for (int k = 1; k * grid.square_size_mm < ph - eps; ++k) {
    const int row = static_cast<int>(std::floor(k * grid.square_size_mm / grid.mm_per_pixel));
    if (row >= mask.height()) break;
    ++res.horizontal_lines;
    res.intersections += detail::count_runs(mask, true, row);
  }
  for (int k = 1; k * grid.square_size_mm < pw - eps; ++k) {
    const int col = static_cast<int>(std::floor(k * grid.square_size_mm / grid.mm_per_pixel));
    if (col >= mask.width()) break;
    ++res.vertical_lines;
    res.intersections += detail::count_runs(mask, false, col);
  }
  if (res.horizontal_lines + res.vertical_lines == 0)
    throw std::invalid_argument("line_intersect: grid coarser than panel, no lines inside");
  res.line_length_m = (res.horizontal_lines * pw + res.vertical_lines * ph) / 1000.0;
  res.root_intensity = res.intersections / res.line_length_m;
  return res;
}

}  // namespace rootseg
