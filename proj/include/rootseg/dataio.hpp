#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rootseg/png_io.hpp"
#include "rootseg/raster.hpp"

namespace rootseg {

namespace fs = std::filesystem;

struct ManifestRow {
  fs::path image;
  fs::path mask;
  long long root_pixels = 0;
};

struct DatasetManifest {
  std::vector<ManifestRow> rows;
  std::vector<std::string> warnings;
};

inline long long count_root_pixels(const RasterImage& mask) {
  long long n = 0;
  for (float v : mask.data()) n += v > 0.5f ? 1 : 0;
  return n;
}

struct ImagePair {
  RasterImage image;
  RasterImage mask;
};

inline ImagePair load_pair(const fs::path& image_path, const fs::path& mask_path) {
  ImagePair p{read_image(image_path.string()), read_mask(mask_path.string())};
  if (p.image.height() != p.mask.height() || p.image.width() != p.mask.width())
    throw std::runtime_error("dimension mismatch: " + image_path.string() + " is " +
                             std::to_string(p.image.height()) + "x" +
                             std::to_string(p.image.width()) + " but " + mask_path.string() +
                             " is " + std::to_string(p.mask.height()) + "x" +
                             std::to_string(p.mask.width()));
  return p;
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}
}  // namespace detail

inline void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << "image,mask,root_pixels\n";
  const fs::path base = path.parent_path();
  for (const auto& r : rows)
    out << r.image.lexically_relative(base).generic_string() << ','
        << r.mask.lexically_relative(base).generic_string() << ',' << r.root_pixels << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// Paths in the CSV are resolved relative to the manifest's directory. Stored
// counts are checked against a recount of each decoded mask; the recount wins.
inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open manifest");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty dataset");
  const auto header = detail::split_csv_line(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::runtime_error(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ci = col("image"), cm = col("mask"), cr = col("root_pixels");
  const fs::path base = path.parent_path();

  DatasetManifest m;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() < header.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": too few columns");
    ManifestRow row{base / cells[ci], base / cells[cm], 0};
    try {
      row.root_pixels = std::stoll(cells[cr]);
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": bad root_pixels value '" + cells[cr] + "'");
    }
    if (!fs::exists(row.image)) throw std::runtime_error("missing image file " + row.image.string());
    if (!fs::exists(row.mask)) throw std::runtime_error("missing mask file " + row.mask.string());
    const long long recount = count_root_pixels(read_mask(row.mask.string()));
    if (recount != row.root_pixels) {
      m.warnings.push_back(row.mask.string() + ": manifest says " + std::to_string(row.root_pixels) +
                           " root pixels, recount " + std::to_string(recount));
      row.root_pixels = recount;
    }
    m.rows.push_back(std::move(row));
  }
  if (m.rows.empty()) throw std::runtime_error(path.string() + ": empty dataset");
  std::sort(m.rows.begin(), m.rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) { return a.image < b.image; });
  return m;
}

inline std::vector<ImagePair> load_all(const std::vector<ManifestRow>& rows) {
  std::vector<ImagePair> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(load_pair(r.image, r.mask));
  return out;
}

// Identifier used for pairing and split tie-breaks: the image file stem.
inline std::string image_id(const ManifestRow& r) { return r.image.stem().string(); }

}  // namespace rootseg
