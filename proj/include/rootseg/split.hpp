#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace rootseg {

struct SplitEntry {
  std::string id;
  long long root_pixels = 0;
};

struct SplitResult {
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
};

// Orders images by root-pixel count (ties by id) and takes `validation_size`
// evenly spaced ranks, round(j (N-1) / (V-1)) with round-half-to-even; a
// collision moves to the next free rank. The rest is training data.
inline SplitResult split_dataset(std::vector<SplitEntry> entries, int validation_size = 9) {
  const int n = static_cast<int>(entries.size());
  if (validation_size < 1) throw std::invalid_argument("split_dataset: validation size must be >= 1");
  if (n < validation_size + 1)
    throw std::invalid_argument("split_dataset: need at least " + std::to_string(validation_size + 1) +
                                " images, got " + std::to_string(n));
  std::sort(entries.begin(), entries.end(), [](const SplitEntry& a, const SplitEntry& b) {
    return a.root_pixels != b.root_pixels ? a.root_pixels < b.root_pixels : a.id < b.id;
  });
  std::vector<char> taken(n, 0);
  for (int j = 0; j < validation_size; ++j) {
    const double pos = validation_size == 1 ? 0.0 : static_cast<double>(j) * (n - 1) / (validation_size - 1);
    int idx = static_cast<int>(std::nearbyint(pos));
    while (idx < n && taken[idx]) ++idx;
    if (idx == n) {
      idx = n - 1;
      while (taken[idx]) --idx;
    }
    taken[idx] = 1;
  }
  SplitResult res;
  for (int i = 0; i < n; ++i) (taken[i] ? res.validation_ids : res.train_ids).push_back(entries[i].id);
  return res;
}

// Sorted ranks selected for validation; exposed for tests and reporting.
inline std::vector<int> validation_ranks(int n, int validation_size = 9) {
  std::vector<SplitEntry> e(n);
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08d", i);
    e[i] = {buf, i};
  }
  const auto s = split_dataset(e, validation_size);
  std::vector<int> ranks;
  for (const auto& id : s.validation_ids) ranks.push_back(std::stoi(id));
  return ranks;
}

}  // namespace rootseg
