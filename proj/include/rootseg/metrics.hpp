#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rootseg/raster.hpp"

namespace rootseg {

struct ConfusionCounts {
  long long tp = 0, fp = 0, fn = 0, tn = 0;

  long long total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// A metric that is 0/0 is std::nullopt ("undefined"), never 0.
using Metric = std::optional<double>;

struct Scores {
  Metric f1, precision, recall, accuracy;
};

inline ConfusionCounts confusion(const RasterImage& pred, const RasterImage& truth) {
  if (pred.height() != truth.height() || pred.width() != truth.width() ||
      pred.channels() != 1 || truth.channels() != 1)
    throw std::invalid_argument("confusion: masks differ in shape");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data()[i] > 0.5f, g = truth.data()[i] > 0.5f;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline Metric f1_from(double precision, double recall) {
  if (precision + recall == 0) return 0.0;
  return 2 * precision * recall / (precision + recall);
}

// F1 is undefined exactly when recall is (no true roots); a prediction with no
// true positives against a rooted truth scores F1 = 0.
inline Scores f1_precision_recall_accuracy(const ConfusionCounts& c) {
  Scores s;
  if (c.tp + c.fp > 0) s.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
  if (c.tp + c.fn > 0) s.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
  if (c.total() > 0) s.accuracy = static_cast<double>(c.tp + c.tn) / c.total();
  if (s.recall) s.f1 = 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn);
  return s;
}

}  // namespace rootseg
