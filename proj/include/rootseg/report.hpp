#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "rootseg/metrics.hpp"
#include "rootseg/stats.hpp"

namespace rootseg {

struct MetricsReport {
  std::vector<ConfusionCounts> per_image_counts;
  std::vector<Scores> per_image;
  ConfusionCounts pooled_counts;
  Scores pooled;
  double prediction_mean = 0;  // predicted root-pixel fraction over all pixels
  double true_mean = 0;
  // Over images whose truth contains roots.
  std::size_t rooted_images = 0;
  MeanStd f1, precision, recall, accuracy;
};

inline MetricsReport report(const std::vector<std::pair<RasterImage, RasterImage>>& images) {
  if (images.empty()) throw std::invalid_argument("report: no images");
  MetricsReport rep;
  std::vector<std::optional<double>> f1, pr, rc, acc;
  for (const auto& [pred, truth] : images) {
    const auto c = confusion(pred, truth);
    const auto s = f1_precision_recall_accuracy(c);
    rep.per_image_counts.push_back(c);
    rep.per_image.push_back(s);
    rep.pooled_counts += c;
    if (c.tp + c.fn > 0) {
      ++rep.rooted_images;
      f1.push_back(s.f1);
      pr.push_back(s.precision);
      rc.push_back(s.recall);
      acc.push_back(s.accuracy);
    }
  }
  rep.pooled = f1_precision_recall_accuracy(rep.pooled_counts);
  const double total = static_cast<double>(rep.pooled_counts.total());
  rep.prediction_mean = (rep.pooled_counts.tp + rep.pooled_counts.fp) / total;
  rep.true_mean = (rep.pooled_counts.tp + rep.pooled_counts.fn) / total;
  rep.f1 = mean_std(f1);
  rep.precision = mean_std(pr);
  rep.recall = mean_std(rc);
  rep.accuracy = mean_std(acc);
  return rep;
}

}  // namespace rootseg
