#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rootseg/cmaes.hpp"
#include "rootseg/dataio.hpp"
#include "rootseg/frangi.hpp"
#include "rootseg/metrics.hpp"

namespace rootseg {

// Decision vector for tuning lives in the unit cube, one coordinate per
// parameter: (s_min, s_max, beta, c, threshold, min_size). Each coordinate is
// clamped to [0,1] and mapped onto its legal range (log scale for beta and c),
// so a single CMA-ES step size suits all six.
struct FrangiSearchSpace {
  double sigma_lo = 0.5, sigma_hi = 6.0;
  double sigma_span_max = 4.0;
  double sigma_step = 1.0;
  double beta_lo = 0.1, beta_hi = 3.0;
  double c_lo = 1.0, c_hi = 100.0;
  double threshold_lo = 0.0, threshold_hi = 1.0;
  double min_size_hi = 300.0;

  static constexpr int kDimension = 6;

  FrangiParams decode(const std::vector<double>& u) const {
    if (u.size() != kDimension) throw std::invalid_argument("FrangiSearchSpace: expected 6 coordinates");
    auto at = [&](int i) { return std::clamp(std::isfinite(u[i]) ? u[i] : 0.5, 0.0, 1.0); };
    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    auto loglerp = [](double a, double b, double t) { return std::exp(std::log(a) + (std::log(b) - std::log(a)) * t); };
    FrangiParams p;
    const double s_min = lerp(sigma_lo, sigma_hi, at(0));
    const double s_max = s_min + sigma_span_max * at(1);
    p.sigmas.clear();
    for (double s = s_min; s <= s_max + 1e-9; s += sigma_step) p.sigmas.push_back(s);
    p.beta = loglerp(beta_lo, beta_hi, at(2));
    p.c = loglerp(c_lo, c_hi, at(3));
    p.vesselness_threshold = lerp(threshold_lo, threshold_hi, at(4));
    p.min_component_size = std::lround(min_size_hi * at(5));
    return p;
  }

  // Inverse of decode for parameters inside the space (sigmas read as min/max).
  std::vector<double> encode(const FrangiParams& p) const {
    auto inv = [](double a, double b, double v) { return std::clamp((v - a) / (b - a), 0.0, 1.0); };
    auto loginv = [&](double a, double b, double v) { return inv(std::log(a), std::log(b), std::log(v)); };
    const double s_min = *std::min_element(p.sigmas.begin(), p.sigmas.end());
    const double s_max = *std::max_element(p.sigmas.begin(), p.sigmas.end());
    return {inv(sigma_lo, sigma_hi, s_min), inv(0.0, sigma_span_max, s_max - s_min),
            loginv(beta_lo, beta_hi, p.beta), loginv(c_lo, c_hi, p.c),
            inv(threshold_lo, threshold_hi, p.vesselness_threshold),
            inv(0.0, min_size_hi, static_cast<double>(p.min_component_size))};
  }
};

// 1 - mean F1 over images whose truth contains roots. Images without roots
// have undefined F1 and are skipped.
inline double mean_f1_loss(const std::vector<RasterImage>& predictions, const std::vector<RasterImage>& truths) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("mean_f1_loss: size mismatch");
  double sum = 0;
  int n = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const auto s = f1_precision_recall_accuracy(confusion(predictions[i], truths[i]));
    if (!s.f1) continue;
    sum += *s.f1;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("objective undefined: every ground-truth mask is empty");
  return 1.0 - sum / n;
}

inline double frangi_objective(const std::vector<ImagePair>& dataset, const FrangiParams& params) {
  if (dataset.empty()) throw std::invalid_argument("frangi_objective: empty dataset");
  std::vector<RasterImage> preds, truths;
  for (const auto& p : dataset) {
    if (count_root_pixels(p.mask) == 0) continue;
    preds.push_back(frangi_segment(p.image, params));
    truths.push_back(p.mask);
  }
  return mean_f1_loss(preds, truths);
}

inline double frangi_objective(const std::vector<ImagePair>& dataset, const std::vector<double>& u,
                               const FrangiSearchSpace& space = {}) {
  return frangi_objective(dataset, space.decode(u));
}

struct FrangiTuning {
  FrangiParams params;
  double initial_fitness = 0;
  double best_fitness = 0;
  CmaResult search;
};

// Searches the unit cube starting from the encoding of `initial`. The initial
// parameters are scored as given and kept unless the search beats them, so a
// zero budget returns them unchanged.
inline FrangiTuning tune_frangi(const std::vector<ImagePair>& dataset, const FrangiParams& initial,
                                long long max_evaluations, double initial_sigma, int population_size,
                                std::uint64_t seed, const FrangiSearchSpace& space = {}) {
  initial.validate();
  FrangiTuning t;
  t.params = initial;
  t.initial_fitness = t.best_fitness = frangi_objective(dataset, initial);
  CmaConfig cfg;
  cfg.dimension = FrangiSearchSpace::kDimension;
  cfg.initial_mean = space.encode(initial);
  cfg.initial_sigma = initial_sigma;
  cfg.population_size = population_size;
  cfg.max_evaluations = max_evaluations;
  cfg.seed = seed;
  cfg.bounds = std::vector<std::pair<double, double>>(FrangiSearchSpace::kDimension, {0.0, 1.0});
  t.search = cmaes_minimize([&](const std::vector<double>& u) { return frangi_objective(dataset, u, space); }, cfg);
  if (!t.search.best_point.empty() && t.search.best_fitness < t.best_fitness) {
    t.best_fitness = t.search.best_fitness;
    t.params = space.decode(t.search.best_point);
  }
  return t;
}

}  // namespace rootseg
