#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "rootseg/raster.hpp"

namespace rootseg {

inline constexpr double kDiceEps = 1e-6;
inline constexpr double kProbClamp = 1e-7;

template <typename T>
void check_loss_inputs(std::span<const T> pred, std::span<const T> truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("loss: prediction and truth differ in shape");
}

// 1 - (2 sum p g + eps) / (sum p + sum g + eps)
template <typename T>
double dice_loss(std::span<const T> pred, std::span<const T> truth) {
  check_loss_inputs(pred, truth);
  double inter = 0, sp = 0, sg = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += static_cast<double>(pred[i]) * truth[i];
    sp += pred[i];
    sg += truth[i];
  }
  return 1.0 - (2 * inter + kDiceEps) / (sp + sg + kDiceEps);
}

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
template <typename T>
double cross_entropy(std::span<const T> pred, std::span<const T> truth) {
  check_loss_inputs(pred, truth);
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), kProbClamp, 1 - kProbClamp);
    const double g = truth[i];
    s -= g * std::log(p) + (1 - g) * std::log(1 - p);
  }
  return s / static_cast<double>(pred.size());
}

template <typename T>
double combined_loss(std::span<const T> pred, std::span<const T> truth, double ce_weight = 0.3) {
  const double d = dice_loss(pred, truth);
  if (ce_weight == 0) return d;
  return d + ce_weight * cross_entropy(pred, truth);
}

inline double dice_loss(const RasterImage& pred, const RasterImage& truth) {
  if (!pred.same_shape(truth)) throw std::invalid_argument("dice_loss: shape mismatch");
  return dice_loss<float>(pred.data(), truth.data());
}

inline double combined_loss(const RasterImage& pred, const RasterImage& truth, double ce_weight = 0.3) {
  if (!pred.same_shape(truth)) throw std::invalid_argument("combined_loss: shape mismatch");
  return combined_loss<float>(pred.data(), truth.data(), ce_weight);
}

// Loss value and dLoss/dpred for the combined loss.
template <typename T>
double combined_loss_grad(std::span<const T> pred, std::span<const T> truth, double ce_weight, std::span<T> grad) {
  check_loss_inputs(pred, truth);
  if (grad.size() != pred.size()) throw std::invalid_argument("combined_loss_grad: gradient size mismatch");
  double inter = 0, sp = 0, sg = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += static_cast<double>(pred[i]) * truth[i];
    sp += pred[i];
    sg += truth[i];
  }
  const double num = 2 * inter + kDiceEps, den = sp + sg + kDiceEps;
  const double n = static_cast<double>(pred.size());
  double ce = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double g = truth[i];
    double d = -(2 * g * den - num) / (den * den);
    const double p = static_cast<double>(pred[i]);
    const double pc = std::clamp(p, kProbClamp, 1 - kProbClamp);
    if (ce_weight != 0) {
      ce -= g * std::log(pc) + (1 - g) * std::log(1 - pc);
      if (p > kProbClamp && p < 1 - kProbClamp) d += ce_weight * (-(g / pc) + (1 - g) / (1 - pc)) / n;
    }
    grad[i] = static_cast<T>(d);
  }
  return 1.0 - num / den + ce_weight * ce / n;
}

}  // namespace rootseg
