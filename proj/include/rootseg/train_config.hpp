#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace rootseg {

struct TrainConfig {
  int batch_size = 4;
  double initial_lr = 0.01;
  double momentum = 0.99;
  double weight_decay = 1e-5;
  double lr_decay_factor = 0.3;
  int lr_decay_every = 30;
  double ce_weight = 0.3;
  int max_epochs = 80;
  int tiles_sampled_per_image = 90;
  int tiles_kept_per_image = 40;
  int input_size = 572;  // network input tile side
  double threshold = 0.5;
  bool augment = true;
  int validation_size = 9;
  std::uint64_t seed = 1;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (!(initial_lr > 0)) throw std::invalid_argument("TrainConfig: initial_lr must be positive");
    if (momentum < 0 || momentum >= 1) throw std::invalid_argument("TrainConfig: momentum outside [0,1)");
    if (weight_decay < 0) throw std::invalid_argument("TrainConfig: negative weight_decay");
    if (!(lr_decay_factor > 0)) throw std::invalid_argument("TrainConfig: lr_decay_factor must be positive");
    if (lr_decay_every < 1) throw std::invalid_argument("TrainConfig: lr_decay_every must be positive");
    if (ce_weight < 0) throw std::invalid_argument("TrainConfig: negative ce_weight");
    if (max_epochs < 0) throw std::invalid_argument("TrainConfig: negative max_epochs");
    if (tiles_sampled_per_image < 1 || tiles_kept_per_image < 1)
      throw std::invalid_argument("TrainConfig: tile counts must be positive");
    if (input_size < 1) throw std::invalid_argument("TrainConfig: input_size must be positive");
    if (!(threshold >= 0 && threshold <= 1)) throw std::invalid_argument("TrainConfig: threshold outside [0,1]");
    if (validation_size < 1) throw std::invalid_argument("TrainConfig: validation_size must be positive");
  }
};

// Step schedule: initial_lr * factor^floor(epoch / every).
inline double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
  return cfg.initial_lr * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every);
}

}  // namespace rootseg
