#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <tuple>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rootseg/augment.hpp"
#include "rootseg/dataio.hpp"
#include "rootseg/inference.hpp"
#include "rootseg/instances.hpp"
#include "rootseg/loss.hpp"
#include "rootseg/metrics.hpp"
#include "rootseg/net/checkpoint.hpp"
#include "rootseg/net/unet.hpp"
#include "rootseg/optim.hpp"
#include "rootseg/rng.hpp"
#include "rootseg/train_config.hpp"

namespace rootseg {

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  Metric train_f1;
  Metric val_f1;
  double train_loss = 0;
};

struct TrainState {
  net::NetworkParams<float> params;
  OptimizerState<float> optimizer;
  int next_epoch = 0;
  net::NetworkParams<float> best_params;
  Metric best_val_f1;
  int best_epoch = -1;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochLog> log;
  bool diverged = false;
};

using EpochCallback = std::function<void(const EpochLog&, const TrainState&)>;

inline bool better(const Metric& a, const Metric& b) {
  if (!a) return false;
  if (!b) return true;
  return *a > *b;
}

inline void add_confusion(const Raster<float>& prob, const RasterImage& truth, double threshold, ConfusionCounts& c) {
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const bool p = prob.data()[i] >= threshold, g = truth.data()[i] > 0.5f;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
}

// Tile-level F1 over every grid tile of every validation image, no augmentation.
inline Metric validation_f1(const net::NetworkParams<float>& params, const std::vector<ImagePair>& val, int in_size,
                            double threshold) {
  ConfusionCounts c;
  const int out_size = net::output_geometry(params.arch, in_size);
  const int margin = (in_size - out_size) / 2;
  for (const auto& pair : val) {
    const RasterImage padded = reflect_pad(pair.image, margin, margin, margin, margin);
    for (const auto& spec : plan_tile_grid(pair.image.height(), pair.image.width(), in_size, out_size)) {
      const RasterImage prob = predict_tile(params, extract_tile(padded, spec));
      add_confusion(prob, crop(pair.mask, spec.out_row, spec.out_col, out_size, out_size), threshold, c);
    }
  }
  return f1_precision_recall_accuracy(c).f1;
}

inline TrainState initial_state(const net::ArchSpec& arch, const TrainConfig& cfg) {
  TrainState s;
  s.params = net::he_init<float>(arch, derive_seed(cfg.seed, 0x1417));
  s.optimizer = OptimizerState<float>::for_params(s.params);
  s.best_params = s.params;
  return s;
}

// Mini-batch SGD over per-epoch instance selections; keeps the parameters with
// the best validation F1. Every epoch draws from its own stream derived from
// (seed, epoch), so a resumed run reproduces an uninterrupted one.
inline TrainResult train_loop(const std::vector<ImagePair>& train, const std::vector<ImagePair>& val,
                              const net::ArchSpec& arch, const TrainConfig& cfg,
                              std::optional<TrainState> resume = std::nullopt, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  arch.validate();
  if (train.empty() || val.empty()) throw std::invalid_argument("train_loop: empty train or validation set");
  const int out_size = net::output_geometry(arch, cfg.input_size);
  const int margin = (cfg.input_size - out_size) / 2;

  TrainResult res;
  res.state = resume ? std::move(*resume) : initial_state(arch, cfg);
  TrainState& st = res.state;
  if (!(st.params.arch == arch)) throw std::invalid_argument("train_loop: resumed parameters have another architecture");

  std::vector<PaddedPair> padded;
  padded.reserve(train.size());
  for (const auto& p : train) {
    ImagePair big{reflect_pad(p.image, margin, margin, margin, margin), reflect_pad(p.mask, margin, margin, margin, margin)};
    padded.push_back({std::move(big.image), std::move(big.mask), p.image.height(), p.image.width()});
  }
  const InstanceConfig icfg{cfg.input_size, out_size, cfg.tiles_sampled_per_image, cfg.tiles_kept_per_image};
  const AugmentConfig acfg;

  for (int epoch = st.next_epoch; epoch < cfg.max_epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch));
    Rng rng(epoch_seed);
    std::vector<TrainingTile> tiles = select_instances(padded, icfg, rng);
    for (std::size_t i = tiles.size(); i > 1; --i)
      std::swap(tiles[i - 1], tiles[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(i) - 1))]);

    const double lr = lr_at(epoch, cfg);
    ConfusionCounts train_counts;
    double loss_sum = 0;
    int batches = 0;
    bool diverged = false;
    for (std::size_t b0 = 0; b0 < tiles.size() && !diverged; b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(tiles.size(), b0 + cfg.batch_size);
      std::vector<net::ForwardCache<float>> caches;
      std::vector<float> probs, truths;
      for (std::size_t t = b0; t < b1; ++t) {
        Rng trng(derive_seed(epoch_seed, t + 1));
        RasterImage img = tiles[t].image, mask = tiles[t].mask;
        if (cfg.augment) std::tie(img, mask) = augment_tile(img, mask, acfg, trng);
        auto fr = net::forward(st.params, net::to_tensor<float>(normalize(img)), true);
        const RasterImage truth = center_crop(mask, tiles[t].spec);
        add_confusion(net::to_raster(fr.prob), truth, cfg.threshold, train_counts);
        probs.insert(probs.end(), fr.prob.data.begin(), fr.prob.data.end());
        truths.insert(truths.end(), truth.data().begin(), truth.data().end());
        caches.push_back(std::move(*fr.cache));
      }
      std::vector<float> grad(probs.size());
      const double loss = combined_loss_grad<float>(probs, truths, cfg.ce_weight, grad);
      if (!std::isfinite(loss)) {
        diverged = true;
        break;
      }
      net::NetworkParams<float> g = st.params.zeros_like();
      const std::size_t per = static_cast<std::size_t>(out_size) * out_size;
      for (std::size_t t = 0; t < caches.size(); ++t) {
        net::Tensor<float> up(1, out_size, out_size);
        std::copy(grad.begin() + static_cast<std::ptrdiff_t>(t * per),
                  grad.begin() + static_cast<std::ptrdiff_t>((t + 1) * per), up.data.begin());
        net::backward_accumulate(st.params, caches[t], up, g);
      }
      try {
        net::NetworkParams<float> next = st.params;
        OptimizerState<float> next_opt = st.optimizer;
        sgd_nesterov_step(next, g, next_opt, lr, cfg.momentum, cfg.weight_decay);
        st.params = std::move(next);
        st.optimizer = std::move(next_opt);
      } catch (const NonFiniteGradient&) {
        diverged = true;
        break;
      }
      loss_sum += loss;
      ++batches;
    }
    if (diverged) {
      res.diverged = true;
      break;
    }

    EpochLog row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_f1 = f1_precision_recall_accuracy(train_counts).f1;
    row.val_f1 = validation_f1(st.params, val, cfg.input_size, cfg.threshold);
    row.train_loss = batches ? loss_sum / batches : std::numeric_limits<double>::quiet_NaN();
    st.optimizer.epoch = epoch + 1;
    st.next_epoch = epoch + 1;
    if (better(row.val_f1, st.best_val_f1) || st.best_epoch < 0) {
      st.best_val_f1 = row.val_f1;
      st.best_epoch = epoch;
      st.best_params = st.params;
    }
    res.log.push_back(row);
    if (on_epoch) on_epoch(row, st);
  }
  return res;
}

inline std::string format_metric(const Metric& m) {
  if (!m) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *m);
  return buf;
}

inline void write_log_header(std::ostream& out) { out << "epoch,lr,train_f1,val_f1,train_loss\n"; }

inline void write_log_row(std::ostream& out, const EpochLog& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%.8g,%s,%s,%.6f\n", r.epoch, r.lr, format_metric(r.train_f1).c_str(),
                format_metric(r.val_f1).c_str(), r.train_loss);
  out << buf;
}

inline double metric_or_nan(const Metric& m) { return m ? *m : std::numeric_limits<double>::quiet_NaN(); }
inline Metric nan_to_metric(double v) { return std::isnan(v) ? Metric{} : Metric{v}; }

// Everything needed to resume: current weights, momentum buffers ("velocity/"),
// the best weights so far ("best/") and the epoch counters.
inline net::Checkpoint state_checkpoint(const TrainState& st) {
  net::Checkpoint ck;
  ck.arch = st.params.arch;
  ck.metadata = {{"next_epoch", st.next_epoch},
                 {"best_epoch", st.best_epoch},
                 {"best_val_f1", metric_or_nan(st.best_val_f1)}};
  net::put_params(ck, st.params);
  net::put_params(ck, st.optimizer.velocity, "velocity/");
  net::put_params(ck, st.best_params, "best/");
  return ck;
}

inline TrainState state_from_checkpoint(const net::Checkpoint& ck, const std::string& path = "<checkpoint>") {
  for (const char* key : {"next_epoch", "best_epoch", "best_val_f1"})
    if (!ck.metadata.count(key)) throw net::CheckpointError(path, std::string("not a training state (missing ") + key + ")");
  TrainState st;
  st.params = net::get_params(ck, "", path);
  st.optimizer.velocity = net::get_params(ck, "velocity/", path);
  st.best_params = net::get_params(ck, "best/", path);
  st.next_epoch = static_cast<int>(ck.metadata.at("next_epoch"));
  st.optimizer.epoch = st.next_epoch;
  st.best_epoch = static_cast<int>(ck.metadata.at("best_epoch"));
  st.best_val_f1 = nan_to_metric(ck.metadata.at("best_val_f1"));
  return st;
}

// The selected model alone, as consumed by segmentation.
inline net::Checkpoint best_model_checkpoint(const TrainState& st) {
  return net::model_checkpoint(st.best_params,
                               {{"epoch", st.best_epoch}, {"val_f1", metric_or_nan(st.best_val_f1)}});
}

}  // namespace rootseg
