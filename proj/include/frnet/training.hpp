/*
 * Copyright (c) 2026, The frnet-cpp Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "frnet/config.hpp"
#include "frnet/data.hpp"
#include "frnet/error.hpp"
#include "frnet/graph.hpp"
#include "frnet/metrics.hpp"
#include "frnet/models.hpp"

namespace frnet {

/// Adam with bias correction; moments live alongside the parameter list.
template <typename T>
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Adam(std::vector<Var<T>> params, double lr) : params_(std::move(params)), lr_(lr) {
    for (const auto& p : params_) {
      first_.emplace_back(p->size(), T(0));
      second_.emplace_back(p->size(), T(0));
    }
  }

  double lr() const noexcept { return lr_; }
  void set_lr(double lr) noexcept { lr_ = lr; }
  std::uint64_t steps() const noexcept { return step_; }
  const std::vector<T>& first_moment(std::size_t i) const { return first_.at(i); }
  const std::vector<T>& second_moment(std::size_t i) const { return second_.at(i); }

  /// One update from the accumulated gradients, which are zeroed afterwards.
  void step() {
    ++step_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    const T b1 = T(kBeta1), b2 = T(kBeta2);
    const T step_size = T(lr_ / c1);
    const T inv_sqrt_c2 = T(1.0 / std::sqrt(c2));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto w = p.data();
      auto& m = first_[i];
      auto& v = second_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = b1 * m[j] + (T(1) - b1) * g[j];
        v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
        w[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + T(kEps));
      }
      p.zero_grad();
    }
  }

 private:
  std::vector<Var<T>> params_;
  std::vector<std::vector<T>> first_;
  std::vector<std::vector<T>> second_;
  double lr_;
  std::uint64_t step_ = 0;
};

/// Tracks the best value of a monitored metric with a strict min-delta rule.
class PlateauTracker {
 public:
  PlateauTracker(bool maximize, double min_delta) : maximize_(maximize), min_delta_(min_delta) {}

  /// Records one epoch; returns true if it improved on the best so far.
  bool update(double value) {
    const bool improved = !has_best_ || (maximize_ ? value > best_ + min_delta_ : value < best_ - min_delta_);
    if (improved) {
      best_ = value;
      has_best_ = true;
      bad_epochs_ = 0;
    } else {
      ++bad_epochs_;
    }
    return improved;
  }

  void reset_bad_epochs() noexcept { bad_epochs_ = 0; }
  std::size_t bad_epochs() const noexcept { return bad_epochs_; }
  double best() const noexcept { return best_; }

 private:
  bool maximize_;
  double min_delta_;
  bool has_best_ = false;
  double best_ = 0.0;
  std::size_t bad_epochs_ = 0;
};

/// Multiplies the learning rate by `factor` once `patience` consecutive epochs fail to improve.
class ReduceLrOnPlateau {
 public:
  ReduceLrOnPlateau(double lr, double factor, std::size_t patience, bool maximize, double min_delta)
      : tracker_(maximize, min_delta), lr_(lr), factor_(factor), patience_(patience) {}

  double step(double metric) {
    tracker_.update(metric);
    if (tracker_.bad_epochs() >= patience_) {
      lr_ *= factor_;
      tracker_.reset_bad_epochs();
    }
    return lr_;
  }

  double lr() const noexcept { return lr_; }

 private:
  PlateauTracker tracker_;
  double lr_;
  double factor_;
  std::size_t patience_;
};

class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, bool maximize, double min_delta) : tracker_(maximize, min_delta), patience_(patience) {}

  /// Records one epoch; true means stop now.
  bool step(double metric) {
    tracker_.update(metric);
    return tracker_.bad_epochs() >= patience_;
  }

 private:
  PlateauTracker tracker_;
  std::size_t patience_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  double val_logloss = 0.0;
  double seconds = 0.0;
};

inline void write_metrics_header(std::ostream& os) { os << "epoch,lr,train_loss,val_auc,val_logloss,seconds\n"; }

inline void write_metrics_row(std::ostream& os, const EpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.17g,%.17g,%.17g,%.3f\n", e.epoch, e.lr, e.train_loss, e.val_auc,
                e.val_logloss, e.seconds);
  os << buf;
}

struct EvalResult {
  double auc = 0.0;
  double logloss = 0.0;
};

template <typename T>
EvalResult evaluate(const Model<T>& model, const data::Dataset& ds, std::size_t batch_size = 4096) {
  const auto p = model.predict(ds, batch_size);
  return {metrics::auc(p, ds.labels), metrics::logloss(p, ds.labels)};
}

template <typename T>
struct TrainResult {
  Model<T> best;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  EvalResult test;
};

inline ModelShape model_shape(const TrainConfig& cfg, const data::Dataset& ds) {
  ModelShape s;
  s.num_fields = ds.num_fields;
  s.num_features = ds.num_features;
  s.embed_dim = cfg.embed_dim;
  s.attn_dim = cfg.effective_attn_dim();
  s.cie_hidden = cfg.cie_hidden;
  s.variant = cfg.variant_id();
  return s;
}

/// Independent RNG streams derived from the run seed.
struct RunStreams {
  std::uint64_t init = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t dropout = 0;

  static RunStreams from_seed(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::vector<std::uint32_t> words(6);
    seq.generate(words.begin(), words.end());
    auto join = [&](int i) { return (std::uint64_t{words[2 * i]} << 32) | words[2 * i + 1]; };
    return {join(0), join(1), join(2)};
  }
};

/// One pass over `train` in a seeded order; returns the mean training loss.
template <typename T>
double train_epoch(Model<T>& model, Adam<T>& opt, const data::Dataset& train, const TrainConfig& cfg,
                   std::mt19937_64& shuffle_rng, std::mt19937_64& dropout_rng) {
  const std::size_t f = train.num_fields;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  ForwardContext<T> ctx;
  ctx.training = true;
  ctx.dropout = cfg.dropout;
  ctx.rng = &dropout_rng;

  std::vector<std::uint32_t> feats;
  std::vector<T> labels;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t count = std::min(cfg.batch_size, order.size() - start);
    feats.resize(count * f);
    labels.resize(count);
    for (std::size_t b = 0; b < count; ++b) {
      const std::size_t r = order[start + b];
      std::copy_n(train.features.begin() + static_cast<std::ptrdiff_t>(r * f), f, feats.begin() + static_cast<std::ptrdiff_t>(b * f));
      labels[b] = T(train.labels[r]);
    }
    Graph<T> g;
    auto loss = g.bce(model.forward(g, feats, ctx), std::span<const T>(labels));
    const double value = static_cast<double>((*loss)[0]);
    if (!std::isfinite(value)) throw NumericError("non-finite training loss at batch starting " + std::to_string(start));
    g.backward(loss);
    opt.step();
    loss_sum += value * static_cast<double>(count);
  }
  return loss_sum / static_cast<double>(train.size());
}

/**
 * Epoch loop: Adam on the cross-entropy, per-epoch validation, LR reduction
 * on plateau, early stopping, and the best-validation-AUC model restored
 * before the final test evaluation. `on_epoch` sees each log row as it lands.
 */
template <typename T>
TrainResult<T> train(const data::PreparedData& prepared, const TrainConfig& cfg,
                     const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  if (prepared.train.size() == 0) throw DataError("training partition is empty");
  const auto streams = RunStreams::from_seed(cfg.seed);
  auto model = Model<T>::init(model_shape(cfg, prepared.train), streams.init);
  TrainResult<T> result{model.clone(), {}, 0, {}};

  std::vector<Var<T>> params;
  for (const auto& [name, v] : model.named_parameters()) params.push_back(v);
  Adam<T> opt(params, cfg.lr);
  const bool maximize = cfg.scheduler_metric == "auc";
  ReduceLrOnPlateau scheduler(cfg.lr, cfg.scheduler_factor, cfg.scheduler_patience, maximize, cfg.min_delta);
  EarlyStopping stopper(cfg.early_stop_patience, /*maximize=*/true, cfg.min_delta);
  std::mt19937_64 shuffle_rng(streams.shuffle);
  std::mt19937_64 dropout_rng(streams.dropout);

  double best_auc = -std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochLog row;
    row.epoch = epoch;
    row.lr = opt.lr();
    row.train_loss = train_epoch(model, opt, prepared.train, cfg, shuffle_rng, dropout_rng);
    const auto val = evaluate(model, prepared.val, cfg.batch_size);
    row.val_auc = val.auc;
    row.val_logloss = val.logloss;
    if (cfg.log_timing) row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);

    if (val.auc > best_auc) {
      best_auc = val.auc;
      result.best.assign_from(model);
      result.best_epoch = epoch;
    }
    opt.set_lr(scheduler.step(maximize ? val.auc : val.logloss));
    if (stopper.step(val.auc)) break;
  }
  result.test = evaluate(result.best, prepared.test, cfg.batch_size);
  return result;
}

}  // namespace frnet
