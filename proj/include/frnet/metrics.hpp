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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "frnet/error.hpp"

namespace frnet::metrics {

inline constexpr double kProbEps = 1e-7;

/// Cross-entropy of one prediction, probability clamped to [eps, 1 - eps].
template <typename T>
T bce_term(T p, T y, T eps = T(kProbEps)) {
  const T q = std::clamp(p, eps, T(1) - eps);
  return -(y * std::log(q) + (T(1) - y) * std::log(T(1) - q));
}

/**
 * Area under the ROC curve as the Mann-Whitney statistic, ties sharing
 * their average rank. Throws NumericError unless both classes are present.
 */
template <typename S>
double auc(std::span<const S> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw ContractError("auc: " + std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // 1-based ranks i+1 .. j share their mean.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw NumericError("AUC is undefined when only one class is present");
  const double np = static_cast<double>(n_pos);
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

template <typename S>
double auc(const std::vector<S>& scores, const std::vector<std::uint8_t>& labels) {
  return auc(std::span<const S>(scores), std::span<const std::uint8_t>(labels));
}

/// Mean binary cross-entropy, same clamping as the training loss.
template <typename S>
double logloss(std::span<const S> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ContractError("logloss: needs equal, non-zero numbers of scores and labels");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    total += bce_term<double>(static_cast<double>(scores[i]), labels[i] ? 1.0 : 0.0);
  }
  return total / static_cast<double>(scores.size());
}

template <typename S>
double logloss(const std::vector<S>& scores, const std::vector<std::uint8_t>& labels) {
  return logloss(std::span<const S>(scores), std::span<const std::uint8_t>(labels));
}

/// Histogram of values in [0, 1] over equal-width bins; the last bin is closed.
struct Histogram {
  std::vector<std::size_t> counts;
  std::size_t total = 0;

  explicit Histogram(std::size_t bins = 100) : counts(bins, 0) {}

  double bin_low(std::size_t b) const { return static_cast<double>(b) / static_cast<double>(counts.size()); }
  double bin_high(std::size_t b) const { return static_cast<double>(b + 1) / static_cast<double>(counts.size()); }

  void add(double v) {
    const auto bins = counts.size();
    auto b = static_cast<std::size_t>(std::clamp(v, 0.0, 1.0) * static_cast<double>(bins));
    ++counts[std::min(b, bins - 1)];
    ++total;
  }
};

}  // namespace frnet::metrics
