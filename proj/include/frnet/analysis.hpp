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
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "frnet/data.hpp"
#include "frnet/error.hpp"
#include "frnet/graph.hpp"
#include "frnet/metrics.hpp"
#include "frnet/models.hpp"

namespace frnet::analysis {

/// Distribution of the selection gate s(W) over a sample of instances.
struct GateStats {
  double mean = 0.0;             // mean s(W): share taken from the original E
  double complement_mean = 0.0;  // mean 1 - s(W): share taken from E_g
  std::size_t instances = 0;
  metrics::Histogram histogram{100};
};

/// Seeded sample of min(count, n) distinct row indices, in ascending order.
inline std::vector<std::size_t> sample_rows(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (count >= n) return rows;
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(count);
  std::sort(rows.begin(), rows.end());
  return rows;
}

template <typename T>
GateStats gate_stats(const Model<T>& model, const data::Dataset& ds, std::size_t sample_size = 100000,
                     std::uint64_t seed = 0, std::size_t batch_size = 4096) {
  if (!model.frnet().ieu_w) throw UsageError("gate statistics need a variant with a weight unit (IEU_W)");
  model.check_dataset(ds);
  const auto subset = ds.subset(sample_rows(ds.size(), sample_size, seed));
  GateStats stats;
  stats.instances = subset.size();
  double sum = 0.0, complement = 0.0;
  const std::size_t f = subset.num_fields;
  for (std::size_t start = 0; start < subset.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, subset.size() - start);
    Graph<T> g(/*record=*/false);
    std::span<const std::uint32_t> feats(subset.features.data() + start * f, count * f);
    auto w = selection_weights(g, model.embed(g, feats), model.frnet());
    auto gate = g.sigmoid(*w);
    for (T s : gate->data()) {
      const double v = static_cast<double>(s);
      sum += v;
      complement += 1.0 - v;
      stats.histogram.add(v);
    }
  }
  if (stats.histogram.total == 0) throw DataError("gate statistics need at least one instance");
  stats.mean = sum / static_cast<double>(stats.histogram.total);
  stats.complement_mean = complement / static_cast<double>(stats.histogram.total);
  return stats;
}

inline void write_histogram_csv(std::ostream& os, const metrics::Histogram& h) {
  os << "bin_low,bin_high,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) os << h.bin_low(b) << ',' << h.bin_high(b) << ',' << h.counts[b] << '\n';
}

/// One CSV row per feature index: index, then the d embedding values.
template <typename T>
void write_embeddings_csv(std::ostream& os, const Model<T>& model) {
  const auto& table = *model.embedding_table();
  const std::size_t d = table.dim(1);
  os << "index";
  for (std::size_t k = 0; k < d; ++k) os << ",e" << k;
  os << '\n';
  os.precision(9);
  for (std::size_t r = 0; r < table.dim(0); ++r) {
    os << r;
    for (std::size_t k = 0; k < d; ++k) os << ',' << table[r * d + k];
    os << '\n';
  }
}

/// Context-aware rows E_r for sampled instances: instance, field, feature, then d values.
template <typename T>
void write_refined_csv(std::ostream& os, const Model<T>& model, const data::Dataset& ds, const std::vector<std::size_t>& rows) {
  model.check_dataset(ds);
  const std::size_t f = ds.num_fields, d = model.shape().embed_dim;
  os << "instance,field,feature";
  for (std::size_t k = 0; k < d; ++k) os << ",r" << k;
  os << '\n';
  os.precision(9);
  for (auto r : rows) {
    Graph<T> g(/*record=*/false);
    std::span<const std::uint32_t> feats(ds.features.data() + r * f, f);
    auto refined = frnet_forward(g, model.embed(g, feats), model.frnet());
    for (std::size_t i = 0; i < f; ++i) {
      os << r << ',' << i << ',' << feats[i];
      for (std::size_t k = 0; k < d; ++k) os << ',' << (*refined)[i * d + k];
      os << '\n';
    }
  }
}

}  // namespace frnet::analysis
