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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "frnet/analysis.hpp"
#include "oracle.hpp"

namespace frnet {
namespace {

using Labels = std::vector<std::uint8_t>;

TEST(Auc, HandExamples) {
  EXPECT_DOUBLE_EQ(metrics::auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(metrics::auc(std::vector<double>{0.1, 0.9}, Labels{0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(metrics::auc(std::vector<double>{0.9, 0.1}, Labels{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(metrics::auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, Labels{0, 1, 0, 1}), 0.5);
}

TEST(Auc, SingleClassThrows) {
  EXPECT_THROW(metrics::auc(std::vector<double>{0.1, 0.2}, Labels{1, 1}), NumericError);
  EXPECT_THROW(metrics::auc(std::vector<double>{0.1, 0.2}, Labels{0, 0}), NumericError);
  EXPECT_THROW(metrics::auc(std::vector<double>{0.1}, Labels{0, 1}), ContractError);
}

TEST(Auc, MatchesPairCountingOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> size(2, 1000);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = size(rng);
    // Coarse scores so ties are common.
    std::uniform_int_distribution<int> level(0, trial % 2 ? 9 : 100000);
    std::bernoulli_distribution pos(0.3);
    std::vector<double> s(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) / 10.0;
      y[i] = pos(rng);
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(metrics::auc(s, y), oracle::auc_pairs(s, y), 1e-9) << "n=" << n;
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution pos(0.4);
  std::vector<double> s(500), t(500);
  Labels y(500);
  for (std::size_t i = 0; i < 500; ++i) {
    s[i] = normal(rng);
    t[i] = oracle::sigmoid(3.0 * s[i] + 1.0);
    y[i] = pos(rng);
  }
  EXPECT_NEAR(metrics::auc(s, y), metrics::auc(t, y), 1e-12);
}

TEST(Auc, FlippingLabelsComplements) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution pos(0.5);
  std::vector<double> s(300);
  Labels y(300), flipped(300);
  for (std::size_t i = 0; i < 300; ++i) {
    s[i] = std::round(normal(rng) * 4.0);
    y[i] = pos(rng);
    flipped[i] = 1 - y[i];
  }
  EXPECT_NEAR(metrics::auc(s, y) + metrics::auc(s, flipped), 1.0, 1e-12);
}

TEST(Auc, FloatScores) {
  EXPECT_DOUBLE_EQ(metrics::auc(std::vector<float>{0.2f, 0.7f, 0.7f}, Labels{0, 1, 0}), 0.75);
}

TEST(Logloss, Values) {
  EXPECT_NEAR(metrics::logloss(std::vector<double>{0.5}, Labels{1}), std::log(2.0), 1e-15);
  EXPECT_NEAR(metrics::logloss(std::vector<double>{0.8, 0.3}, Labels{1, 0}), 0.28990, 1e-5);
  EXPECT_NEAR(metrics::logloss(std::vector<double>{0.0}, Labels{1}), -std::log(1e-7), 1e-9);
  EXPECT_NEAR(metrics::logloss(std::vector<float>{1.0f}, Labels{0}), -std::log(1e-7), 1e-6);
  EXPECT_THROW(metrics::logloss(std::vector<double>{}, Labels{}), ContractError);
}

TEST(Histogram, Binning) {
  metrics::Histogram h(4);
  for (double v : {0.0, 0.1, 0.25, 0.6, 0.99, 1.0, -0.5, 2.0}) h.add(v);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{3, 1, 1, 3}));
  EXPECT_EQ(h.total, 8u);
  EXPECT_DOUBLE_EQ(h.bin_low(1), 0.25);
  EXPECT_DOUBLE_EQ(h.bin_high(3), 1.0);
  std::ostringstream os;
  analysis::write_histogram_csv(os, h);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "bin_low,bin_high,count");
}

data::Dataset random_dataset(std::size_t rows, std::size_t f, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
  data::Dataset ds;
  ds.num_fields = f;
  ds.num_features = n;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::uint32_t> x(f);
    for (auto& v : x) v = pick(rng);
    ds.push_back({static_cast<std::uint8_t>(r % 3 == 0), x});
  }
  return ds;
}

ModelShape gate_shape(Variant v) {
  ModelShape s;
  s.num_fields = 5;
  s.num_features = 40;
  s.embed_dim = 6;
  s.attn_dim = 6;
  s.cie_hidden = {16};
  s.variant = v;
  return s;
}

TEST(GateStats, UntrainedGateSitsAtOneHalf) {
  const auto ds = random_dataset(3000, 5, 40, 4);
  const auto m = Model<float>::init(gate_shape(Variant::kFrnet), 5);
  const auto st = analysis::gate_stats(m, ds, 2000, 6, 512);
  EXPECT_EQ(st.instances, 2000u);
  EXPECT_EQ(st.histogram.total, 2000u * 5 * 6);
  EXPECT_NEAR(st.mean, 0.5, 0.02);
  EXPECT_NEAR(st.mean + st.complement_mean, 1.0, 1e-6);
}

TEST(GateStats, VectorGateCountsOneValuePerField) {
  const auto ds = random_dataset(200, 5, 40, 7);
  const auto m = Model<float>::init(gate_shape(Variant::kFrnetVec), 8);
  const auto st = analysis::gate_stats(m, ds, 1000, 9);
  EXPECT_EQ(st.instances, 200u);
  EXPECT_EQ(st.histogram.total, 200u * 5);
}

TEST(GateStats, MeanMatchesDirectComputation) {
  const auto ds = random_dataset(300, 5, 40, 10);
  auto m = Model<double>::init(gate_shape(Variant::kFrnet), 11);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (auto& [n, v] : m.named_parameters())
    for (auto& x : v->data()) x = normal(rng);
  const auto st = analysis::gate_stats(m, ds, 300, 0, 64);
  Graph<double> g(false);
  auto w = selection_weights(g, m.embed(g, ds.features), m.frnet());
  const auto s = g.sigmoid(*w);
  double sum = 0.0;
  for (double v : s->data()) sum += v;
  EXPECT_NEAR(st.mean, sum / double(s->size()), 1e-12);
  EXPECT_NEAR(st.mean + st.complement_mean, 1.0, 1e-12);
  EXPECT_GT(st.mean, 0.0);
  EXPECT_LT(st.mean, 1.0);
}

TEST(GateStats, NeedsAWeightUnit) {
  const auto ds = random_dataset(10, 5, 40, 13);
  EXPECT_THROW(analysis::gate_stats(Model<float>::init(gate_shape(Variant::kPlainFm), 1), ds), UsageError);
  EXPECT_THROW(analysis::gate_stats(Model<float>::init(gate_shape(Variant::kComplementOnly), 1), ds), UsageError);
}

TEST(SampleRows, SeededSortedDistinct) {
  const auto a = analysis::sample_rows(1000, 100, 3);
  EXPECT_EQ(a, analysis::sample_rows(1000, 100, 3));
  EXPECT_NE(a, analysis::sample_rows(1000, 100, 4));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::adjacent_find(a.begin(), a.end()), a.end());
  EXPECT_EQ(analysis::sample_rows(5, 100, 3).size(), 5u);
}

}  // namespace
}  // namespace frnet
