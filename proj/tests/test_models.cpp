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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "frnet/models.hpp"
#include "oracle.hpp"

namespace frnet {
namespace {

ModelShape small_shape(Variant v, std::size_t f = 4, std::size_t n = 30, std::size_t d = 6) {
  ModelShape s;
  s.num_fields = f;
  s.num_features = n;
  s.embed_dim = d;
  s.attn_dim = d;
  s.cie_hidden = {8};
  s.variant = v;
  return s;
}

std::vector<std::uint32_t> random_features(std::size_t batch, std::size_t f, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
  std::vector<std::uint32_t> x(batch * f);
  for (auto& v : x) v = pick(rng);
  return x;
}

TEST(FmPairwise, MatchesBruteForceInSinglePrecision) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> size(1, 8);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t f = size(rng), d = size(rng);
    std::vector<double> e(f * d);
    for (auto& x : e) x = static_cast<float>(normal(rng));
    std::vector<float> ef(e.begin(), e.end());
    Graph<float> g(false);
    const float fast = (*g.fm_pairwise(make_var<float>({1, f, d}, ef)))[0];
    const double brute = oracle::pairwise_brute(e, f, d);
    EXPECT_LE(std::abs(fast - brute), 1e-5 * std::max(1.0, std::abs(brute))) << "f=" << f << " d=" << d;
  }
}

TEST(FmPairwise, Examples) {
  Graph<double> g(false);
  EXPECT_DOUBLE_EQ((*g.fm_pairwise(make_var<double>({1, 2, 2}, {1, 2, 3, -0.5})))[0], 2.0);
  EXPECT_DOUBLE_EQ((*g.fm_pairwise(make_var<double>({1, 3, 1}, {1, 1, 1})))[0], 3.0);
  EXPECT_EQ((*g.fm_pairwise(make_var<double>({1, 1, 3}, {4, 5, 6})))[0], 0.0);
}

TEST(Model, InitRejectsEmptyShapes) {
  auto s = small_shape(Variant::kPlainFm);
  s.num_features = 0;
  EXPECT_THROW(Model<float>::init(s, 1), ContractError);
}

TEST(Model, InitialStateIsNeutral) {
  auto m = Model<float>::init(small_shape(Variant::kFrnet), 3);
  for (float w : m.linear_weights()->data()) EXPECT_EQ(w, 0.0f);
  EXPECT_EQ((*m.bias())[0], 0.0f);
  double sum = 0.0, sq = 0.0;
  for (float e : m.embedding_table()->data()) {
    sum += e;
    sq += double(e) * e;
  }
  const double n = double(m.embedding_table()->size());
  EXPECT_NEAR(std::sqrt(sq / n - (sum / n) * (sum / n)), 0.01, 0.002);

  std::mt19937_64 rng(4);
  const auto x = random_features(64, 4, 30, rng);
  Graph<float> g(false);
  const auto probs = m.forward(g, x);
  for (float p : probs->data()) EXPECT_NEAR(p, 0.5f, 0.01f);
}

TEST(Model, VariantsShareTheFmInitialisation) {
  auto fm = Model<float>::init(small_shape(Variant::kPlainFm), 5);
  for (int id = 2; id <= kNumVariants; ++id) {
    auto m = Model<float>::init(small_shape(static_cast<Variant>(id)), 5);
    EXPECT_EQ(m.embedding_table()->values(), fm.embedding_table()->values()) << id;
  }
}

TEST(Model, PlainVariantIsBitEqualToFm) {
  auto m = Model<float>::init(small_shape(Variant::kPlainFm), 6);
  std::mt19937_64 rng(7);
  std::normal_distribution<float> normal(0.0f, 0.3f);
  for (auto& [n, v] : m.named_parameters())
    for (auto& x : v->data()) x = normal(rng);
  const auto feats = random_features(50, 4, 30, rng);
  Graph<float> g(false);
  const auto got = m.logits(g, feats);
  // FM written out directly: bias + sum w + square-of-sums pairwise term.
  const auto& table = *m.embedding_table();
  for (std::size_t b = 0; b < 50; ++b) {
    float linear = 0.0f;
    std::vector<float> e(4 * 6);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto idx = feats[b * 4 + i];
      linear += (*m.linear_weights())[idx];
      for (std::size_t k = 0; k < 6; ++k) e[i * 6 + k] = table[idx * 6 + k];
    }
    const float pair = (*g.fm_pairwise(make_var<float>({1, 4, 6}, e)))[0];
    EXPECT_EQ((*got)[b], (linear + pair) + (*m.bias())[0]) << b;
  }
}

TEST(Model, LogitMatchesFirstAndSecondOrderOracle) {
  auto m = Model<double>::init(small_shape(Variant::kPlainFm, 3, 10, 4), 8);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& [n, v] : m.named_parameters())
    for (auto& x : v->data()) x = normal(rng);
  const std::vector<std::uint32_t> x{1, 4, 7};
  double want = (*m.bias())[0];
  std::vector<double> e;
  for (auto idx : x) {
    want += (*m.linear_weights())[idx];
    for (std::size_t k = 0; k < 4; ++k) e.push_back((*m.embedding_table())[idx * 4 + k]);
  }
  want += oracle::pairwise_brute(e, 3, 4);
  Graph<double> g(false);
  EXPECT_NEAR((*m.logits(g, x))[0], want, 1e-12);
  EXPECT_NEAR((*m.forward(g, x))[0], oracle::sigmoid(want), 1e-12);
}

TEST(Model, ProbabilityIncreasesWithBias) {
  auto m = Model<double>::init(small_shape(Variant::kFrnet), 10);
  std::mt19937_64 rng(11);
  const auto x = random_features(8, 4, 30, rng);
  std::vector<double> prev(8, -1.0);
  for (double b : {-3.0, -1.0, 0.0, 0.5, 2.0}) {
    (*m.bias())[0] = b;
    Graph<double> g(false);
    const auto p = m.forward(g, x)->values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_GT(p[i], prev[i]);
      EXPECT_GT(p[i], 0.0);
      EXPECT_LT(p[i], 1.0);
    }
    prev = p;
  }
}

TEST(Model, EmbeddingGradientCountsRepeats) {
  auto m = Model<double>::init(small_shape(Variant::kPlainFm, 3, 10, 2), 12);
  const std::vector<std::uint32_t> x{0, 3, 3, 3, 9, 0};
  Graph<double> g;
  g.backward(g.sum(m.embed(g, x)));
  const auto& grad = m.embedding_table()->grad();
  const double count[10] = {2, 0, 0, 3, 0, 0, 0, 0, 0, 1};
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(grad[r * 2 + k], count[r]) << "row " << r;
}

TEST(Model, OutOfRangeFeatureRejected) {
  auto m = Model<float>::init(small_shape(Variant::kPlainFm), 13);
  Graph<float> g(false);
  const std::vector<std::uint32_t> x{0, 1, 2, 30};
  EXPECT_THROW(m.forward(g, x), ContractError);
  const std::vector<std::uint32_t> ragged{0, 1, 2};
  EXPECT_THROW(m.forward(g, ragged), ContractError);
}

TEST(Model, DuplicateInstancesScoreIdentically) {
  auto m = Model<float>::init(small_shape(Variant::kFrnet), 14);
  std::mt19937_64 rng(15);
  std::normal_distribution<float> normal(0.0f, 0.3f);
  for (auto& [n, v] : m.named_parameters())
    for (auto& x : v->data()) x = normal(rng);
  auto x = random_features(3, 4, 30, rng);
  x.insert(x.end(), x.begin(), x.begin() + 4);
  Graph<float> g(false);
  const auto p = m.forward(g, x)->values();
  EXPECT_EQ(p[0], p[3]);
}

TEST(Model, PredictMatchesBatchedForwardAndChecksDataset) {
  auto m = Model<float>::init(small_shape(Variant::kFrnet), 16);
  std::mt19937_64 rng(17);
  data::Dataset ds;
  ds.num_fields = 4;
  ds.num_features = 30;
  ds.features = random_features(37, 4, 30, rng);
  ds.labels.assign(37, 0);
  const auto all = m.predict(ds, 37);
  EXPECT_EQ(m.predict(ds, 5), all);
  ds.num_features = 31;
  EXPECT_THROW(m.predict(ds), DataError);
}

TEST(Model, CloneIsDeepAndAssignCopiesValues) {
  auto m = Model<float>::init(small_shape(Variant::kFrnet), 18);
  auto c = m.clone();
  auto mp = m.named_parameters();
  auto cp = c.named_parameters();
  ASSERT_EQ(mp.size(), cp.size());
  for (std::size_t i = 0; i < mp.size(); ++i) {
    EXPECT_NE(mp[i].second.get(), cp[i].second.get()) << mp[i].first;
    EXPECT_EQ(mp[i].second->values(), cp[i].second->values());
  }
  (*m.bias())[0] = 7.0f;
  EXPECT_EQ((*c.bias())[0], 0.0f);
  c.assign_from(m);
  EXPECT_EQ((*c.bias())[0], 7.0f);
  auto other = Model<float>::init(small_shape(Variant::kPlainFm), 18);
  EXPECT_THROW(c.assign_from(other), ContractError);
}

TEST(Model, ParameterNamesFollowCheckpointOrder) {
  auto m = Model<float>::init(small_shape(Variant::kFrnet), 19);
  const auto p = m.named_parameters();
  ASSERT_GE(p.size(), 4u);
  EXPECT_EQ(p[0].first, "embed");
  EXPECT_EQ(p[1].first, "linear_w");
  EXPECT_EQ(p[2].first, "bias");
  EXPECT_EQ(p[3].first.rfind("ieu_w.", 0), 0u);
  EXPECT_EQ(p.back().first.rfind("ieu_g.", 0), 0u);
  EXPECT_EQ(Model<float>::init(small_shape(Variant::kPlainFm), 19).num_parameters(), 30u * 6 + 30 + 1);
}

TEST(Model, EndToEndGradientMatchesCentralDifference) {
  auto m = Model<double>::init(small_shape(Variant::kFrnet, 3, 8, 3), 20);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (auto& [n, v] : m.named_parameters())
    for (auto& x : v->data()) x = normal(rng);
  const std::vector<std::uint32_t> x{0, 3, 5, 1, 3, 7, 2, 4, 6};
  const std::vector<double> y{1, 0, 1};
  auto loss_value = [&] {
    Graph<double> g(false);
    return (*g.bce(m.forward(g, x), std::span<const double>(y)))[0];
  };
  {
    Graph<double> g;
    g.backward(g.bce(m.forward(g, x), std::span<const double>(y)));
  }
  for (auto& [name, v] : m.named_parameters()) {
    const auto grad = v->grad();
    std::vector<double> analytic(grad.begin(), grad.end());
    auto f = [&](const std::vector<double>& vals) {
      const auto saved = v->values();
      v->values() = vals;
      const double out = loss_value();
      v->values() = saved;
      return out;
    };
    for (std::size_t i = 0; i < v->size(); ++i) {
      const double numeric = oracle::central_diff(f, v->values(), i);
      EXPECT_LT(std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3}), 1e-6)
          << name << "[" << i << "]";
    }
  }
}

}  // namespace
}  // namespace frnet
