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
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "frnet/training.hpp"

namespace frnet {
namespace {

// Field 0 carries the label; field 1 is noise.
data::Dataset separable(std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> noise(2, 11);
  data::Dataset ds;
  ds.num_fields = 2;
  ds.num_features = 12;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::uint8_t y = i % 2;
    ds.push_back({y, {y, noise(rng)}});
  }
  return ds;
}

data::PreparedData separable_split(std::uint64_t seed = 1) {
  data::PreparedData p;
  p.train = separable(200, seed);
  p.val = separable(60, seed + 1);
  p.test = separable(60, seed + 2);
  return p;
}

TrainConfig small_config(const std::string& variant = "fm") {
  TrainConfig cfg;
  cfg.variant = variant;
  cfg.embed_dim = 4;
  cfg.cie_hidden = {8};
  cfg.batch_size = 32;
  cfg.max_epochs = 20;
  cfg.seed = 7;
  return cfg;
}

TEST(Bce, HandValues) {
  Graph<double> g(false);
  const std::vector<double> one{1.0};
  EXPECT_NEAR((*g.bce(make_var<double>({1}, {0.5}), std::span<const double>(one)))[0], std::log(2.0), 1e-15);
  EXPECT_LT((*g.bce(make_var<double>({1}, {1.0 - 1e-9}), std::span<const double>(one)))[0], 2e-7);
  const std::vector<double> y{1.0, 0.0};
  EXPECT_NEAR((*g.bce(make_var<double>({2}, {0.8, 0.3}), std::span<const double>(y)))[0],
              (-std::log(0.8) - std::log(0.7)) / 2, 1e-15);
  EXPECT_NEAR((-std::log(0.8) - std::log(0.7)) / 2, 0.28990, 1e-5);
}

TEST(Bce, ClampsSaturatedProbabilities) {
  Graph<double> g(false);
  const std::vector<double> y{1.0, 0.0};
  const double loss = (*g.bce(make_var<double>({2}, {0.0, 1.0}), std::span<const double>(y)))[0];
  EXPECT_NEAR(loss, -std::log(1e-7), 1e-9);
  EXPECT_THROW(g.bce(make_var<double>({3}, 0.5), std::span<const double>(y)), ContractError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto w = make_param<double>({3}, 0.0);
  std::fill(w->grad().begin(), w->grad().end(), 1.0);
  Adam<double> opt({w}, 1e-3);
  opt.step();
  for (double v : w->data()) EXPECT_NEAR(v, -1e-3, 1e-10);
  EXPECT_FALSE(w->has_grad() && std::any_of(w->grad().begin(), w->grad().end(), [](double g) { return g != 0.0; }));
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, ZeroGradientLeavesParametersAlone) {
  auto w = make_param<double>({2}, 0.5);
  Adam<double> opt({w}, 1e-3);
  opt.step();
  EXPECT_EQ(w->values(), (std::vector<double>{0.5, 0.5}));
}

TEST(Adam, EqualGradientsMoveEqually) {
  auto a = make_param<double>({1}, 1.0);
  auto b = make_param<double>({1}, 1.0);
  Adam<double> opt({a, b}, 1e-2);
  for (int s = 0; s < 5; ++s) {
    a->grad()[0] = 0.3 * (s + 1);
    b->grad()[0] = 0.3 * (s + 1);
    opt.step();
  }
  EXPECT_EQ((*a)[0], (*b)[0]);
  EXPECT_LT((*a)[0], 1.0);
}

TEST(Adam, MatchesUpdateEquationsOverSeveralSteps) {
  auto w = make_param<double>({1}, 0.2);
  Adam<double> opt({w}, 0.01);
  double m = 0, v = 0, x = 0.2;
  const double grads[] = {0.5, -1.5, 2.0, 0.1};
  for (int t = 1; t <= 4; ++t) {
    w->grad()[0] = grads[t - 1];
    opt.step();
    m = 0.9 * m + 0.1 * grads[t - 1];
    v = 0.999 * v + 0.001 * grads[t - 1] * grads[t - 1];
    const double mhat = m / (1 - std::pow(0.9, t)), vhat = v / (1 - std::pow(0.999, t));
    x -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    EXPECT_NEAR((*w)[0], x, 1e-12) << "step " << t;
    EXPECT_NEAR(opt.first_moment(0)[0], m, 1e-15);
    EXPECT_NEAR(opt.second_moment(0)[0], v, 1e-15);
  }
}

TEST(Scheduler, RisingMetricKeepsLearningRate) {
  ReduceLrOnPlateau s(1e-3, 0.1, 4, true, 1e-5);
  for (double auc : {0.97, 0.975, 0.98, 0.981, 0.9811, 0.9812}) EXPECT_EQ(s.step(auc), 1e-3);
}

TEST(Scheduler, FiresOnFourthBadEpoch) {
  ReduceLrOnPlateau s(1e-3, 0.1, 4, true, 1e-5);
  const double aucs[] = {0.98, 0.979, 0.978, 0.9785, 0.979};
  std::vector<double> lrs;
  for (double a : aucs) lrs.push_back(s.step(a));
  EXPECT_EQ(lrs[3], 1e-3);
  EXPECT_NEAR(lrs[4], 1e-4, 1e-18);
}

TEST(Scheduler, ImprovementResetsCounter) {
  ReduceLrOnPlateau s(1e-3, 0.1, 4, true, 1e-5);
  for (double a : {0.90, 0.89, 0.89, 0.89, 0.91, 0.90, 0.90, 0.90}) EXPECT_EQ(s.step(a), 1e-3);
  // Gains below min_delta do not count as improvement.
  EXPECT_NEAR(s.step(0.910005), 1e-4, 1e-18);
}

TEST(Scheduler, LoglossModeMinimises) {
  ReduceLrOnPlateau s(1e-3, 0.1, 2, false, 1e-5);
  EXPECT_EQ(s.step(0.5), 1e-3);
  EXPECT_EQ(s.step(0.4), 1e-3);
  EXPECT_EQ(s.step(0.45), 1e-3);
  EXPECT_NEAR(s.step(0.41), 1e-4, 1e-18);
}

TEST(EarlyStop, StopsAfterPatienceBadEpochs) {
  EarlyStopping stop(5, true, 1e-5);
  EXPECT_FALSE(stop.step(0.9));
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(stop.step(0.89));
  EXPECT_TRUE(stop.step(0.9));
}

TEST(Train, ZeroEpochsReturnsInitialModel) {
  auto cfg = small_config("frnet");
  cfg.max_epochs = 0;
  const auto prepared = separable_split();
  const auto r = train<float>(prepared, cfg);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.best_epoch, 0u);
  const auto fresh = Model<float>::init(model_shape(cfg, prepared.train), RunStreams::from_seed(cfg.seed).init);
  const auto a = r.best.named_parameters();
  const auto b = fresh.named_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].second->values(), b[i].second->values()) << a[i].first;
}

TEST(Train, FitsSeparableData) {
  const auto prepared = separable_split();
  const auto r = train<float>(prepared, small_config());
  ASSERT_LE(r.log.size(), 20u);
  EXPECT_GT(evaluate(r.best, prepared.train).auc, 0.99);
}

TEST(Train, LossFallsOverFirstFiveSteps) {
  const auto ds = separable(200, 3);
  auto cfg = small_config();
  auto model = Model<double>::init(model_shape(cfg, ds), 11);
  std::vector<Var<double>> params;
  for (auto& [n, v] : model.named_parameters()) params.push_back(v);
  Adam<double> opt(params, 1e-3);
  std::vector<double> y(ds.labels.begin(), ds.labels.end());
  double prev = std::numeric_limits<double>::infinity();
  for (int s = 0; s < 6; ++s) {
    Graph<double> g;
    auto loss = g.bce(model.forward(g, ds.features), std::span<const double>(y));
    EXPECT_LT((*loss)[0], prev) << "step " << s;
    prev = (*loss)[0];
    g.backward(loss);
    opt.step();
  }
}

TEST(Train, SameSeedIsBitIdentical) {
  const auto prepared = separable_split();
  auto cfg = small_config("frnet");
  cfg.max_epochs = 4;
  const auto a = train<float>(prepared, cfg);
  const auto b = train<float>(prepared, cfg);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].train_loss, b.log[i].train_loss);
    EXPECT_EQ(a.log[i].val_auc, b.log[i].val_auc);
    EXPECT_EQ(a.log[i].val_logloss, b.log[i].val_logloss);
  }
  const auto pa = a.best.named_parameters();
  const auto pb = b.best.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].second->values(), pb[i].second->values());
  cfg.seed = 8;
  const auto c = train<float>(prepared, cfg);
  EXPECT_NE(c.log[0].train_loss, a.log[0].train_loss);
}

TEST(Train, BestModelCarriesTheBestValidationAuc) {
  const auto prepared = separable_split(5);
  auto cfg = small_config("frnet");
  cfg.max_epochs = 6;
  const auto r = train<float>(prepared, cfg);
  ASSERT_FALSE(r.log.empty());
  double best = 0.0;
  std::size_t best_epoch = 0;
  for (const auto& e : r.log) {
    if (e.val_auc > best) {
      best = e.val_auc;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(evaluate(r.best, prepared.val, cfg.batch_size).auc, best);
  const auto again = evaluate(r.best, prepared.test, cfg.batch_size);
  EXPECT_EQ(again.auc, r.test.auc);
  EXPECT_EQ(again.logloss, r.test.logloss);
}

TEST(Train, LogRowsAreReportedAsTheyLand) {
  const auto prepared = separable_split();
  auto cfg = small_config();
  cfg.max_epochs = 3;
  std::vector<std::size_t> seen;
  const auto r = train<float>(prepared, cfg, [&](const EpochLog& e) { seen.push_back(e.epoch); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
  for (const auto& e : r.log) {
    EXPECT_EQ(e.lr, 1e-3);
    EXPECT_EQ(e.seconds, 0.0);
  }
}

TEST(Train, RejectsInvalidConfigAndEmptyData) {
  auto cfg = small_config();
  cfg.dropout = 1.0;
  EXPECT_THROW(train<float>(separable_split(), cfg), UsageError);
  data::PreparedData empty = separable_split();
  empty.train = data::Dataset{2, 12, {}, {}};
  EXPECT_THROW(train<float>(empty, small_config()), DataError);
}

TEST(RunStreams, DistinctAndSeeded) {
  const auto a = RunStreams::from_seed(1), b = RunStreams::from_seed(1), c = RunStreams::from_seed(2);
  EXPECT_EQ(a.init, b.init);
  EXPECT_NE(a.init, a.shuffle);
  EXPECT_NE(a.shuffle, a.dropout);
  EXPECT_NE(a.init, c.init);
}

TEST(MetricsCsv, RowFormat) {
  std::ostringstream os;
  write_metrics_header(os);
  write_metrics_row(os, {3, 1e-4, 0.5, 0.75, 0.25, 1.5});
  EXPECT_EQ(os.str(), "epoch,lr,train_loss,val_auc,val_logloss,seconds\n3,0.0001,0.5,0.75,0.25,1.500\n");
}

}  // namespace
}  // namespace frnet
