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
#include <iterator>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "frnet/data.hpp"
#include "frnet/error.hpp"

namespace frnet::synthetic {

/**
 * App-usage logs shaped like the public Frappe benchmark: ten categorical
 * fields with the same cardinalities (5,382 features), 288,609 rows and one
 * positive per round((1 - positive_rate) / positive_rate) negatives.
 *
 * Every user has `installed` apps drawn by popularity. A usage event (the
 * positive) picks the best installed app under Gumbel noise, scored by
 *
 *   scale/sqrt(K) * sum_k p_uk q_ik g_k(ctx),   g(ctx) = 2 * sigmoid(sum_c A_c),
 *
 * where the context fields (daytime, weekday, homework, weather) re-weight the
 * latent dimensions. Negatives keep the log's user and context and swap in a
 * uniformly drawn app, or with probability `hard_negative_rate` another app
 * the user has installed. The context re-weighting is a three-way effect a
 * plain FM cannot express.
 */
struct Config {
  std::size_t rows = 288609;
  std::uint64_t seed = 20221;
  std::size_t latent = 8;
  double affinity_scale = 6.0;
  double context_strength = 2.0;
  std::size_t installed = 8;
  double hard_negative_rate = 0.3;
  double positive_rate = 1.0 / 3.0;
};

struct FieldSpec {
  const char* name;
  std::size_t cardinality;
};

inline constexpr FieldSpec kFields[] = {
    {"user", 957},  {"item", 4082}, {"daytime", 7}, {"weekday", 7}, {"isweekend", 2},
    {"homework", 3}, {"cost", 2},    {"weather", 9}, {"country", 80}, {"city", 233},
};
inline constexpr std::size_t kNumFields = std::size(kFields);

namespace detail {

// Zipf-like sampler over [0, n) with exponent s; ranks are shuffled so
// popularity is unrelated to the id.
class Popularity {
 public:
  template <typename Rng>
  Popularity(std::size_t n, double s, Rng& rng) : ids_(n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
    dist_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    std::iota(ids_.begin(), ids_.end(), std::size_t{0});
    std::shuffle(ids_.begin(), ids_.end(), rng);
  }

  template <typename Rng>
  std::size_t operator()(Rng& rng) {
    return ids_[dist_(rng)];
  }

 private:
  std::vector<std::size_t> ids_;
  std::discrete_distribution<std::size_t> dist_;
};

template <typename Rng>
std::vector<double> normals(std::size_t n, double stddev, Rng& rng) {
  std::normal_distribution<double> d(0.0, stddev);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace detail

inline data::RawTable generate(const Config& cfg) {
  if (cfg.rows < 3) throw UsageError("synthetic data needs at least 3 rows");
  if (!(cfg.positive_rate > 0.0 && cfg.positive_rate <= 0.5)) throw UsageError("positive_rate must lie in (0, 0.5]");
  if (cfg.latent == 0) throw UsageError("latent size must be positive");
  if (cfg.installed < 2) throw UsageError("installed must be at least 2");
  if (cfg.installed > kFields[1].cardinality) throw UsageError("installed exceeds the number of apps");
  if (!(cfg.hard_negative_rate >= 0.0 && cfg.hard_negative_rate <= 1.0)) throw UsageError("hard_negative_rate must lie in [0, 1]");
  std::mt19937_64 rng(cfg.seed);
  const std::size_t K = cfg.latent;
  const auto card = [](std::size_t f) { return kFields[f].cardinality; };
  enum { kUser, kItem, kDaytime, kWeekday, kWeekend, kHomework, kCost, kWeather, kCountry, kCity };

  // World: factors, context gates, home locations, item prices.
  const auto user_f = detail::normals(card(kUser) * K, 1.0, rng);
  const auto item_f = detail::normals(card(kItem) * K, 1.0, rng);
  const std::size_t ctx_fields[] = {kDaytime, kWeekday, kHomework, kWeather};
  std::vector<std::vector<double>> ctx_gate;
  for (auto f : ctx_fields) ctx_gate.push_back(detail::normals(card(f) * K, cfg.context_strength, rng));
  std::vector<std::size_t> city_country(card(kCity));
  for (auto& c : city_country) c = std::uniform_int_distribution<std::size_t>(0, card(kCountry) - 1)(rng);
  detail::Popularity user_pop(card(kUser), 0.8, rng);
  detail::Popularity item_pop(card(kItem), 0.9, rng);
  detail::Popularity city_pop(card(kCity), 1.0, rng);
  std::vector<std::size_t> home_city(card(kUser));
  for (auto& c : home_city) c = city_pop(rng);
  std::vector<std::size_t> item_cost(card(kItem));
  std::bernoulli_distribution paid(0.2);
  for (auto& c : item_cost) c = paid(rng) ? 1 : 0;
  std::discrete_distribution<std::size_t> homework_dist{0.5, 0.3, 0.2};
  std::discrete_distribution<std::size_t> weather_dist{0.3, 0.2, 0.15, 0.1, 0.08, 0.07, 0.05, 0.03, 0.02};
  std::bernoulli_distribution travelling(0.1);
  std::vector<std::size_t> pools(card(kUser) * cfg.installed);
  for (std::size_t u = 0; u < card(kUser); ++u) {
    std::size_t* pool = pools.data() + u * cfg.installed;
    for (std::size_t j = 0; j < cfg.installed; ++j) {
      std::size_t item = item_pop(rng);
      while (std::find(pool, pool + j, item) != pool + j) item = item_pop(rng);
      pool[j] = item;
    }
  }
  std::uniform_int_distribution<std::size_t> any_item(0, card(kItem) - 1);
  std::uniform_int_distribution<std::size_t> any_installed(0, cfg.installed - 1);
  std::bernoulli_distribution hard(cfg.hard_negative_rate);
  std::extreme_value_distribution<double> gumbel(0.0, 1.0);

  const auto negatives = static_cast<std::size_t>(std::llround((1.0 - cfg.positive_rate) / cfg.positive_rate));
  const double scale = cfg.affinity_scale / std::sqrt(static_cast<double>(K));

  std::vector<std::size_t> values(cfg.rows * kNumFields);
  std::vector<std::uint8_t> labels(cfg.rows, 0);
  std::vector<double> gate(K);
  std::size_t r = 0;
  while (r < cfg.rows) {
    // One usage event and its negatives.
    std::size_t ctx[kNumFields] = {};
    ctx[kUser] = user_pop(rng);
    ctx[kDaytime] = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
    ctx[kWeekday] = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
    ctx[kWeekend] = ctx[kWeekday] >= 5 ? 1 : 0;
    ctx[kHomework] = homework_dist(rng);
    ctx[kWeather] = weather_dist(rng);
    ctx[kCity] = travelling(rng) ? city_pop(rng) : home_city[ctx[kUser]];
    ctx[kCountry] = city_country[ctx[kCity]];

    std::fill(gate.begin(), gate.end(), 0.0);
    for (std::size_t c = 0; c < std::size(ctx_fields); ++c) {
      const std::size_t v = ctx[ctx_fields[c]];
      for (std::size_t k = 0; k < K; ++k) gate[k] += ctx_gate[c][v * K + k];
    }
    for (auto& g : gate) g = 2.0 / (1.0 + std::exp(-g));
    const double* pu = user_f.data() + ctx[kUser] * K;
    const std::size_t* pool = pools.data() + ctx[kUser] * cfg.installed;
    std::size_t chosen = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cfg.installed; ++c) {
      const std::size_t item = pool[c];
      const double* qi = item_f.data() + item * K;
      double a = 0.0;
      for (std::size_t k = 0; k < K; ++k) a += pu[k] * qi[k] * gate[k];
      const double v = scale * a + gumbel(rng);
      if (v > best) {
        best = v;
        chosen = item;
      }
    }

    for (std::size_t j = 0; j <= negatives && r < cfg.rows; ++j, ++r) {
      std::size_t* x = values.data() + r * kNumFields;
      std::copy(std::begin(ctx), std::end(ctx), x);
      if (j == 0) {
        x[kItem] = chosen;
        labels[r] = 1;
      } else {
        auto draw = [&] { return hard(rng) ? pool[any_installed(rng)] : any_item(rng); };
        std::size_t item = draw();
        while (item == chosen) item = draw();
        x[kItem] = item;
      }
      x[kCost] = item_cost[x[kItem]];
    }
  }

  // Interleave events so row order carries no label pattern.
  std::vector<std::size_t> order(cfg.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  data::RawTable table;
  table.source = "synthetic";
  for (const auto& f : kFields) table.fields.emplace_back(f.name);
  table.labels.resize(cfg.rows);
  table.cells.reserve(cfg.rows * kNumFields);
  for (std::size_t i = 0; i < cfg.rows; ++i) {
    const std::size_t src = order[i];
    table.labels[i] = labels[src];
    for (std::size_t f = 0; f < kNumFields; ++f) {
      table.cells.push_back(std::string(kFields[f].name).substr(0, 2) + std::to_string(values[src * kNumFields + f]));
    }
  }
  return table;
}

/// Header-bearing CSV, `label` first.
inline void write_csv(std::ostream& os, const data::RawTable& table, char delimiter = ',') {
  os << "label";
  for (const auto& f : table.fields) os << delimiter << f;
  os << '\n';
  for (std::size_t r = 0; r < table.num_records(); ++r) {
    os << int(table.labels[r]);
    for (std::size_t f = 0; f < table.num_fields(); ++f) os << delimiter << table.cell(r, f);
    os << '\n';
  }
}

}  // namespace frnet::synthetic
