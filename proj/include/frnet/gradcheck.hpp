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
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "frnet/frnet.hpp"
#include "frnet/graph.hpp"
#include "frnet/models.hpp"
#include "frnet/tensor.hpp"

namespace frnet::gradcheck {

/// Builds a scalar loss from the (captured) parameters on the given graph.
using LossFn = std::function<Var<double>(Graph<double>&)>;

struct Result {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t entries = 0;
  double worst_analytic = 0.0;  // the entry behind max_rel_err
  double worst_numeric = 0.0;
};

/// |a - n| / max(|a|, |n|, floor); entries below the floor are compared in absolute terms.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

/// Smallest distance of any PReLU input from the kink during one forward pass of `loss`.
inline double kink_margin(const LossFn& loss) {
  Graph<double> g(false);
  loss(g);
  return g.kink_margin();
}

/// Inputs closer than this to a PReLU kink are redrawn before checking.
inline constexpr double kMinKinkMargin = 1e-2;

/**
 * Compare reverse-mode gradients of `loss` against the five-point central difference
 * (8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h for every entry of every parameter.
 */
inline Result check(const std::string& name, const std::vector<Var<double>>& params, const LossFn& loss, double h = 1e-4) {
  for (const auto& p : params) p->drop_grad();
  {
    Graph<double> g;
    g.backward(loss(g));
  }
  auto eval_at = [&](Tensor<double>& p, std::size_t i, double x) {
    p[i] = x;
    Graph<double> g(false);
    return (*loss(g))[0];
  };
  Result r{name, 0.0, 0, 0.0, 0.0};
  for (const auto& p : params) {
    const std::vector<double> analytic = p->has_grad() ? std::vector<double>(p->grad().begin(), p->grad().end())
                                                       : std::vector<double>(p->size(), 0.0);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = (*p)[i];
      const double d1 = eval_at(*p, i, saved + h) - eval_at(*p, i, saved - h);
      const double d2 = eval_at(*p, i, saved + 2 * h) - eval_at(*p, i, saved - 2 * h);
      (*p)[i] = saved;
      const double numeric = (8.0 * d1 - d2) / (12.0 * h);
      const double err = relative_error(analytic[i], numeric);
      if (err > r.max_rel_err) {
        r.max_rel_err = err;
        r.worst_analytic = analytic[i];
        r.worst_numeric = numeric;
      }
      ++r.entries;
    }
    p->drop_grad();
  }
  return r;
}

namespace detail {

inline Var<double> normal_param(Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    x = dist(rng);
    // keep clear of the PReLU kink so central differences stay one-sided-free
    if (std::abs(x) < kMinKinkMargin) x = x < 0 ? -kMinKinkMargin : kMinKinkMargin;
  }
  return make_param<double>(std::move(shape), std::move(v));
}

// sum(out * weights) with fixed random weights, so every output entry gets a distinct adjoint.
inline Var<double> weighted_sum(Graph<double>& g, const Var<double>& out, const Var<double>& weights) {
  return g.sum(g.mul(out, weights));
}

inline Var<double> weights_like(const Var<double>& v, std::mt19937_64& rng) {
  auto w = normal_param(v->shape(), rng);
  w->set_requires_grad(false);
  return w;
}

}  // namespace detail

/// One named finite-difference case, built fresh for each seed.
using Case = std::function<Result(std::uint64_t seed)>;

inline std::vector<std::pair<std::string, Case>> op_cases() {
  using detail::normal_param;
  using detail::weighted_sum;
  using detail::weights_like;
  std::vector<std::pair<std::string, Case>> cases;

  auto unary_case = [&cases](std::string name, Shape in_shape, Shape out_shape,
                             std::function<Var<double>(Graph<double>&, const Var<double>&)> op) {
    cases.emplace_back(name, [=](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      auto a = normal_param(in_shape, rng);
      auto w = normal_param(out_shape, rng);
      w->set_requires_grad(false);
      return check(name, {a}, [&](Graph<double>& g) { return weighted_sum(g, op(g, a), w); });
    });
  };
  auto binary_case = [&cases](std::string name, Shape a_shape, Shape b_shape, Shape out_shape,
                              std::function<Var<double>(Graph<double>&, const Var<double>&, const Var<double>&)> op) {
    cases.emplace_back(name, [=](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      auto a = normal_param(a_shape, rng);
      auto b = normal_param(b_shape, rng);
      auto w = normal_param(out_shape, rng);
      w->set_requires_grad(false);
      return check(name, {a, b}, [&](Graph<double>& g) { return weighted_sum(g, op(g, a, b), w); });
    });
  };

  binary_case("matmul", {3, 4}, {4, 2}, {3, 2}, [](auto& g, auto& a, auto& b) { return g.matmul(a, b); });
  binary_case("matmul_transposed", {2, 3, 4}, {5, 4}, {2, 3, 5},
              [](auto& g, auto& a, auto& b) { return g.matmul(a, b, true); });
  binary_case("bmm", {2, 3, 4}, {2, 4, 2}, {2, 3, 2}, [](auto& g, auto& a, auto& b) { return g.bmm(a, b); });
  binary_case("bmm_transposed", {2, 3, 4}, {2, 5, 4}, {2, 3, 5},
              [](auto& g, auto& a, auto& b) { return g.bmm(a, b, true); });
  unary_case("row_softmax", {3, 5}, {3, 5}, [](auto& g, auto& a) { return g.row_softmax(a); });
  unary_case("sigmoid", {4, 3}, {4, 3}, [](auto& g, auto& a) { return g.sigmoid(a); });
  binary_case("prelu", {4, 3}, {1}, {4, 3}, [](auto& g, auto& a, auto& s) { return g.prelu(a, s); });
  binary_case("mul", {3, 4}, {3, 4}, {3, 4}, [](auto& g, auto& a, auto& b) { return g.mul(a, b); });
  binary_case("mul_row_broadcast", {2, 3, 4}, {2, 1, 4}, {2, 3, 4}, [](auto& g, auto& a, auto& b) { return g.mul(a, b); });
  binary_case("add_row_broadcast", {5, 3}, {1, 3}, {5, 3}, [](auto& g, auto& a, auto& b) { return g.add(a, b); });
  binary_case("sub", {3, 4}, {3, 4}, {3, 4}, [](auto& g, auto& a, auto& b) { return g.sub(a, b); });
  unary_case("affine", {3, 4}, {3, 4}, [](auto& g, auto& a) { return g.affine(a, -1.5, 1.0); });
  binary_case("add_scalar", {6}, {1}, {6}, [](auto& g, auto& a, auto& s) { return g.add_scalar(a, s); });
  unary_case("expand_last", {2, 3, 1}, {2, 3, 4}, [](auto& g, auto& a) { return g.expand_last(a, 4); });
  unary_case("reshape", {2, 6}, {3, 4}, [](auto& g, auto& a) { return g.reshape(a, {3, 4}); });
  binary_case("concat_rows", {2, 3}, {1, 3}, {3, 3}, [](auto& g, auto& a, auto& b) { return g.concat_rows(a, b); });
  unary_case("sum_last", {2, 3, 4}, {2, 3}, [](auto& g, auto& a) { return g.sum_last(a); });
  unary_case("fm_pairwise", {3, 4, 5}, {3}, [](auto& g, auto& a) { return g.fm_pairwise(a); });
  unary_case("dropout", {4, 6}, {4, 6}, [](auto& g, auto& a) {
    std::mt19937_64 mask_rng(7);
    return g.dropout(a, 0.5, mask_rng);
  });

  cases.emplace_back("gather_rows", [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto table = normal_param({5, 3}, rng);
    const std::vector<std::uint32_t> idx{0, 2, 2, 4, 1, 2};
    auto w = normal_param({2, 3, 3}, rng);
    w->set_requires_grad(false);
    return check("gather_rows", {table}, [&](Graph<double>& g) { return weighted_sum(g, g.gather_rows(table, idx, {2, 3}), w); });
  });
  cases.emplace_back("bce", [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto z = normal_param({6}, rng);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> y(6);
    for (auto& v : y) v = coin(rng) ? 1.0 : 0.0;
    return check("bce", {z}, [&](Graph<double>& g) { return g.bce(g.sigmoid(z), y); });
  });
  return cases;
}

namespace detail {

inline FRNetShape small_shape() { return {3, 4, 3, {5}}; }

inline std::vector<Var<double>> unit_params(const IEUParams<double>& p) {
  std::vector<std::pair<std::string, Var<double>>> named;
  p.collect("u", named);
  std::vector<Var<double>> out;
  for (auto& [n, v] : named) out.push_back(v);
  return out;
}

// Re-draw every parameter so gradients are far from the tiny-init regime.
inline void redraw(const std::vector<Var<double>>& params, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (const auto& p : params) {
    for (auto& x : p->data()) {
      x = dist(rng);
      if (std::abs(x) < kMinKinkMargin) x = x < 0 ? -kMinKinkMargin : kMinKinkMargin;
    }
  }
}

// Call `draw` until no PReLU input of `loss` sits within kMinKinkMargin of the kink.
inline void draw_smooth(const std::function<void()>& draw, const LossFn& loss) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    draw();
    if (kink_margin(loss) >= kMinKinkMargin) return;
  }
  throw NumericError("gradcheck: could not draw inputs away from the PReLU kink");
}

}  // namespace detail

/// IEU, CSGate and every refinement variant, gradients w.r.t. inputs and parameters.
inline std::vector<std::pair<std::string, Case>> frnet_cases() {
  std::vector<std::pair<std::string, Case>> cases;
  auto unit_case = [&cases](std::string name, bool vector_output, bool with_cie,
                            std::function<Var<double>(Graph<double>&, const Var<double>&, const IEUParams<double>&)> op) {
    cases.emplace_back(name, [=](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      auto unit = init_ieu<double>(detail::small_shape(), with_cie, vector_output, rng);
      auto params = detail::unit_params(unit);
      auto e = detail::normal_param({2, 3, 4}, rng);
      LossFn forward = [&](Graph<double>& g) { return op(g, e, unit); };
      detail::draw_smooth([&] {
        detail::redraw(params, rng, 0.7);
        detail::redraw({e}, rng);
      }, forward);
      params.push_back(e);
      Graph<double> probe(false);
      auto w = detail::weights_like(op(probe, e, unit), rng);
      return check(name, params, [&](Graph<double>& g) { return detail::weighted_sum(g, op(g, e, unit), w); });
    });
  };
  unit_case("self_attention", false, false, [](auto& g, auto& e, auto& u) { return self_attention(g, e, u); });
  unit_case("cie", false, true, [](auto& g, auto& e, auto& u) { return cie(g, e, u, ForwardContext<double>{}); });
  unit_case("ieu_bit", false, true, [](auto& g, auto& e, auto& u) { return ieu_bit(g, e, u, ForwardContext<double>{}); });
  unit_case("ieu_vec", true, true, [](auto& g, auto& e, auto& u) { return ieu_vec(g, e, u, ForwardContext<double>{}); });

  for (bool column : {false, true}) {
    const std::string name = column ? "csgate_vector" : "csgate_bit";
    cases.emplace_back(name, [=](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      auto e = detail::normal_param({2, 3, 4}, rng);
      auto e_g = detail::normal_param({2, 3, 4}, rng);
      auto w = detail::normal_param(column ? Shape{2, 3, 1} : Shape{2, 3, 4}, rng);
      auto r = detail::normal_param({2, 3, 4}, rng);
      r->set_requires_grad(false);
      return check(name, {e, e_g, w}, [&](Graph<double>& g) { return detail::weighted_sum(g, csgate(g, e, e_g, w), r); });
    });
  }

  for (int id = 2; id <= kNumVariants; ++id) {
    const std::string name = std::string("frnet_forward#") + std::to_string(id);
    cases.emplace_back(name, [=](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      auto p = FRNetParams<double>::init(static_cast<Variant>(id), detail::small_shape(), rng);
      std::vector<Var<double>> params;
      for (auto& [n, v] : p.named_parameters()) params.push_back(v);
      auto e = detail::normal_param({2, 3, 4}, rng);
      detail::draw_smooth([&] {
        detail::redraw(params, rng, 0.7);
        detail::redraw({e}, rng);
      }, [&](Graph<double>& g) { return frnet_forward(g, e, p); });
      params.push_back(e);
      auto r = detail::normal_param({2, 3, 4}, rng);
      r->set_requires_grad(false);
      return check(name, params, [&](Graph<double>& g) { return detail::weighted_sum(g, frnet_forward(g, e, p), r); });
    });
  }
  return cases;
}

/// Cross-entropy of the full FM + refinement model on a 4-instance batch.
inline Case end_to_end_case(Variant variant) {
  return [variant](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ModelShape shape;
    shape.num_fields = 3;
    shape.num_features = 7;
    shape.embed_dim = 4;
    shape.attn_dim = 3;
    shape.cie_hidden = {5};
    shape.variant = variant;
    auto model = Model<double>::init(shape, seed);
    std::vector<Var<double>> params;
    for (auto& [n, v] : model.named_parameters()) params.push_back(v);
    const std::vector<std::uint32_t> feats{0, 3, 5, 1, 3, 6, 2, 4, 5, 0, 4, 6};
    detail::draw_smooth([&] { detail::redraw(params, rng, 0.5); },
                        [&](Graph<double>& g) { return model.forward(g, feats); });
    const std::vector<double> labels{1, 0, 0, 1};
    return check("end_to_end", params, [&](Graph<double>& g) { return g.bce(model.forward(g, feats), labels); });
  };
}

struct SuiteReport {
  std::vector<Result> worst;  // worst result per case over all seeds
  double max_rel_err = 0.0;
};

/// Run every case over `seeds` seeds; `threshold` is reported against by callers.
inline SuiteReport run_suite(std::size_t seeds = 50) {
  auto cases = op_cases();
  for (auto& c : frnet_cases()) cases.push_back(std::move(c));
  cases.emplace_back("end_to_end_fm_frnet", end_to_end_case(Variant::kFrnet));
  cases.emplace_back("end_to_end_fm_frnet_vec", end_to_end_case(Variant::kFrnetVec));
  SuiteReport report;
  for (const auto& [name, fn] : cases) {
    Result worst{name, 0.0, 0};
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto r = fn(1000 + s);
      worst.max_rel_err = std::max(worst.max_rel_err, r.max_rel_err);
      worst.entries += r.entries;
    }
    report.max_rel_err = std::max(report.max_rel_err, worst.max_rel_err);
    report.worst.push_back(worst);
  }
  return report;
}

}  // namespace frnet::gradcheck
