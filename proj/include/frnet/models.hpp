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

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "frnet/data.hpp"
#include "frnet/error.hpp"
#include "frnet/frnet.hpp"
#include "frnet/graph.hpp"
#include "frnet/tensor.hpp"

namespace frnet {

struct ModelShape {
  std::size_t num_fields = 0;
  std::size_t num_features = 0;
  std::size_t embed_dim = 20;
  std::size_t attn_dim = 20;
  std::vector<std::size_t> cie_hidden{128};
  Variant variant = Variant::kFrnet;

  FRNetShape frnet_shape() const { return {num_fields, embed_dim, attn_dim, cie_hidden}; }
};

/**
 * FM over refined embeddings:
 *   logit = bias + sum_i w[x_i] + sum_{i<j} <r_i, r_j>
 * where r = E_r rows. The first-order part reads the raw feature indices.
 */
template <typename T>
class Model {
 public:
  Model() = default;

  /// Embeddings are drawn first, then the refinement units, so every variant
  /// shares the same FM initialization for a given seed.
  static Model init(const ModelShape& shape, std::uint64_t seed) {
    if (shape.num_fields == 0 || shape.num_features == 0 || shape.embed_dim == 0) {
      throw ContractError("model needs positive field count, feature count and embedding size");
    }
    Model m;
    m.shape_ = shape;
    std::mt19937_64 rng(seed);
    m.embed_ = make_param<T>({shape.num_features, shape.embed_dim},
                             normal_values<T>(shape.num_features * shape.embed_dim, kInitStd, rng));
    m.linear_w_ = make_param<T>({shape.num_features, 1}, T(0));
    m.bias_ = make_param<T>({1}, T(0));
    m.frnet_.variant = shape.variant;
    if (shape.variant != Variant::kPlainFm) m.frnet_ = FRNetParams<T>::init(shape.variant, shape.frnet_shape(), rng);
    return m;
  }

  const ModelShape& shape() const noexcept { return shape_; }
  Variant variant() const noexcept { return shape_.variant; }
  const FRNetParams<T>& frnet() const noexcept { return frnet_; }
  FRNetParams<T>& frnet() noexcept { return frnet_; }
  const Var<T>& embedding_table() const noexcept { return embed_; }
  const Var<T>& linear_weights() const noexcept { return linear_w_; }
  const Var<T>& bias() const noexcept { return bias_; }

  /// Checkpoint order: embed, linear_w, bias, then ieu_w.*, ieu_g.*.
  std::vector<std::pair<std::string, Var<T>>> named_parameters() const {
    std::vector<std::pair<std::string, Var<T>>> out{{"embed", embed_}, {"linear_w", linear_w_}, {"bias", bias_}};
    for (auto& p : frnet_.named_parameters()) out.push_back(std::move(p));
    return out;
  }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& [name, v] : named_parameters()) n += v->size();
    return n;
  }

  /// Deep copy; the clone shares no tensors with this model.
  Model clone() const {
    Model m = *this;
    m.embed_ = copy(embed_);
    m.linear_w_ = copy(linear_w_);
    m.bias_ = copy(bias_);
    auto copy_ieu = [](std::optional<IEUParams<T>>& u) {
      if (!u) return;
      u->w_query = copy(u->w_query);
      u->w_key = copy(u->w_key);
      u->w_value = copy(u->w_value);
      u->w_proj = copy(u->w_proj);
      for (auto& layer : u->cie) {
        layer.weight = copy(layer.weight);
        layer.bias = copy(layer.bias);
        layer.slope = copy(layer.slope);
      }
    };
    copy_ieu(m.frnet_.ieu_w);
    copy_ieu(m.frnet_.ieu_g);
    return m;
  }

  /// Overwrite parameter values from `other`, which must have the same layout.
  void assign_from(const Model& other) {
    auto dst = named_parameters();
    auto src = other.named_parameters();
    if (dst.size() != src.size()) throw ContractError("assign_from: parameter layouts differ");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (dst[i].first != src[i].first || dst[i].second->shape() != src[i].second->shape()) {
        throw ContractError("assign_from: mismatch at " + dst[i].first);
      }
      std::copy(src[i].second->data().begin(), src[i].second->data().end(), dst[i].second->data().begin());
    }
  }

  /// E of shape [B, f, d] for B = features.size() / f instances.
  Var<T> embed(Graph<T>& g, std::span<const std::uint32_t> features) const {
    return g.gather_rows(embed_, features, batch_prefix(features));
  }

  /// Logits [B] = bias + first-order + pairwise(E_r).
  Var<T> fm_score(Graph<T>& g, const Var<T>& refined, std::span<const std::uint32_t> features) const {
    auto prefix = batch_prefix(features);
    if (refined->rank() != 3 || refined->dim(0) != prefix[0] || refined->dim(1) != prefix[1]) {
      throw ContractError("fm_score: refined embeddings " + shape_str(refined->shape()) +
                          " do not match batch " + shape_str(prefix));
    }
    auto linear = g.sum_last(g.sum_last(g.gather_rows(linear_w_, features, prefix)));
    return g.add_scalar(g.add(linear, g.fm_pairwise(refined)), bias_);
  }

  Var<T> logits(Graph<T>& g, std::span<const std::uint32_t> features, const ForwardContext<T>& ctx = {}) const {
    auto e = embed(g, features);
    return fm_score(g, frnet_forward(g, e, frnet_, ctx), features);
  }

  /// Click probabilities [B].
  Var<T> forward(Graph<T>& g, std::span<const std::uint32_t> features, const ForwardContext<T>& ctx = {}) const {
    return g.sigmoid(logits(g, features, ctx));
  }

  /// Eval-mode probabilities for every instance of `ds`, in order.
  std::vector<T> predict(const data::Dataset& ds, std::size_t batch_size = 4096) const {
    check_dataset(ds);
    std::vector<T> out;
    out.reserve(ds.size());
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
      const std::size_t count = std::min(batch_size, ds.size() - start);
      Graph<T> g(/*record=*/false);
      std::span<const std::uint32_t> feats(ds.features.data() + start * shape_.num_fields, count * shape_.num_fields);
      auto p = forward(g, feats);
      out.insert(out.end(), p->data().begin(), p->data().end());
    }
    return out;
  }

  void check_dataset(const data::Dataset& ds) const {
    if (ds.num_fields != shape_.num_fields || ds.num_features != shape_.num_features) {
      throw DataError("dataset has " + std::to_string(ds.num_fields) + " fields / " + std::to_string(ds.num_features) +
                      " features, model expects " + std::to_string(shape_.num_fields) + " / " +
                      std::to_string(shape_.num_features));
    }
  }

 private:
  static Var<T> copy(const Var<T>& v) {
    auto c = std::make_shared<Tensor<T>>(v->shape(), v->values());
    c->set_requires_grad(v->requires_grad());
    return c;
  }

  Shape batch_prefix(std::span<const std::uint32_t> features) const {
    const std::size_t f = shape_.num_fields;
    if (features.empty() || features.size() % f != 0) {
      throw ContractError("feature buffer of length " + std::to_string(features.size()) +
                          " is not a whole number of " + std::to_string(f) + "-field instances");
    }
    return {features.size() / f, f};
  }

  ModelShape shape_;
  Var<T> embed_;
  Var<T> linear_w_;
  Var<T> bias_;
  FRNetParams<T> frnet_;
};

}  // namespace frnet
