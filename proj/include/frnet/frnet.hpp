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
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "frnet/error.hpp"
#include "frnet/graph.hpp"
#include "frnet/tensor.hpp"

namespace frnet {

/**
 * Ablation family. Each id fixes how the refined representation E_r is
 * assembled from the original embeddings E, the complementary features E_g
 * and the selection weights (bit-level W_b of shape f x d or vector-level
 * W_v of shape f x 1).
 */
enum class Variant : int {
  kPlainFm = 1,             // E_r = E
  kAttentionOnly = 2,       // E_r = O_vec
  kComplementOnly = 3,      // E_r = E_g
  kNoCie = 4,               // FRNet with O_bit fixed to ones in both units
  kResidualComplement = 5,  // E + E_g
  kVecSelect = 6,           // E * s(W_v)
  kBitSelect = 7,           // E * s(W_b)
  kVecSelectResidual = 8,   // E * s(W_v) + E
  kBitSelectResidual = 9,   // E * s(W_b) + E
  kVecSelectComplement = 10,  // E * s(W_v) + E_g
  kBitSelectComplement = 11,  // E * s(W_b) + E_g
  kFrnetVec = 12,           // E * s(W_v) + E_g * (1 - s(W_v))
  kFrnet = 13,              // E * s(W_b) + E_g * (1 - s(W_b))
};

inline constexpr int kNumVariants = 13;

/// Accepts 1..13 or the aliases fm, frnet, frnet-vec.
inline Variant parse_variant(const std::string& text) {
  if (text == "fm") return Variant::kPlainFm;
  if (text == "frnet") return Variant::kFrnet;
  if (text == "frnet-vec") return Variant::kFrnetVec;
  int id = 0;
  try {
    std::size_t used = 0;
    id = std::stoi(text, &used);
    if (used != text.size()) id = 0;
  } catch (const std::exception&) {
    id = 0;
  }
  if (id < 1 || id > kNumVariants) throw UsageError("unknown variant '" + text + "' (expected 1..13, fm, frnet, frnet-vec)");
  return static_cast<Variant>(id);
}

inline const char* variant_formula(Variant v) {
  switch (v) {
    case Variant::kPlainFm: return "E_r = E";
    case Variant::kAttentionOnly: return "E_r = O_vec";
    case Variant::kComplementOnly: return "E_r = E_g";
    case Variant::kNoCie: return "FRNet without CIE";
    case Variant::kResidualComplement: return "E_r = E + E_g";
    case Variant::kVecSelect: return "E_r = E*s(W_v)";
    case Variant::kBitSelect: return "E_r = E*s(W_b)";
    case Variant::kVecSelectResidual: return "E_r = E*s(W_v) + E";
    case Variant::kBitSelectResidual: return "E_r = E*s(W_b) + E";
    case Variant::kVecSelectComplement: return "E_r = E*s(W_v) + E_g";
    case Variant::kBitSelectComplement: return "E_r = E*s(W_b) + E_g";
    case Variant::kFrnetVec: return "FRNet-Vec";
    case Variant::kFrnet: return "FRNet";
  }
  return "?";
}

/// Which units a variant instantiates.
struct VariantLayout {
  bool weight_unit = false;      // IEU_W present
  bool weight_is_vector = false;  // IEU_W emits f x 1
  bool weight_cie = true;
  bool complement_unit = false;  // IEU_G present
  bool complement_cie = true;
};

inline VariantLayout variant_layout(Variant v) {
  VariantLayout l;
  switch (v) {
    case Variant::kPlainFm: break;
    case Variant::kAttentionOnly: l.complement_unit = true; l.complement_cie = false; break;
    case Variant::kComplementOnly:
    case Variant::kResidualComplement: l.complement_unit = true; break;
    case Variant::kNoCie:
      l.weight_unit = l.complement_unit = true;
      l.weight_cie = l.complement_cie = false;
      break;
    case Variant::kVecSelect:
    case Variant::kVecSelectResidual: l.weight_unit = l.weight_is_vector = true; break;
    case Variant::kBitSelect:
    case Variant::kBitSelectResidual: l.weight_unit = true; break;
    case Variant::kVecSelectComplement:
    case Variant::kFrnetVec: l.weight_unit = l.weight_is_vector = l.complement_unit = true; break;
    case Variant::kBitSelectComplement:
    case Variant::kFrnet: l.weight_unit = l.complement_unit = true; break;
  }
  return l;
}

/// Fully connected layer followed by PReLU: y = PReLU(x W^T + b).
template <typename T>
struct DenseLayer {
  Var<T> weight;  // out x in
  Var<T> bias;    // 1 x out
  Var<T> slope;   // [1]
};

/// Parameters of one Information Extraction Unit.
template <typename T>
struct IEUParams {
  Var<T> w_query, w_key, w_value;  // d x d_k
  Var<T> w_proj;                   // d_k x d
  std::vector<DenseLayer<T>> cie;  // empty when the context extractor is disabled
  bool vector_output = false;

  void collect(const std::string& prefix, std::vector<std::pair<std::string, Var<T>>>& out) const {
    out.emplace_back(prefix + ".W_Q", w_query);
    out.emplace_back(prefix + ".W_K", w_key);
    out.emplace_back(prefix + ".W_V", w_value);
    out.emplace_back(prefix + ".W_P", w_proj);
    for (std::size_t l = 0; l < cie.size(); ++l) {
      const std::string base = prefix + ".cie." + std::to_string(l);
      out.emplace_back(base + ".weight", cie[l].weight);
      out.emplace_back(base + ".bias", cie[l].bias);
      out.emplace_back(base + ".slope", cie[l].slope);
    }
  }
};

struct FRNetShape {
  std::size_t num_fields = 0;
  std::size_t embed_dim = 0;
  std::size_t attn_dim = 0;
  std::vector<std::size_t> cie_hidden{128};
};

inline constexpr double kInitStd = 0.01;
inline constexpr double kInitSlope = 0.25;

template <typename T, typename Rng>
std::vector<T> normal_values(std::size_t count, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> out(count);
  for (auto& v : out) v = static_cast<T>(dist(rng));
  return out;
}

template <typename T, typename Rng>
IEUParams<T> init_ieu(const FRNetShape& shape, bool with_cie, bool vector_output, Rng& rng) {
  if (shape.attn_dim == 0) throw ContractError("attention size d_k must be positive");
  if (shape.embed_dim == 0 || shape.num_fields == 0) throw ContractError("field count and embedding size must be positive");
  const std::size_t d = shape.embed_dim, dk = shape.attn_dim;
  IEUParams<T> p;
  p.vector_output = vector_output;
  p.w_query = make_param<T>({d, dk}, normal_values<T>(d * dk, kInitStd, rng));
  p.w_key = make_param<T>({d, dk}, normal_values<T>(d * dk, kInitStd, rng));
  p.w_value = make_param<T>({d, dk}, normal_values<T>(d * dk, kInitStd, rng));
  p.w_proj = make_param<T>({dk, d}, normal_values<T>(dk * d, kInitStd, rng));
  if (with_cie) {
    std::size_t in = shape.num_fields * d;
    std::vector<std::size_t> widths = shape.cie_hidden;
    widths.push_back(d);
    for (auto out : widths) {
      if (out == 0) throw ContractError("CIE layer widths must be positive");
      p.cie.push_back({make_param<T>({out, in}, normal_values<T>(out * in, kInitStd, rng)),
                       make_param<T>({1, out}, T(0)), make_param<T>({1}, T(kInitSlope))});
      in = out;
    }
  }
  return p;
}

/// Learnable state of the refinement module for one variant.
template <typename T>
struct FRNetParams {
  Variant variant = Variant::kFrnet;
  std::optional<IEUParams<T>> ieu_w;
  std::optional<IEUParams<T>> ieu_g;

  template <typename Rng>
  static FRNetParams init(Variant variant, const FRNetShape& shape, Rng& rng) {
    FRNetParams p;
    p.variant = variant;
    const auto layout = variant_layout(variant);
    if (layout.weight_unit) p.ieu_w = init_ieu<T>(shape, layout.weight_cie, layout.weight_is_vector, rng);
    if (layout.complement_unit) p.ieu_g = init_ieu<T>(shape, layout.complement_cie, false, rng);
    return p;
  }

  std::vector<std::pair<std::string, Var<T>>> named_parameters() const {
    std::vector<std::pair<std::string, Var<T>>> out;
    if (ieu_w) ieu_w->collect("ieu_w", out);
    if (ieu_g) ieu_g->collect("ieu_g", out);
    return out;
  }
};

/// Per-call switches: training mode enables CIE dropout.
template <typename T>
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
  // Replaces s(W) by a constant; used to probe gate limits.
  std::optional<T> gate_override;
};

/// O_vec = SoftMax(Q K^T) V W^P with Q, K, V = E W^Q, E W^K, E W^V; no scaling, no biases.
template <typename T>
Var<T> self_attention(Graph<T>& g, const Var<T>& e, const IEUParams<T>& p) {
  if (e->rank() != 3) throw ContractError("self_attention expects [B, f, d], got " + shape_str(e->shape()));
  auto q = g.matmul(e, p.w_query);
  auto k = g.matmul(e, p.w_key);
  auto v = g.matmul(e, p.w_value);
  auto attn = g.row_softmax(g.bmm(q, k, /*transpose_b=*/true));
  return g.matmul(g.bmm(attn, v), p.w_proj);
}

/// Context vector O_bit of shape [B, 1, d] from the flattened instance.
template <typename T>
Var<T> cie(Graph<T>& g, const Var<T>& e, const IEUParams<T>& p, const ForwardContext<T>& ctx) {
  if (p.cie.empty()) throw ContractError("CIE needs at least the final projection layer");
  if (e->rank() != 3) throw ContractError("cie expects [B, f, d], got " + shape_str(e->shape()));
  const std::size_t batch = e->dim(0);
  auto h = g.reshape(e, {batch, e->dim(1) * e->dim(2)});
  for (std::size_t l = 0; l < p.cie.size(); ++l) {
    const auto& layer = p.cie[l];
    if (layer.weight->dim(1) != h->dim(1)) {
      throw ContractError("CIE layer " + std::to_string(l) + " expects width " + std::to_string(layer.weight->dim(1)) +
                          ", got " + std::to_string(h->dim(1)));
    }
    h = g.prelu(g.add(g.matmul(h, layer.weight, /*transpose_b=*/true), layer.bias), layer.slope);
    const bool hidden = l + 1 < p.cie.size();
    if (hidden && ctx.training && ctx.dropout > 0.0) {
      if (!ctx.rng) throw ContractError("training-mode dropout needs an RNG");
      h = g.dropout(h, ctx.dropout, *ctx.rng);
    }
  }
  return g.reshape(h, {batch, 1, h->dim(1)});
}

/// Bit-level unit output O_vec * O_bit, shape [B, f, d]; O_bit is ones without CIE.
template <typename T>
Var<T> ieu_bit(Graph<T>& g, const Var<T>& e, const IEUParams<T>& p, const ForwardContext<T>& ctx) {
  auto o_vec = self_attention(g, e, p);
  if (p.cie.empty()) return o_vec;
  return g.mul(o_vec, cie(g, e, p, ctx));
}

/// Vector-level unit output W_v = O_vec O_bit^T, shape [B, f, 1].
template <typename T>
Var<T> ieu_vec(Graph<T>& g, const Var<T>& e, const IEUParams<T>& p, const ForwardContext<T>& ctx) {
  auto o_vec = self_attention(g, e, p);
  if (p.cie.empty()) return g.sum_last(g.reshape(o_vec, {e->dim(0), e->dim(1), 1, e->dim(2)}));
  return g.bmm(o_vec, cie(g, e, p, ctx), /*transpose_b=*/true);
}

template <typename T>
Var<T> ieu(Graph<T>& g, const Var<T>& e, const IEUParams<T>& p, const ForwardContext<T>& ctx) {
  return p.vector_output ? ieu_vec(g, e, p, ctx) : ieu_bit(g, e, p, ctx);
}

namespace detail {

// s(W) broadcast to the shape of e; W is [B, f, d] or [B, f, 1].
template <typename T>
Var<T> selection_gate(Graph<T>& g, const Var<T>& e, const Var<T>& w, const ForwardContext<T>& ctx) {
  const auto& es = e->shape();
  const auto& ws = w->shape();
  const bool column = ws.size() == es.size() && ws.back() == 1 && es.back() != 1 &&
                      std::equal(ws.begin(), ws.end() - 1, es.begin());
  if (ws != es && !column) {
    throw ContractError("gate weights " + shape_str(ws) + " do not broadcast to " + shape_str(es));
  }
  Var<T> gate = ctx.gate_override ? make_var<T>(ws, *ctx.gate_override) : g.sigmoid(w);
  return column ? g.expand_last(gate, es.back()) : gate;
}

}  // namespace detail

/// E_r = E * s(W) + E_g * (1 - s(W)), with W either f x d or f x 1 per instance.
template <typename T>
Var<T> csgate(Graph<T>& g, const Var<T>& e, const Var<T>& e_g, const Var<T>& w, const ForwardContext<T>& ctx = {}) {
  if (e->shape() != e_g->shape()) {
    throw ContractError("csgate: E " + shape_str(e->shape()) + " vs E_g " + shape_str(e_g->shape()));
  }
  auto gate = detail::selection_gate(g, e, w, ctx);
  return g.add(g.mul(e, gate), g.mul(e_g, g.affine(gate, T(-1), T(1))));
}

/**
 * Refined embeddings E_r for the configured variant; same shape as E.
 * Variant 1 returns E itself.
 */
template <typename T>
Var<T> frnet_forward(Graph<T>& g, const Var<T>& e, const FRNetParams<T>& p, const ForwardContext<T>& ctx = {}) {
  auto need = [](const auto& unit, const char* name) -> const IEUParams<T>& {
    if (!unit) throw ContractError(std::string("variant is missing its ") + name + " unit");
    return *unit;
  };
  auto selected = [&](const Var<T>& w) { return g.mul(e, detail::selection_gate(g, e, w, ctx)); };

  switch (p.variant) {
    case Variant::kPlainFm:
      return e;
    case Variant::kAttentionOnly:
      return self_attention(g, e, need(p.ieu_g, "IEU_G"));
    case Variant::kComplementOnly:
      return ieu(g, e, need(p.ieu_g, "IEU_G"), ctx);
    case Variant::kResidualComplement:
      return g.add(e, ieu(g, e, need(p.ieu_g, "IEU_G"), ctx));
    case Variant::kVecSelect:
    case Variant::kBitSelect:
      return selected(ieu(g, e, need(p.ieu_w, "IEU_W"), ctx));
    case Variant::kVecSelectResidual:
    case Variant::kBitSelectResidual:
      return g.add(selected(ieu(g, e, need(p.ieu_w, "IEU_W"), ctx)), e);
    case Variant::kVecSelectComplement:
    case Variant::kBitSelectComplement: {
      auto e_g = ieu(g, e, need(p.ieu_g, "IEU_G"), ctx);
      return g.add(selected(ieu(g, e, need(p.ieu_w, "IEU_W"), ctx)), e_g);
    }
    case Variant::kNoCie:
    case Variant::kFrnetVec:
    case Variant::kFrnet: {
      auto e_g = ieu(g, e, need(p.ieu_g, "IEU_G"), ctx);
      auto w = ieu(g, e, need(p.ieu_w, "IEU_W"), ctx);
      return csgate(g, e, e_g, w, ctx);
    }
  }
  throw ContractError("unknown variant id " + std::to_string(static_cast<int>(p.variant)));
}

/// Selection weights W (pre-sigmoid) of the weight unit, or nullopt if the variant has none.
template <typename T>
std::optional<Var<T>> selection_weights(Graph<T>& g, const Var<T>& e, const FRNetParams<T>& p,
                                        const ForwardContext<T>& ctx = {}) {
  if (!p.ieu_w) return std::nullopt;
  return ieu(g, e, *p.ieu_w, ctx);
}

}  // namespace frnet
