// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "attnsent/attention.hpp"
#include "attnsent/embedding.hpp"
#include "attnsent/feature_gate.hpp"
#include "attnsent/focal.hpp"
#include "attnsent/kernels.hpp"
#include "attnsent/positional.hpp"
#include "attnsent/vocab.hpp"

namespace attnsent {

inline constexpr std::size_t kClasses = 2;  // 0 = negative, 1 = positive

struct ModelConfig {
  std::size_t d_emb = 384;
  std::size_t d_pe = 384;
  std::size_t heads = 12;
  Fusion fusion = Fusion::concat;
  std::size_t reduction = kDefaultReduction;
  std::size_t ffn_width = 0;  // 0 means 4 * d_model
  bool use_ffn = true;
  bool use_residual_norm = true;
  bool use_feature_gate = true;
  std::size_t max_len = 256;
  std::size_t n_classes = kClasses;
  SubwordConfig subword;

  std::size_t d_model() const { return fusion == Fusion::concat ? d_emb + d_pe : d_emb; }
  std::size_t resolved_ffn_width() const { return ffn_width ? ffn_width : 4 * d_model(); }

  // Throws ConfigError on any inconsistent setting.
  void validate() const;
};

struct LayerNormParams {
  Matrix gain;  // 1 x d, ones
  Matrix bias;  // 1 x d, zeros
};

struct FfnParams {
  Matrix w1;  // d_model x width
  Matrix b1;  // 1 x width
  Matrix w2;  // width x d_model
  Matrix b2;  // 1 x d_model
};

struct NamedMatrix {
  std::string name;
  Matrix* value;
};

struct ConstNamedMatrix {
  std::string name;
  const Matrix* value;
};

/// Dense trainable arrays (everything except the embedding table).
/// Optional members exist only when the matching config flag is on.
struct DenseParams {
  MultiHeadParams attention;
  std::optional<LayerNormParams> norm1;
  std::optional<FfnParams> ffn;
  std::optional<LayerNormParams> norm2;
  std::optional<SEParams> gate;
  Matrix classifier_w;  // d_model x 2
  Matrix classifier_b;  // 1 x 2

  // Stable names and order; used for serialization, optimizer state and
  // gradient checks.
  std::vector<NamedMatrix> named();
  std::vector<ConstNamedMatrix> named() const;

  // Same layout, all zeros.
  DenseParams zeros_like() const;
};

struct ModelParams {
  EmbeddingTable embedding;
  DenseParams dense;

  // Seeded uniform(+-1/sqrt(fan_in)) for projections, ones for norm gains,
  // zeros for biases and norm offsets.
  static ModelParams create(const ModelConfig& config, const Vocabulary& vocab,
                            std::uint64_t seed);
};

struct EncodedDoc {
  std::vector<TokenFeatures> tokens;
  bool truncated = false;
};

struct Model {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;
  PositionalTable positional;
  std::uint64_t seed = 0;

  static Model create(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed);

  // normalize + tokenize + featurize, truncated to config.max_len.
  EncodedDoc encode(std::string_view text) const;
  EncodedDoc encode_tokens(const std::vector<std::string>& tokens) const;
};

using Probabilities = std::array<double, kClasses>;

struct ForwardTrace {
  std::vector<TokenFeatures> tokens;
  Matrix embedded;  // n x d_emb
  Matrix fused;     // n x d_model
  MultiHeadTrace attention;
  Matrix attention_out;
  std::optional<LayerNormCache> norm1;
  Matrix block1;  // after attention sub-layer
  Matrix ffn_pre;  // block1 w1 + b1
  std::optional<LayerNormCache> norm2;
  Matrix block2;  // after FFN sub-layer
  std::optional<FeatureGateTrace> gate;
  Matrix gated;
  Matrix pooled;  // 1 x d_model
  Matrix logits;  // 1 x 2
  Probabilities probs{};
};

/// Probabilities over {negative, positive}. Throws DataError on an empty
/// document; documents longer than max_len use their first max_len tokens.
Probabilities forward(const Model& model, const EncodedDoc& doc);
ForwardTrace forward_trace(const Model& model, const EncodedDoc& doc);

// Embedding + positional fusion only: n x d_model.
Matrix fused_input(const Model& model, const EncodedDoc& doc);
// Everything after fusion, without keeping intermediates.
Probabilities forward_fused(const ModelConfig& config, const DenseParams& params, const Matrix& fused);

/// Dense gradients laid out like the parameters, plus sparse embedding
/// rows.
struct Gradients {
  DenseParams dense;
  EmbeddingGrads embedding;

  static Gradients zeros_like(const ModelParams& params);
  void accumulate(const Gradients& other);
  void scale(double s);
};

struct LossAndGrads {
  double loss;
  Probabilities probs;
  Gradients grads;
};

/// Focal loss of one labeled document and its gradient w.r.t. every
/// parameter. Untouched embedding rows are absent from grads.embedding.
LossAndGrads backward(const Model& model, const EncodedDoc& doc, std::size_t label,
                      const FocalParams& focal);

std::size_t predicted_class(const Probabilities& p);

}  // namespace attnsent
