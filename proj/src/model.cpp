// SPDX-License-Identifier: Apache-2.0
#include "attnsent/model.hpp"

#include <algorithm>

#include "attnsent/errors.hpp"
#include "attnsent/text.hpp"

namespace attnsent {

namespace {

LayerNormParams unit_norm(std::size_t d) { return {Matrix(1, d, 1.0), Matrix(1, d, 0.0)}; }

template <typename Fn>
void zip_named(DenseParams& a, const DenseParams& b, Fn fn) {
  auto lhs = a.named();
  auto rhs = b.named();
  if (lhs.size() != rhs.size()) throw ShapeError("parameter layouts differ");
  for (std::size_t i = 0; i < lhs.size(); ++i) fn(*lhs[i].value, *rhs[i].value);
}

}  // namespace

void ModelConfig::validate() const {
  if (d_emb == 0) throw ConfigError("d_emb must be >= 1");
  PEConfig{d_pe, max_len, fusion}.validate(d_emb);
  const std::size_t d = d_model();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError(std::to_string(heads) + " heads do not divide d_model " + std::to_string(d));
  }
  if (use_feature_gate && (reduction == 0 || d % reduction != 0)) {
    throw ConfigError("reduction ratio " + std::to_string(reduction) +
                      " does not divide d_model " + std::to_string(d));
  }
  if (n_classes != kClasses) {
    throw ConfigError("only 2 classes are supported, got " + std::to_string(n_classes));
  }
  subword.validate();
}

std::vector<NamedMatrix> DenseParams::named() {
  std::vector<NamedMatrix> out;
  for (std::size_t i = 0; i < attention.heads.size(); ++i) {
    const std::string prefix = "attention.head" + std::to_string(i) + ".";
    out.push_back({prefix + "wq", &attention.heads[i].wq});
    out.push_back({prefix + "wk", &attention.heads[i].wk});
    out.push_back({prefix + "wv", &attention.heads[i].wv});
  }
  out.push_back({"attention.wo", &attention.wo});
  if (norm1) {
    out.push_back({"norm1.gain", &norm1->gain});
    out.push_back({"norm1.bias", &norm1->bias});
  }
  if (ffn) {
    out.push_back({"ffn.w1", &ffn->w1});
    out.push_back({"ffn.b1", &ffn->b1});
    out.push_back({"ffn.w2", &ffn->w2});
    out.push_back({"ffn.b2", &ffn->b2});
  }
  if (norm2) {
    out.push_back({"norm2.gain", &norm2->gain});
    out.push_back({"norm2.bias", &norm2->bias});
  }
  if (gate) {
    out.push_back({"gate.fc1", &gate->fc1});
    out.push_back({"gate.fc2", &gate->fc2});
  }
  out.push_back({"classifier.w", &classifier_w});
  out.push_back({"classifier.b", &classifier_b});
  return out;
}

std::vector<ConstNamedMatrix> DenseParams::named() const {
  std::vector<ConstNamedMatrix> out;
  for (auto& nm : const_cast<DenseParams*>(this)->named()) out.push_back({nm.name, nm.value});
  return out;
}

DenseParams DenseParams::zeros_like() const {
  DenseParams z = *this;
  for (auto& nm : z.named())
    for (double& v : nm.value->values()) v = 0.0;
  return z;
}

ModelParams ModelParams::create(const ModelConfig& config, const Vocabulary& vocab,
                                std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.d_model();
  Rng rng(splitmix64(seed));
  EmbeddingTable embedding = EmbeddingTable::random(vocab, config.d_emb, seed);
  MultiHeadParams attention = MultiHeadParams::random(d, config.heads, rng);
  DenseParams dense{std::move(attention), std::nullopt, std::nullopt, std::nullopt, std::nullopt,
                    Matrix(1, 1), Matrix(1, kClasses)};
  if (config.use_residual_norm) dense.norm1 = unit_norm(d);
  if (config.use_ffn) {
    const std::size_t w = config.resolved_ffn_width();
    Matrix w1 = scaled_uniform(d, w, rng);
    Matrix w2 = scaled_uniform(w, d, rng);
    dense.ffn = FfnParams{std::move(w1), Matrix(1, w), std::move(w2), Matrix(1, d)};
    if (config.use_residual_norm) dense.norm2 = unit_norm(d);
  }
  if (config.use_feature_gate) dense.gate = SEParams::random(d, config.reduction, rng);
  dense.classifier_w = scaled_uniform(d, kClasses, rng);
  return {std::move(embedding), std::move(dense)};
}

Model Model::create(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed) {
  config.validate();
  if (vocab.config().buckets != config.subword.buckets ||
      vocab.config().min_n != config.subword.min_n ||
      vocab.config().max_n != config.subword.max_n) {
    throw ConfigError("vocabulary subword settings differ from model config");
  }
  ModelParams params = ModelParams::create(config, vocab, seed);
  PositionalTable positional(config.max_len, config.d_pe);
  return {config, std::move(vocab), std::move(params), std::move(positional), seed};
}

EncodedDoc Model::encode(std::string_view text) const { return encode_tokens(tokenize(normalize(text))); }

EncodedDoc Model::encode_tokens(const std::vector<std::string>& tokens) const {
  EncodedDoc doc;
  const std::size_t n = std::min(tokens.size(), config.max_len);
  doc.truncated = tokens.size() > n;
  doc.tokens.reserve(n);
  for (std::size_t i = 0; i < n; ++i) doc.tokens.push_back(featurize(tokens[i], vocab));
  return doc;
}

ForwardTrace forward_trace(const Model& model, const EncodedDoc& doc) {
  if (doc.tokens.empty()) throw DataError("empty token sequence");
  const ModelConfig& cfg = model.config;
  const DenseParams& p = model.params.dense;
  const std::size_t n = std::min(doc.tokens.size(), cfg.max_len);
  std::vector<TokenFeatures> tokens(doc.tokens.begin(),
                                    doc.tokens.begin() + static_cast<std::ptrdiff_t>(n));

  Matrix embedded = embed_sequence(tokens, model.params.embedding);
  const Matrix pe = model.positional.rows(n);
  Matrix fused = cfg.fusion == Fusion::concat ? fuse_concat(embedded, pe) : fuse_add(embedded, pe);

  MultiHeadResult mh = multi_head_forward(fused, p.attention);
  std::optional<LayerNormCache> norm1;
  Matrix block1 = mh.output;
  if (p.norm1) {
    LayerNormResult ln = layer_norm(add(fused, mh.output), p.norm1->gain, p.norm1->bias);
    block1 = std::move(ln.output);
    norm1 = std::move(ln.cache);
  }

  Matrix ffn_pre(1, 1);
  std::optional<LayerNormCache> norm2;
  Matrix block2 = block1;
  if (p.ffn) {
    ffn_pre = add_row(matmul(block1, p.ffn->w1), p.ffn->b1);
    Matrix ffn_out = add_row(matmul(relu(ffn_pre), p.ffn->w2), p.ffn->b2);
    if (p.norm2) {
      LayerNormResult ln = layer_norm(add(block1, ffn_out), p.norm2->gain, p.norm2->bias);
      block2 = std::move(ln.output);
      norm2 = std::move(ln.cache);
    } else {
      block2 = std::move(ffn_out);
    }
  }

  std::optional<FeatureGateTrace> gate;
  Matrix gated = block2;
  if (p.gate) {
    FeatureGateResult g = squeeze_excite_forward(block2, *p.gate);
    gated = std::move(g.output);
    gate = std::move(g.trace);
  }

  Matrix pooled = global_average_pool(gated);
  Matrix logits = add_row(matmul(pooled, p.classifier_w), p.classifier_b);
  const Matrix probs = softmax_rows(logits);
  Probabilities out{probs(0, 0), probs(0, 1)};

  return {std::move(tokens), std::move(embedded), std::move(fused),   std::move(mh.trace),
          std::move(mh.output), std::move(norm1), std::move(block1), std::move(ffn_pre),
          std::move(norm2),  std::move(block2), std::move(gate),    std::move(gated),
          std::move(pooled), std::move(logits), out};
}

Matrix fused_input(const Model& model, const EncodedDoc& doc) {
  if (doc.tokens.empty()) throw DataError("empty token sequence");
  const std::size_t n = std::min(doc.tokens.size(), model.config.max_len);
  const Matrix embedded = embed_sequence(std::span(doc.tokens).first(n), model.params.embedding);
  const Matrix pe = model.positional.rows(n);
  return model.config.fusion == Fusion::concat ? fuse_concat(embedded, pe) : fuse_add(embedded, pe);
}

Probabilities forward_fused(const ModelConfig& cfg, const DenseParams& p, const Matrix& fused) {
  if (fused.cols() != cfg.d_model()) {
    throw ShapeError("fused input " + fused.shape() + " does not match d_model " +
                     std::to_string(cfg.d_model()));
  }
  Matrix x = multi_head(fused, p.attention);
  if (p.norm1) x = layer_norm(add(fused, x), p.norm1->gain, p.norm1->bias).output;
  if (p.ffn) {
    Matrix ffn_out = add_row(matmul(relu(add_row(matmul(x, p.ffn->w1), p.ffn->b1)), p.ffn->w2), p.ffn->b2);
    x = p.norm2 ? layer_norm(add(x, ffn_out), p.norm2->gain, p.norm2->bias).output : std::move(ffn_out);
  }
  if (p.gate) x = squeeze_excite(x, *p.gate);
  const Matrix logits = add_row(matmul(global_average_pool(x), p.classifier_w), p.classifier_b);
  const Matrix probs = softmax_rows(logits);
  return {probs(0, 0), probs(0, 1)};
}

Probabilities forward(const Model& model, const EncodedDoc& doc) {
  return forward_fused(model.config, model.params.dense, fused_input(model, doc));
}

Gradients Gradients::zeros_like(const ModelParams& params) {
  return {params.dense.zeros_like(), {}};
}

void Gradients::accumulate(const Gradients& other) {
  zip_named(dense, other.dense, [](Matrix& a, const Matrix& b) { add_inplace(a, b); });
  embedding.accumulate(other.embedding);
}

void Gradients::scale(double s) {
  for (auto& nm : dense.named())
    for (double& v : nm.value->values()) v *= s;
  embedding.scale(s);
}

LossAndGrads backward(const Model& model, const EncodedDoc& doc, std::size_t label,
                      const FocalParams& focal) {
  const ForwardTrace t = forward_trace(model, doc);
  const DenseParams& p = model.params.dense;
  const std::size_t n = t.tokens.size();
  const double loss = focal_loss(t.probs, label, focal);
  const auto dlogit = focal_loss_logit_grad(t.probs, label, focal);

  Gradients g = Gradients::zeros_like(model.params);
  DenseParams& d = g.dense;

  const Matrix dlogits{{dlogit[0], dlogit[1]}};
  d.classifier_w = matmul_tn(t.pooled, dlogits);
  d.classifier_b = dlogits;
  const Matrix dgated = global_average_pool_backward(matmul_nt(dlogits, p.classifier_w), n);

  Matrix dblock2 = dgated;
  if (p.gate) {
    FeatureGateGrads gg = squeeze_excite_backward(*t.gate, *p.gate, dgated);
    d.gate->fc1 = std::move(gg.dfc1);
    d.gate->fc2 = std::move(gg.dfc2);
    dblock2 = std::move(gg.dx);
  }

  Matrix dblock1 = dblock2;
  if (p.ffn) {
    Matrix dffn_out = dblock2;
    if (p.norm2) {
      LayerNormGrads lg = layer_norm_backward(*t.norm2, p.norm2->gain, dblock2);
      d.norm2->gain = std::move(lg.dgain);
      d.norm2->bias = std::move(lg.dbias);
      dffn_out = lg.dx;
      dblock1 = std::move(lg.dx);
    } else {
      dblock1 = Matrix(n, model.config.d_model());
    }
    const Matrix act = relu(t.ffn_pre);
    d.ffn->w2 = matmul_tn(act, dffn_out);
    d.ffn->b2 = column_sums(dffn_out);
    const Matrix dpre = relu_backward(t.ffn_pre, matmul_nt(dffn_out, p.ffn->w2));
    d.ffn->w1 = matmul_tn(t.block1, dpre);
    d.ffn->b1 = column_sums(dpre);
    add_inplace(dblock1, matmul_nt(dpre, p.ffn->w1));
  }

  Matrix dattn = dblock1;
  Matrix dfused(n, model.config.d_model());
  if (p.norm1) {
    LayerNormGrads lg = layer_norm_backward(*t.norm1, p.norm1->gain, dblock1);
    d.norm1->gain = std::move(lg.dgain);
    d.norm1->bias = std::move(lg.dbias);
    dattn = lg.dx;
    dfused = std::move(lg.dx);
  }
  MultiHeadGrads mg = multi_head_backward(t.attention, p.attention, dattn);
  d.attention = std::move(mg.dparams);
  add_inplace(dfused, mg.dx);

  const Matrix dembedded = model.config.fusion == Fusion::concat
                               ? slice_cols(dfused, 0, model.config.d_emb)
                               : dfused;
  embed_sequence_backward(t.tokens, dembedded, g.embedding);
  return {loss, t.probs, std::move(g)};
}

std::size_t predicted_class(const Probabilities& p) { return p[1] > p[0] ? 1 : 0; }

}  // namespace attnsent
