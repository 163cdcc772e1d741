// SPDX-License-Identifier: Apache-2.0
#include "attnsent/optimizer.hpp"

#include <cmath>

#include "attnsent/errors.hpp"

namespace attnsent {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
}

void SgdOptimizer::step(ModelParams& params, const Gradients& grads) {
  auto w = params.dense.named();
  const auto g = grads.dense.named();
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto wv = w[i].value->values();
    auto gv = g[i].value->values();
    for (std::size_t k = 0; k < wv.size(); ++k) wv[k] -= lr_ * gv[k];
  }
  for (const auto& [id, row] : grads.embedding.words) {
    auto wr = params.embedding.words.row(static_cast<std::size_t>(id));
    for (std::size_t c = 0; c < row.size(); ++c) wr[c] -= lr_ * row[c];
  }
  for (const auto& [bucket, row] : grads.embedding.ngrams) {
    auto wr = params.embedding.ngrams.mutable_row(bucket);
    for (std::size_t c = 0; c < row.size(); ++c) wr[c] -= lr_ * row[c];
  }
}

AdamOptimizer::AdamOptimizer(const ModelParams& params, const OptimizerConfig& config)
    : config_(config), m_(params.dense.zeros_like()), v_(params.dense.zeros_like()) {
  config_.validate();
}

void AdamOptimizer::update(std::span<double> w, std::span<const double> g, std::span<double> m,
                           std::span<double> v) const {
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double lr = config_.learning_rate;
  for (std::size_t k = 0; k < w.size(); ++k) {
    m[k] = b1 * m[k] + (1.0 - b1) * g[k];
    v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
    const double mhat = m[k] / correction1_;
    const double vhat = v[k] / correction2_;
    w[k] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
  }
}

void AdamOptimizer::step(ModelParams& params, const Gradients& grads) {
  ++t_;
  correction1_ = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  correction2_ = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));

  auto w = params.dense.named();
  const auto g = grads.dense.named();
  auto m = m_.named();
  auto v = v_.named();
  for (std::size_t i = 0; i < w.size(); ++i) {
    update(w[i].value->values(), g[i].value->values(), m[i].value->values(),
           v[i].value->values());
  }

  const std::size_t d = params.embedding.dim();
  auto moments = [d](auto& map, auto key) -> Moments& {
    auto [it, inserted] = map.try_emplace(key);
    if (inserted) it->second = {std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    return it->second;
  };
  for (const auto& [id, row] : grads.embedding.words) {
    Moments& mo = moments(words_, id);
    update(params.embedding.words.row(static_cast<std::size_t>(id)), row, mo.m, mo.v);
  }
  for (const auto& [bucket, row] : grads.embedding.ngrams) {
    Moments& mo = moments(ngrams_, bucket);
    update(params.embedding.ngrams.mutable_row(bucket), row, mo.m, mo.v);
  }
}

std::unique_ptr<Optimizer> make_optimizer(const ModelParams& params, const OptimizerConfig& config) {
  config.validate();
  if (config.kind == OptimizerKind::sgd) return std::make_unique<SgdOptimizer>(config.learning_rate);
  return std::make_unique<AdamOptimizer>(params, config);
}

}  // namespace attnsent
