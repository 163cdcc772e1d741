// SPDX-License-Identifier: Apache-2.0
#include "attnsent/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "attnsent/errors.hpp"

namespace attnsent {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double central_difference(const std::function<double()>& loss, double& x, double eps) {
  const double saved = x;
  x = saved + eps;
  const double up = loss();
  x = saved - eps;
  const double down = loss();
  x = saved;
  return (up - down) / (2.0 * eps);
}

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.d_emb = 8;
  c.d_pe = 8;
  c.heads = 4;
  c.max_len = 16;
  c.subword.min_count = 1;
  c.subword.buckets = 64;
  return c;
}

namespace {

const std::vector<std::string> kWords{"máy", "tốt", "không", "đẹp", "pin", "kém", "giao", "nhanh"};

void record(GroupCheck& g, double analytic, double numeric) {
  g.max_entry_rel_error = std::max(g.max_entry_rel_error, relative_error(analytic, numeric));
  g.max_abs_error = std::max(g.max_abs_error, std::abs(analytic - numeric));
  g.scale = std::max({g.scale, std::abs(analytic), std::abs(numeric)});
  ++g.entries;
}

void finish(GroupCheck& g, double tolerance) {
  g.max_rel_error = g.max_abs_error / std::max(g.scale, 1e-8);
  g.passed = g.max_rel_error < tolerance;
}

void require_finite_grad(std::span<const double> g, const std::string& name) {
  for (double v : g) {
    if (!std::isfinite(v)) throw NumericError("non-finite analytic gradient in " + name);
  }
}

}  // namespace

GradCheckReport grad_check(const ModelConfig& config, const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0) || !std::isfinite(options.epsilon)) {
    throw ConfigError("grad-check epsilon must be > 0");
  }
  if (!(options.tolerance > 0.0)) throw ConfigError("grad-check tolerance must be > 0");
  config.validate();
  if (config.d_model() > 16) {
    throw ConfigError("grad-check needs d_model <= 16, got " + std::to_string(config.d_model()));
  }
  if (options.seq_len == 0 || options.seq_len > 4) {
    throw ConfigError("grad-check needs 1 <= seq_len <= 4");
  }
  if (options.label > 1) throw ConfigError("label must be 0 or 1");

  // The last token stays out of the vocabulary so the n-gram-only path is
  // covered too.
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i + 1 < options.seq_len; ++i) tokens.push_back(kWords[i % kWords.size()]);
  tokens.push_back("đt" + std::to_string(options.seq_len));
  std::vector<std::vector<std::string>> vocab_docs{std::vector<std::string>(kWords.begin(), kWords.end())};
  Model model = Model::create(config, build_vocab(vocab_docs, config.subword), options.seed);
  const EncodedDoc doc = model.encode_tokens(tokens);

  const LossAndGrads analytic = backward(model, doc, options.label, options.focal);
  auto loss = [&] { return focal_loss(forward(model, doc), options.label, options.focal); };

  GradCheckReport report;
  report.epsilon = options.epsilon;
  report.tolerance = options.tolerance;

  const auto grads = analytic.grads.dense.named();
  auto params = model.params.dense.named();
  for (std::size_t gi = 0; gi < params.size(); ++gi) {
    const Matrix& g = *grads[gi].value;
    require_finite_grad(g.values(), params[gi].name);
    GroupCheck group{params[gi].name};
    auto values = params[gi].value->values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      record(group, g.values()[k], central_difference(loss, values[k], options.epsilon));
    }
    report.groups.push_back(group);
  }

  GroupCheck words{"embedding.words"};
  for (const auto& [id, g] : analytic.grads.embedding.words) {
    require_finite_grad(g, "embedding.words");
    auto row = model.params.embedding.words.row(static_cast<std::size_t>(id));
    for (std::size_t c = 0; c < g.size(); ++c) {
      record(words, g[c], central_difference(loss, row[c], options.epsilon));
    }
  }
  report.groups.push_back(words);

  GroupCheck ngrams{"embedding.ngrams"};
  for (const auto& [bucket, g] : analytic.grads.embedding.ngrams) {
    require_finite_grad(g, "embedding.ngrams");
    auto row = model.params.embedding.ngrams.mutable_row(bucket);
    for (std::size_t c = 0; c < g.size(); ++c) {
      record(ngrams, g[c], central_difference(loss, row[c], options.epsilon));
    }
  }
  report.groups.push_back(ngrams);

  for (auto& g : report.groups) {
    finish(g, report.tolerance);
    report.max_rel_error = std::max(report.max_rel_error, g.max_rel_error);
    report.passed = report.passed && g.passed;
  }
  return report;
}

nlohmann::json to_json(const GradCheckReport& r) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"name", g.name},
                      {"entries", g.entries},
                      {"max_rel_error", g.max_rel_error},
                      {"max_abs_error", g.max_abs_error},
                      {"max_entry_rel_error", g.max_entry_rel_error},
                      {"passed", g.passed}});
  }
  return {{"epsilon", r.epsilon},
          {"tolerance", r.tolerance},
          {"max_rel_error", r.max_rel_error},
          {"passed", r.passed},
          {"groups", groups}};
}

}  // namespace attnsent
