// SPDX-License-Identifier: Apache-2.0
#include "attnsent/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "attnsent/errors.hpp"

namespace attnsent {

TokenFeatures featurize(std::string_view token, const Vocabulary& vocab) {
  TokenFeatures f;
  if (auto id = vocab.find(token)) f.word = *id;
  f.ngrams = ngram_buckets(token, vocab.config());
  return f;
}

NgramTable::NgramTable(std::size_t buckets, std::size_t dim, std::uint64_t seed, double init_limit)
    : buckets_(buckets), dim_(dim), seed_(seed), init_limit_(init_limit) {
  if (buckets_ == 0 || dim_ == 0) throw ConfigError("n-gram table needs buckets >= 1 and dim >= 1");
}

double NgramTable::initial_value(std::uint32_t bucket, std::size_t col) const {
  const std::uint64_t h = splitmix64(splitmix64(seed_ ^ splitmix64(bucket)) + col);
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return init_limit_ * (2.0 * u - 1.0);
}

void NgramTable::accumulate_row(std::uint32_t bucket, std::span<double> out) const {
  if (auto it = rows_.find(bucket); it != rows_.end()) {
    for (std::size_t c = 0; c < dim_; ++c) out[c] += it->second[c];
  } else {
    for (std::size_t c = 0; c < dim_; ++c) out[c] += initial_value(bucket, c);
  }
}

std::vector<double> NgramTable::row(std::uint32_t bucket) const {
  std::vector<double> r(dim_, 0.0);
  accumulate_row(bucket, r);
  return r;
}

std::span<double> NgramTable::mutable_row(std::uint32_t bucket) {
  if (bucket >= buckets_) {
    throw ShapeError("n-gram bucket " + std::to_string(bucket) + " out of range " +
                     std::to_string(buckets_));
  }
  auto it = rows_.find(bucket);
  if (it == rows_.end()) it = rows_.emplace(bucket, row(bucket)).first;
  return it->second;
}

void NgramTable::set_row(std::uint32_t bucket, std::span<const double> values) {
  if (values.size() != dim_) throw ShapeError("n-gram row width mismatch");
  auto dst = mutable_row(bucket);
  std::copy(values.begin(), values.end(), dst.begin());
}

std::vector<std::uint32_t> NgramTable::stored_buckets() const {
  std::vector<std::uint32_t> ids;
  ids.reserve(rows_.size());
  for (const auto& [b, _] : rows_) ids.push_back(b);
  std::sort(ids.begin(), ids.end());
  return ids;
}

EmbeddingTable EmbeddingTable::random(const Vocabulary& vocab, std::size_t d_emb,
                                      std::uint64_t seed) {
  if (d_emb == 0) throw ConfigError("d_emb must be >= 1");
  const double limit = 1.0 / std::sqrt(static_cast<double>(d_emb));
  Rng rng(splitmix64(seed ^ 0x656d62ULL));
  return {random_uniform(vocab.size(), d_emb, limit, rng),
          NgramTable(vocab.config().buckets, d_emb, splitmix64(seed ^ 0x6e6772ULL), limit)};
}

std::vector<double> embed_features(const TokenFeatures& token, const EmbeddingTable& table) {
  std::vector<double> v(table.dim(), 0.0);
  const std::size_t parts = token.parts();
  if (parts == 0) return v;
  if (token.word >= 0) {
    auto w = table.words.row(static_cast<std::size_t>(token.word));
    for (std::size_t c = 0; c < v.size(); ++c) v[c] += w[c];
  }
  for (std::uint32_t b : token.ngrams) table.ngrams.accumulate_row(b, v);
  const double inv = 1.0 / static_cast<double>(parts);
  for (double& x : v) x *= inv;
  return v;
}

std::vector<double> embed_token(std::string_view token, const Vocabulary& vocab,
                                const EmbeddingTable& table) {
  return embed_features(featurize(token, vocab), table);
}

Matrix embed_sequence(std::span<const TokenFeatures> tokens, const EmbeddingTable& table) {
  if (tokens.empty()) throw DataError("cannot embed an empty token sequence");
  Matrix e(tokens.size(), table.dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto v = embed_features(tokens[i], table);
    std::copy(v.begin(), v.end(), e.row(i).begin());
  }
  return e;
}

void EmbeddingGrads::accumulate(const EmbeddingGrads& other) {
  auto merge = [](auto& dst, const auto& src) {
    for (const auto& [key, row] : src) {
      auto [it, inserted] = dst.try_emplace(key, row);
      if (!inserted)
        for (std::size_t c = 0; c < row.size(); ++c) it->second[c] += row[c];
    }
  };
  merge(words, other.words);
  merge(ngrams, other.ngrams);
}

void EmbeddingGrads::scale(double s) {
  for (auto& [_, row] : words)
    for (double& v : row) v *= s;
  for (auto& [_, row] : ngrams)
    for (double& v : row) v *= s;
}

void embed_sequence_backward(std::span<const TokenFeatures> tokens, const Matrix& d_embedded,
                             EmbeddingGrads& grads) {
  if (d_embedded.rows() != tokens.size()) {
    throw ShapeError("embedding backward: gradient " + d_embedded.shape() + " for " +
                     std::to_string(tokens.size()) + " tokens");
  }
  const std::size_t d = d_embedded.cols();
  auto add_to = [d](auto& map, auto key, std::span<const double> g, double w) {
    auto [it, _] = map.try_emplace(key, std::vector<double>(d, 0.0));
    for (std::size_t c = 0; c < d; ++c) it->second[c] += g[c] * w;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::size_t parts = tokens[i].parts();
    if (parts == 0) continue;
    const double w = 1.0 / static_cast<double>(parts);
    const auto g = d_embedded.row(i);
    if (tokens[i].word >= 0) add_to(grads.words, tokens[i].word, g, w);
    for (std::uint32_t b : tokens[i].ngrams) add_to(grads.ngrams, b, g, w);
  }
}

}  // namespace attnsent
