// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "attnsent/matrix.hpp"
#include "attnsent/random.hpp"
#include "attnsent/vocab.hpp"

namespace attnsent {

// Word id (-1 when out of vocabulary) plus its n-gram bucket ids.
struct TokenFeatures {
  std::int32_t word = -1;
  std::vector<std::uint32_t> ngrams;

  std::size_t parts() const { return ngrams.size() + (word >= 0 ? 1 : 0); }
};

TokenFeatures featurize(std::string_view token, const Vocabulary& vocab);

/// Hashed n-gram vectors. Every bucket has a deterministic initial value
/// derived from (seed, bucket, column); only rows that have been written
/// are stored.
class NgramTable {
 public:
  NgramTable(std::size_t buckets, std::size_t dim, std::uint64_t seed, double init_limit);

  std::size_t buckets() const { return buckets_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  double init_limit() const { return init_limit_; }

  // Adds row(bucket) to out.
  void accumulate_row(std::uint32_t bucket, std::span<double> out) const;
  std::vector<double> row(std::uint32_t bucket) const;
  // Materializes the row on first write.
  std::span<double> mutable_row(std::uint32_t bucket);
  void set_row(std::uint32_t bucket, std::span<const double> values);

  // Written rows, sorted by bucket id.
  std::vector<std::uint32_t> stored_buckets() const;
  std::size_t stored_count() const { return rows_.size(); }

  double initial_value(std::uint32_t bucket, std::size_t col) const;

 private:
  std::size_t buckets_;
  std::size_t dim_;
  std::uint64_t seed_;
  double init_limit_;
  std::unordered_map<std::uint32_t, std::vector<double>> rows_;
};

struct EmbeddingTable {
  Matrix words;  // |V| x d_emb
  NgramTable ngrams;

  std::size_t dim() const { return words.cols(); }

  static EmbeddingTable random(const Vocabulary& vocab, std::size_t d_emb, std::uint64_t seed);
};

/// Mean of the word vector (when in vocabulary) and all n-gram vectors.
/// Total: any token yields a finite d_emb vector.
std::vector<double> embed_features(const TokenFeatures& token, const EmbeddingTable& table);
std::vector<double> embed_token(std::string_view token, const Vocabulary& vocab,
                                const EmbeddingTable& table);
// n x d_emb, one row per token.
Matrix embed_sequence(std::span<const TokenFeatures> tokens, const EmbeddingTable& table);

// Sparse gradient rows for the embedding table.
struct EmbeddingGrads {
  std::map<std::int32_t, std::vector<double>> words;
  std::map<std::uint32_t, std::vector<double>> ngrams;

  void accumulate(const EmbeddingGrads& other);
  void scale(double s);
};

// Routes d_embedded (n x d_emb) back to the rows each token averaged.
void embed_sequence_backward(std::span<const TokenFeatures> tokens, const Matrix& d_embedded,
                             EmbeddingGrads& grads);

}  // namespace attnsent
