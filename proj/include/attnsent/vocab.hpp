// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace attnsent {

struct SubwordConfig {
  std::size_t min_count = 5;
  std::size_t buckets = std::size_t{1} << 20;
  std::size_t min_n = 3;
  std::size_t max_n = 6;

  void validate() const;
};

// 64-bit FNV-1a over the bytes of s.
std::uint64_t fnv1a64(std::string_view s);

/// Bucket ids of every character n-gram (min_n..max_n code points) of
/// "<token>", in order of start position then length. Repeated n-grams
/// are repeated.
std::vector<std::uint32_t> ngram_buckets(std::string_view token, const SubwordConfig& config);

/// Word list with dense ids, ordered by descending count then by word.
class Vocabulary {
 public:
  Vocabulary(SubwordConfig config, std::vector<std::string> words,
             std::vector<std::uint64_t> counts);

  const SubwordConfig& config() const { return config_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::optional<std::int32_t> find(std::string_view word) const;

  // Distinct words seen while building, including dropped rare ones.
  std::size_t seen_types = 0;

 private:
  SubwordConfig config_;
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Keeps words occurring at least config.min_count times. Throws DataError
/// when nothing survives.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& tokenized_docs,
                       const SubwordConfig& config);

}  // namespace attnsent
