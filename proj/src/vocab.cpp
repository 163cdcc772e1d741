// SPDX-License-Identifier: Apache-2.0
#include "attnsent/vocab.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "attnsent/errors.hpp"
#include "attnsent/text.hpp"

namespace attnsent {

void SubwordConfig::validate() const {
  if (min_count == 0) throw ConfigError("min_count must be >= 1");
  if (buckets == 0 || buckets > (std::size_t{1} << 32)) {
    throw ConfigError("bucket count must be in [1, 2^32], got " + std::to_string(buckets));
  }
  if (min_n == 0 || min_n > max_n) {
    throw ConfigError("invalid n-gram range " + std::to_string(min_n) + ".." +
                      std::to_string(max_n));
  }
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::uint32_t> ngram_buckets(std::string_view token, const SubwordConfig& config) {
  std::vector<char32_t> cps{U'<'};
  const auto body = decode_utf8(token);
  cps.insert(cps.end(), body.begin(), body.end());
  cps.push_back(U'>');

  std::vector<std::uint32_t> ids;
  for (std::size_t start = 0; start < cps.size(); ++start) {
    for (std::size_t n = config.min_n; n <= config.max_n && start + n <= cps.size(); ++n) {
      const std::string gram = encode_utf8({cps.begin() + static_cast<std::ptrdiff_t>(start),
                                            cps.begin() + static_cast<std::ptrdiff_t>(start + n)});
      ids.push_back(static_cast<std::uint32_t>(fnv1a64(gram) % config.buckets));
    }
  }
  return ids;
}

Vocabulary::Vocabulary(SubwordConfig config, std::vector<std::string> words,
                       std::vector<std::uint64_t> counts)
    : config_(config), words_(std::move(words)), counts_(std::move(counts)) {
  config_.validate();
  if (words_.empty()) throw DataError("empty vocabulary");
  if (counts_.size() != words_.size()) throw DataError("vocabulary words/counts size mismatch");
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<std::int32_t>(i)).second) {
      throw DataError("duplicate vocabulary word '" + words_[i] + "'");
    }
  }
  seen_types = words_.size();
}

std::optional<std::int32_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& tokenized_docs,
                       const SubwordConfig& config) {
  config.validate();
  std::map<std::string, std::uint64_t> counts;
  for (const auto& doc : tokenized_docs)
    for (const auto& tok : doc) ++counts[tok];

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [word, count] : counts)
    if (count >= config.min_count) kept.emplace_back(word, count);
  if (kept.empty()) {
    throw DataError("empty vocabulary: no word occurs at least " +
                    std::to_string(config.min_count) + " times");
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> words;
  std::vector<std::uint64_t> word_counts;
  for (auto& [w, c] : kept) {
    words.push_back(std::move(w));
    word_counts.push_back(c);
  }
  Vocabulary vocab(config, std::move(words), std::move(word_counts));
  vocab.seen_types = counts.size();
  return vocab;
}

}  // namespace attnsent
