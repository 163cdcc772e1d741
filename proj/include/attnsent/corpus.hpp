// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace attnsent {

enum class Label : std::uint8_t { negative = 0, positive = 1 };

inline std::size_t class_index(Label l) { return static_cast<std::size_t>(l); }
std::string to_string(Label l);  // "neg" / "pos"
// Accepts "neg" and "pos"; throws DataError otherwise.
Label parse_label(const std::string& s);

struct Document {
  std::string text;
  std::optional<Label> label;

  friend bool operator==(const Document&, const Document&) = default;
};

using Corpus = std::vector<Document>;

// Documents per class {negative, positive}; unlabeled ones are skipped.
std::array<std::size_t, 2> class_counts(const Corpus& corpus);

/// One JSON object per line: {"text": string, "label": "pos"|"neg"}; label
/// optional. Blank lines are skipped. Throws DataError naming the line.
Corpus read_jsonl(std::istream& in);
Corpus read_jsonl(const std::filesystem::path& path);
void write_jsonl(std::ostream& out, const Corpus& corpus);
void write_jsonl(const std::filesystem::path& path, const Corpus& corpus);

struct SyntheticOptions {
  std::size_t documents = 2000;
  double negation_rate = 0.10;
  std::size_t min_filler = 4;
  std::size_t max_filler = 12;
  std::uint64_t seed = 1;
};

/// Keyword sentiment corpus with balanced labels. Every document carries
/// one sentiment word among neutral filler words; with probability
/// negation_rate the word is preceded by the negator "không" and the label
/// flips to match the negated meaning.
Corpus synthetic_sentiment_corpus(const SyntheticOptions& options);

}  // namespace attnsent
