// SPDX-License-Identifier: Apache-2.0
#include "attnsent/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "attnsent/errors.hpp"
#include "attnsent/random.hpp"
#include "attnsent/vendor_json.hpp"

namespace attnsent {

std::string to_string(Label l) { return l == Label::positive ? "pos" : "neg"; }

Label parse_label(const std::string& s) {
  if (s == "pos") return Label::positive;
  if (s == "neg") return Label::negative;
  throw DataError("unknown label '" + s + "' (expected pos or neg)");
}

std::array<std::size_t, 2> class_counts(const Corpus& corpus) {
  std::array<std::size_t, 2> counts{0, 0};
  for (const auto& d : corpus)
    if (d.label) ++counts[class_index(*d.label)];
  return counts;
}

Corpus read_jsonl(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Document doc{j.at("text").get<std::string>(), std::nullopt};
      if (j.contains("label") && !j.at("label").is_null()) {
        doc.label = parse_label(j.at("label").get<std::string>());
      }
      corpus.push_back(std::move(doc));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

Corpus read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus '" + path.string() + "'");
  return read_jsonl(in);
}

void write_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus) {
    nlohmann::json j{{"text", d.text}};
    if (d.label) j["label"] = to_string(*d.label);
    out << j.dump() << '\n';
  }
}

void write_jsonl(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_jsonl(out, corpus);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Corpus synthetic_sentiment_corpus(const SyntheticOptions& o) {
  static const std::vector<std::string> positive{"tốt", "đẹp", "nhanh", "bền", "tuyệt_vời",
                                                 "hài_lòng", "mượt", "rẻ", "xịn", "ưng"};
  static const std::vector<std::string> negative{"tệ", "xấu", "chậm", "hỏng", "lag",
                                                 "đắt", "thất_vọng", "kém", "lỗi", "nóng"};
  static const std::vector<std::string> filler{
      "máy", "điện_thoại", "pin", "màn_hình", "camera", "giao_hàng", "shop", "sản_phẩm",
      "dùng", "mua", "này", "thì", "rất", "quá", "cũng", "được", "mình", "con", "hàng", "giá"};
  const std::string negator = "không";
  if (o.documents == 0) throw ConfigError("synthetic corpus needs at least one document");
  if (o.min_filler > o.max_filler) throw ConfigError("min_filler > max_filler");

  Rng rng(o.seed);
  Corpus corpus;
  corpus.reserve(o.documents);
  for (std::size_t i = 0; i < o.documents; ++i) {
    const Label label = i % 2 == 0 ? Label::positive : Label::negative;
    const bool negated = rng.bernoulli(o.negation_rate);
    // A negated word of the opposite polarity expresses `label`.
    const bool word_positive = (label == Label::positive) != negated;
    const auto& lexicon = word_positive ? positive : negative;
    const std::size_t n_fill = o.min_filler + rng.below(o.max_filler - o.min_filler + 1);
    std::vector<std::string> words;
    for (std::size_t k = 0; k < n_fill; ++k) words.push_back(filler[rng.below(filler.size())]);
    const std::size_t at = rng.below(words.size() + 1);
    std::vector<std::string> phrase;
    if (negated) phrase.push_back(negator);
    phrase.push_back(lexicon[rng.below(lexicon.size())]);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), phrase.begin(), phrase.end());

    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text.push_back(' ');
      text += w;
    }
    text += rng.bernoulli(0.5) ? "." : " !";
    corpus.push_back({std::move(text), label});
  }
  return corpus;
}

}  // namespace attnsent
