// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "attnsent/corpus.hpp"
#include "attnsent/embedding.hpp"
#include "attnsent/errors.hpp"
#include "attnsent/text.hpp"
#include "attnsent/vocab.hpp"
#include "oracles.hpp"

using namespace attnsent;

namespace {

// Plain FNV-1a, 64-bit.
std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> code_points(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    const std::size_t len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace

TEST_CASE("normalize replaces links, addresses and phone numbers") {
  CHECK(normalize("xem tại http://tiki.vn nhé") == "xem tại urlObj nhé");
  CHECK(normalize("liên hệ ai@bc.vn") == "liên hệ mailObj");
  CHECK(normalize("gọi 0903123456") == "gọi phonenumObj");
  CHECK(normalize("gọi +84 903 123 456 nhé") == "gọi phonenumObj nhé");
  CHECK(normalize("gọi 0903.123.456") == "gọi phonenumObj");
  CHECK(normalize("vào www.shop.vn.") == "vào urlObj.");
  CHECK(normalize("https://a.b/c?d=1, rồi") == "urlObj, rồi");
  CHECK(normalize("mã 12345 thôi") == "mã 12345 thôi");
}

TEST_CASE("normalize composes, collapses whitespace and keeps case") {
  // "ệ" written as e + combining circumflex + combining dot below.
  CHECK(normalize("Vie\xcc\xa3\xcc\x82t") == "Vi\xe1\xbb\x87t");
  CHECK(normalize("  Máy   TỐT \t quá  ") == "Máy TỐT quá");
  CHECK(normalize("dòng một\n\n  dòng hai") == "dòng một\ndòng hai");
  CHECK(normalize("") == "");
}

TEST_CASE("normalize is idempotent") {
  const std::vector<std::string> samples{
      "xem tại http://tiki.vn nhé", "liên hệ ai@bc.vn hoặc 0903123456", "  a \n\n b  c ",
      "Giao hàng nhanh!!! www.abc.com/x?y=z.", "số +84.903.123.456 và 028 3823 4567",
      "é ô ư", "mailto a.b-c@d-e.com.vn, call 0123456789."};
  for (const auto& s : samples) CHECK(normalize(normalize(s)) == normalize(s));
  SyntheticOptions opts;
  opts.documents = 300;
  for (const auto& d : synthetic_sentiment_corpus(opts)) CHECK(normalize(normalize(d.text)) == normalize(d.text));
}

TEST_CASE("tokenize") {
  CHECK(tokenize("máy tốt.") == std::vector<std::string>{"máy", "tốt", "."});
  CHECK(tokenize("urlObj!") == std::vector<std::string>{"urlObj", "!"});
  CHECK(tokenize("  a   b ") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("giao_hàng nhanh") == std::vector<std::string>{"giao_hàng", "nhanh"});
  CHECK(tokenize("(tốt)") == std::vector<std::string>{"(", "tốt", ")"});
  CHECK(tokenize(" \n ").empty());
}

TEST_CASE("sentence splitting") {
  CHECK(split_sentences("Máy tốt. Pin kém!") == std::vector<std::string>{"Máy tốt.", "Pin kém!"});
  CHECK(split_sentences("một\nhai") == std::vector<std::string>{"một", "hai"});
  CHECK(split_sentences("giá 1.5 triệu") == std::vector<std::string>{"giá 1.5 triệu"});
  CHECK(split_sentences("tốt?") == std::vector<std::string>{"tốt?"});
}

TEST_CASE("FNV-1a hashing") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  for (std::string s : {"<má", "tốt>", "xyz"}) CHECK(fnv1a64(s) == fnv(s));
}

TEST_CASE("n-gram buckets follow the wrapped code points") {
  SubwordConfig cfg;
  for (std::string token : {"máy", "a", "giao_hàng", "phonenumObj"}) {
    const auto cps = code_points("<" + token + ">");
    std::vector<std::uint32_t> expect;
    for (std::size_t start = 0; start < cps.size(); ++start)
      for (std::size_t n = cfg.min_n; n <= cfg.max_n && start + n <= cps.size(); ++n) {
        std::string gram;
        for (std::size_t k = 0; k < n; ++k) gram += cps[start + k];
        expect.push_back(static_cast<std::uint32_t>(fnv(gram) % cfg.buckets));
      }
    CHECK(ngram_buckets(token, cfg) == expect);
  }
}

TEST_CASE("vocabulary thresholds and ordering") {
  SubwordConfig cfg;
  std::vector<std::vector<std::string>> docs;
  for (int i = 0; i < 5; ++i) docs.push_back({"năm", "tốt"});
  for (int i = 0; i < 4; ++i) docs.push_back({"bốn"});
  docs.push_back({"tốt"});
  const Vocabulary v = build_vocab(docs, cfg);
  CHECK(v.find("năm").has_value());
  CHECK_FALSE(v.find("bốn").has_value());
  CHECK(v.words() == std::vector<std::string>{"tốt", "năm"});
  CHECK(v.counts() == std::vector<std::uint64_t>{6, 5});
  CHECK(v.seen_types == 3);

  const Vocabulary again = build_vocab(docs, cfg);
  CHECK(again.words() == v.words());

  SubwordConfig strict = cfg;
  strict.min_count = 100;
  CHECK_THROWS_AS(build_vocab(docs, strict), DataError);

  const EmbeddingTable table = EmbeddingTable::random(v, 384, 1);
  const auto oov = embed_token("bốn", v, table);
  CHECK(oov.size() == 384);
  for (double x : oov) CHECK(std::isfinite(x));
}

TEST_CASE("embedding is the mean of word and n-gram rows") {
  SubwordConfig cfg;
  cfg.min_count = 1;
  cfg.buckets = 1000;
  const Vocabulary v = build_vocab({{"máy", "tốt"}}, cfg);
  const EmbeddingTable table = EmbeddingTable::random(v, 6, 3);
  const TokenFeatures f = featurize("máy", v);
  REQUIRE(f.word >= 0);
  std::vector<long double> expect(6, 0.0L);
  for (std::size_t c = 0; c < 6; ++c) expect[c] += table.words(static_cast<std::size_t>(f.word), c);
  for (auto b : f.ngrams) {
    const auto row = table.ngrams.row(b);
    for (std::size_t c = 0; c < 6; ++c) expect[c] += row[c];
  }
  const auto got = embed_token("máy", v, table);
  for (std::size_t c = 0; c < 6; ++c)
    CHECK(std::abs(got[c] - static_cast<double>(expect[c] / static_cast<long double>(f.parts()))) < 1e-15);
  CHECK(embed_token("máy", v, table) == got);
}

TEST_CASE("embedding is total over random unicode tokens") {
  SubwordConfig cfg;
  cfg.min_count = 1;
  const Vocabulary v = build_vocab({{"máy", "tốt"}}, cfg);
  const EmbeddingTable table = EmbeddingTable::random(v, 16, 5);
  Rng rng(7);
  for (int t = 0; t < 10000; ++t) {
    std::vector<char32_t> cps(1 + rng.below(12));
    for (auto& c : cps) {
      do {
        c = static_cast<char32_t>(rng.below(0x110000));
      } while (c >= 0xD800 && c <= 0xDFFF);
    }
    const auto e = embed_token(encode_utf8(cps), v, table);
    REQUIRE(e.size() == 16);
    for (double x : e) REQUIRE(std::isfinite(x));
  }
  CHECK(embed_token(std::string("\xff\xfe", 2), v, table).size() == 16);
}

TEST_CASE("corpus JSONL round trip") {
  const Corpus c{{"máy tốt", Label::positive}, {"pin \"kém\"\nquá", Label::negative}, {"không nhãn", std::nullopt}};
  std::stringstream ss;
  write_jsonl(ss, c);
  CHECK(read_jsonl(ss) == c);

  std::stringstream bad("{\"text\": \"a\", \"label\": \"maybe\"}\n");
  CHECK_THROWS_AS(read_jsonl(bad), DataError);
  std::stringstream broken("{\"text\": \n");
  CHECK_THROWS_AS(read_jsonl(broken), DataError);
}
