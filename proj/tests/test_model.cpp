// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>

#include "attnsent/errors.hpp"
#include "attnsent/gradcheck.hpp"
#include "attnsent/model.hpp"
#include "attnsent/optimizer.hpp"
#include "attnsent/serialize.hpp"
#include "attnsent/text.hpp"

using namespace attnsent;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.d_emb = 8;
  c.d_pe = 8;
  c.heads = 4;
  c.max_len = 12;
  c.subword.min_count = 1;
  c.subword.buckets = 512;
  return c;
}

Model small_model(const ModelConfig& c = small_config(), std::uint64_t seed = 3) {
  const std::vector<std::vector<std::string>> docs{
      {"máy", "tốt", "pin", "kém", "giao", "hàng", "nhanh", "đẹp", "không", "thích"}};
  return Model::create(c, build_vocab(docs, c.subword), seed);
}

double max_logit_diff(const Model& a, const Model& b, const EncodedDoc& doc) {
  const Matrix la = forward_trace(a, doc).logits;
  const Matrix lb = forward_trace(b, doc).logits;
  return max_abs_diff(la, lb);
}

}  // namespace

TEST_CASE("configuration validation") {
  ModelConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  CHECK(c.d_model() == 16);
  CHECK(c.resolved_ffn_width() == 64);
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.fusion = Fusion::add;
  c.d_pe = 6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.n_classes = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.reduction = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  const ModelConfig d;
  CHECK(d.d_emb == 384);
  CHECK(d.d_model() == 768);
  CHECK(d.heads == 12);
  CHECK(d.reduction == 4);
  CHECK(d.resolved_ffn_width() == 3072);
  CHECK(d.subword.min_count == 5);
  CHECK(d.subword.buckets == (std::size_t{1} << 20));
}

TEST_CASE("forward yields a deterministic distribution") {
  const Model m = small_model();
  const EncodedDoc doc = m.encode("máy tốt nhưng pin kém, giao hàng chậm");
  const Probabilities p = forward(m, doc);
  CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-12);
  CHECK(p[0] > 0.0);
  CHECK(p[0] < 1.0);
  const Probabilities again = forward(m, doc);
  CHECK(std::memcmp(p.data(), again.data(), sizeof(p)) == 0);
  const ForwardTrace t = forward_trace(m, doc);
  CHECK(t.probs == p);

  const Model twin = small_model();
  CHECK(forward(twin, doc) == p);
  CHECK_THROWS_AS(forward(m, EncodedDoc{}), DataError);
  CHECK(m.encode("  ").tokens.empty());
}

TEST_CASE("every block combination produces valid outputs") {
  for (bool ffn : {false, true})
    for (bool norm : {false, true})
      for (bool gate : {false, true})
        for (Fusion f : {Fusion::add, Fusion::concat}) {
          ModelConfig c = small_config();
          c.use_ffn = ffn;
          c.use_residual_norm = norm;
          c.use_feature_gate = gate;
          c.fusion = f;
          const Model m = small_model(c);
          const Probabilities p = forward(m, m.encode("máy tốt lắm"));
          CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-12);
          std::size_t groups = m.params.dense.named().size();
          CHECK(groups == 4 * 3 + 1 + (norm ? 2 : 0) + (ffn ? 4 : 0) + (ffn && norm ? 2 : 0) +
                              (gate ? 2 : 0) + 2);
        }
}

TEST_CASE("token order is invisible without positional encoding") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Model m = small_model(small_config(), seed);
    const std::vector<std::string> tokens{"máy", "tốt", "pin", "kém", "giao", "nhanh"};
    auto permuted = tokens;
    std::rotate(permuted.begin(), permuted.begin() + 2, permuted.end());
    std::swap(permuted[0], permuted[3]);

    const Matrix base = forward_trace(m, m.encode_tokens(tokens)).logits;
    const Matrix moved = forward_trace(m, m.encode_tokens(permuted)).logits;
    CHECK(max_abs_diff(base, moved) > 1e-6);

    m.positional = PositionalTable::zeroed(m.config.max_len, m.config.d_pe);
    const Matrix zbase = forward_trace(m, m.encode_tokens(tokens)).logits;
    const Matrix zmoved = forward_trace(m, m.encode_tokens(permuted)).logits;
    CHECK(max_abs_diff(zbase, zmoved) <= 1e-10);
  }
}

TEST_CASE("inputs agreeing on the first max_len tokens agree") {
  const Model m = small_model();
  std::vector<std::string> a(12, "tốt");
  a[3] = "pin";
  auto b = a;
  a.insert(a.end(), {"kém", "quá"});
  b.insert(b.end(), {"đẹp", "máy", "nhanh"});
  const EncodedDoc da = m.encode_tokens(a), db = m.encode_tokens(b);
  CHECK(da.truncated);
  CHECK(da.tokens.size() == 12);
  CHECK(forward(m, da) == forward(m, db));
}

TEST_CASE("full-model gradients match finite differences") {
  for (Fusion f : {Fusion::concat, Fusion::add})
    for (std::size_t n : {1u, 3u, 4u}) {
      ModelConfig c = tiny_model_config();
      c.fusion = f;
      GradCheckOptions o;
      o.seq_len = n;
      const GradCheckReport r = grad_check(c, o);
      CHECK(r.passed);
      CHECK(r.max_rel_error < 1e-4);
      for (const auto& g : r.groups) {
        INFO(g.name);
        if (g.name != "embedding.words" || n > 1) CHECK(g.entries > 0);
        if (g.name == "classifier.w" || g.name == "classifier.b") CHECK(g.max_rel_error < 1e-6);
      }
    }
  ModelConfig bare = tiny_model_config();
  bare.use_ffn = false;
  bare.use_residual_norm = false;
  bare.use_feature_gate = false;
  CHECK(grad_check(bare).passed);

  GradCheckOptions zero;
  zero.epsilon = 0.0;
  CHECK_THROWS_AS(grad_check(tiny_model_config(), zero), ConfigError);
  ModelConfig wide = tiny_model_config();
  wide.d_emb = 16;
  wide.d_pe = 16;
  CHECK_THROWS_AS(grad_check(wide), ConfigError);
}

TEST_CASE("confident correct predictions give vanishing gradients") {
  Model m = small_model();
  m.params.dense.classifier_b(0, 1) = 40.0;
  const EncodedDoc doc = m.encode("máy tốt");
  const LossAndGrads r = backward(m, doc, 1, FocalParams{});
  CHECK(r.loss < 1e-30);
  for (const auto& g : r.grads.dense.named())
    for (double v : g.value->values()) CHECK(std::abs(v) < 1e-30);
}

TEST_CASE("only touched embedding rows receive gradients") {
  const Model m = small_model();
  const EncodedDoc doc = m.encode("máy tốt xyz");
  const LossAndGrads r = backward(m, doc, 0, FocalParams{});
  std::set<std::int32_t> words;
  std::set<std::uint32_t> buckets;
  for (const auto& t : doc.tokens) {
    if (t.word >= 0) words.insert(t.word);
    buckets.insert(t.ngrams.begin(), t.ngrams.end());
  }
  CHECK(r.grads.embedding.words.size() == words.size());
  for (const auto& [id, g] : r.grads.embedding.words) CHECK(words.count(id) == 1);
  CHECK(r.grads.embedding.ngrams.size() == buckets.size());
  for (const auto& [b, g] : r.grads.embedding.ngrams) CHECK(buckets.count(b) == 1);
  CHECK(r.loss >= 0.0);
}

TEST_CASE("a small SGD step lowers the loss of its example") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    Model m = small_model(small_config(), seed);
    const EncodedDoc doc = m.encode("pin kém giao hàng chậm");
    for (std::size_t label : {0u, 1u}) {
      Model copy = m;
      const LossAndGrads before = backward(copy, doc, label, FocalParams{});
      SgdOptimizer sgd(1e-4);
      sgd.step(copy.params, before.grads);
      const double after = focal_loss(forward(copy, doc), label, FocalParams{});
      CHECK(after < before.loss);
    }
  }
}

TEST_CASE("save and load round trip") {
  Model m = small_model();
  // Touch some n-gram rows so the sparse table has stored entries.
  const EncodedDoc doc = m.encode("máy tốt nhưng pin kém abc");
  const LossAndGrads g = backward(m, doc, 0, FocalParams{});
  SgdOptimizer(0.1).step(m.params, g.grads);
  CHECK(m.params.embedding.ngrams.stored_count() > 0);

  const std::string bytes = serialize_model(m);
  CHECK(bytes.substr(0, 8) == "ATNSENT1");
  CHECK(serialize_model(m) == bytes);
  const Model loaded = deserialize_model(bytes);
  CHECK(serialize_model(loaded) == bytes);
  CHECK(loaded.vocab.words() == m.vocab.words());
  CHECK(config_to_json(loaded.config) == config_to_json(m.config));
  for (const char* text : {"máy tốt nhưng pin kém abc", "hoàn toàn mới", "x"}) {
    CHECK(max_logit_diff(m, loaded, m.encode(text)) < 1e-6);
  }

  const auto path = std::filesystem::temp_directory_path() / "attnsent_roundtrip.bin";
  save_model(m, path);
  CHECK(serialize_model(load_model(path)) == bytes);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path), DataError);
}

TEST_CASE("damaged model files are rejected with their offset") {
  const std::string bytes = serialize_model(small_model());
  auto message = [](const std::string& data) {
    try {
      deserialize_model(data);
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };

  std::string corrupt = bytes;
  corrupt[2] = 'X';
  CHECK(message(corrupt).find("offset 0") != std::string::npos);

  std::string bumped = bytes;
  bumped[8] = 2;
  const std::string version_msg = message(bumped);
  CHECK(version_msg.find("unsupported") != std::string::npos);
  CHECK(version_msg.find("version 2") != std::string::npos);
  CHECK(version_msg.find("offset 8") != std::string::npos);

  std::string huge_config = bytes;
  huge_config[12] = '\xff';
  huge_config[13] = '\xff';
  CHECK(message(huge_config).find("offset 16") != std::string::npos);

  for (std::size_t cut : {std::size_t{5}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    const std::string msg = message(bytes.substr(0, cut));
    CHECK(msg.find("offset") != std::string::npos);
  }
  CHECK(message(bytes + "x").find("trailing") != std::string::npos);
  CHECK(message("") != "no error");
}
