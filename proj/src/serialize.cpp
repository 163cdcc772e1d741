// SPDX-License-Identifier: Apache-2.0
#include "attnsent/serialize.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "attnsent/errors.hpp"

namespace attnsent {

namespace {

enum class DType : std::uint8_t { f32 = 1, u32 = 2, u8 = 3 };

std::size_t dtype_size(DType t) { return t == DType::u8 ? 1 : 4; }

struct Array {
  DType dtype;
  std::vector<std::uint64_t> dims;
  std::string_view payload;

  std::uint64_t elements() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

  void header(std::string_view name, DType t, std::initializer_list<std::uint64_t> dims) {
    u32(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    u8(static_cast<std::uint8_t>(t));
    u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) u64(d);
  }
  void matrix(std::string_view name, const Matrix& m) {
    header(name, DType::f32, {m.rows(), m.cols()});
    for (double v : m.values()) f32(v);
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  std::string_view bytes(std::size_t n, const char* what) {
    if (n > data_.size() - pos_) {
      throw FormatError("truncated model file: need " + std::to_string(n) + " bytes for " + what +
                        " at offset " + std::to_string(pos_) + ", " +
                        std::to_string(data_.size() - pos_) + " left");
    }
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(bytes(1, what)[0]); }
  std::uint32_t u32(const char* what) {
    auto s = bytes(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(s[i])} << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    auto s = bytes(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(s[i])} << (8 * i);
    return v;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t read_u32_at(std::string_view payload, std::size_t i) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t{static_cast<std::uint8_t>(payload[4 * i + b])} << (8 * b);
  return v;
}

double read_f32_at(std::string_view payload, std::size_t i) {
  return static_cast<double>(std::bit_cast<float>(read_u32_at(payload, i)));
}

const Array& require_array(const std::map<std::string, Array>& arrays, const std::string& name,
                           DType dtype, std::size_t rank) {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw FormatError("model file is missing array '" + name + "'");
  if (it->second.dtype != dtype) throw FormatError("array '" + name + "' has the wrong dtype");
  if (it->second.dims.size() != rank) throw FormatError("array '" + name + "' has the wrong rank");
  return it->second;
}

void load_matrix(const std::map<std::string, Array>& arrays, const std::string& name, Matrix& dst) {
  const Array& a = require_array(arrays, name, DType::f32, 2);
  if (a.dims[0] != dst.rows() || a.dims[1] != dst.cols()) {
    throw FormatError("array '" + name + "' is " + std::to_string(a.dims[0]) + "x" +
                      std::to_string(a.dims[1]) + ", expected " + dst.shape());
  }
  auto v = dst.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = read_f32_at(a.payload, i);
}

}  // namespace

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"d_emb", c.d_emb},
          {"d_pe", c.d_pe},
          {"heads", c.heads},
          {"fusion", to_string(c.fusion)},
          {"reduction", c.reduction},
          {"ffn_width", c.resolved_ffn_width()},
          {"use_ffn", c.use_ffn},
          {"use_residual_norm", c.use_residual_norm},
          {"use_feature_gate", c.use_feature_gate},
          {"max_len", c.max_len},
          {"n_classes", c.n_classes},
          {"min_count", c.subword.min_count},
          {"buckets", c.subword.buckets},
          {"min_n", c.subword.min_n},
          {"max_n", c.subword.max_n}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.d_emb = j.at("d_emb").get<std::size_t>();
    c.d_pe = j.at("d_pe").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    c.reduction = j.at("reduction").get<std::size_t>();
    c.ffn_width = j.at("ffn_width").get<std::size_t>();
    c.use_ffn = j.at("use_ffn").get<bool>();
    c.use_residual_norm = j.at("use_residual_norm").get<bool>();
    c.use_feature_gate = j.at("use_feature_gate").get<bool>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.n_classes = j.at("n_classes").get<std::size_t>();
    c.subword.min_count = j.at("min_count").get<std::size_t>();
    c.subword.buckets = j.at("buckets").get<std::size_t>();
    c.subword.min_n = j.at("min_n").get<std::size_t>();
    c.subword.max_n = j.at("max_n").get<std::size_t>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid model config: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid model config: ") + e.what());
  }
}

std::string serialize_model(const Model& model) {
  Writer w;
  w.bytes(kModelMagic);
  w.u32(kFormatVersion);
  nlohmann::json cfg = config_to_json(model.config);
  cfg["seed"] = model.seed;
  const std::string cfg_text = cfg.dump();
  w.u32(static_cast<std::uint32_t>(cfg_text.size()));
  w.bytes(cfg_text);

  const auto dense = model.params.dense.named();
  w.u32(static_cast<std::uint32_t>(5 + dense.size()));

  std::string joined;
  for (const auto& word : model.vocab.words()) {
    if (!joined.empty()) joined.push_back('\n');
    joined += word;
  }
  w.header("vocab.words", DType::u8, {joined.size()});
  w.bytes(joined);
  w.header("vocab.counts", DType::u32, {model.vocab.size()});
  for (auto c : model.vocab.counts()) w.u32(static_cast<std::uint32_t>(std::min<std::uint64_t>(c, UINT32_MAX)));

  w.matrix("embedding.words", model.params.embedding.words);
  const NgramTable& ngrams = model.params.embedding.ngrams;
  const auto ids = ngrams.stored_buckets();
  w.header("embedding.ngram_ids", DType::u32, {ids.size()});
  for (auto id : ids) w.u32(id);
  w.header("embedding.ngram_rows", DType::f32, {ids.size(), ngrams.dim()});
  for (auto id : ids)
    for (double v : ngrams.row(id)) w.f32(v);

  for (const auto& nm : dense) w.matrix(nm.name, *nm.value);
  return w.take();
}

Model deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(std::min<std::size_t>(bytes.size(), kModelMagic.size()), "magic") != kModelMagic) {
    throw FormatError("bad magic at offset 0: not an ATNSENT1 model file");
  }
  const std::size_t version_offset = r.offset();
  const std::uint32_t version = r.u32("format version");
  if (version != kFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version) +
                      " at offset " + std::to_string(version_offset) + " (supported: " +
                      std::to_string(kFormatVersion) + ")");
  }
  const std::uint32_t cfg_len = r.u32("config length");
  const std::size_t cfg_offset = r.offset();
  const auto cfg_text = r.bytes(cfg_len, "config JSON");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(cfg_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed config JSON at offset " + std::to_string(cfg_offset) + ": " +
                      e.what());
  }
  const ModelConfig config = config_from_json(cfg);
  std::uint64_t seed = 0;
  try {
    seed = cfg.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid model config: ") + e.what());
  }

  std::map<std::string, Array> arrays;
  const std::uint32_t count = r.u32("array count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t array_offset = r.offset();
    const std::uint32_t name_len = r.u32("array name length");
    std::string name(r.bytes(name_len, "array name"));
    const std::uint8_t tag = r.u8("dtype tag");
    if (tag < 1 || tag > 3) {
      throw FormatError("unknown dtype tag " + std::to_string(tag) + " for array '" + name +
                        "' at offset " + std::to_string(r.offset() - 1));
    }
    Array a{static_cast<DType>(tag), {}, {}};
    const std::uint32_t rank = r.u32("array rank");
    if (rank > 4) throw FormatError("array '" + name + "' has rank " + std::to_string(rank));
    for (std::uint32_t k = 0; k < rank; ++k) a.dims.push_back(r.u64("array dims"));
    const std::uint64_t elements = a.elements();
    if (elements > bytes.size()) {
      throw FormatError("array '" + name + "' at offset " + std::to_string(array_offset) +
                        " declares more elements than the file holds");
    }
    a.payload = r.bytes(static_cast<std::size_t>(elements) * dtype_size(a.dtype), "array payload");
    if (!arrays.emplace(name, a).second) {
      throw FormatError("duplicate array '" + name + "' at offset " + std::to_string(array_offset));
    }
  }
  if (!r.at_end()) {
    throw FormatError("trailing bytes after last array at offset " + std::to_string(r.offset()));
  }

  const Array& words_blob = require_array(arrays, "vocab.words", DType::u8, 1);
  std::vector<std::string> words;
  {
    std::string all(words_blob.payload);
    std::size_t start = 0;
    while (true) {
      const std::size_t nl = all.find('\n', start);
      words.push_back(all.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
      if (nl == std::string::npos) break;
      start = nl + 1;
    }
  }
  const Array& counts_arr = require_array(arrays, "vocab.counts", DType::u32, 1);
  if (counts_arr.dims[0] != words.size()) throw FormatError("vocab.counts length mismatch");
  std::vector<std::uint64_t> counts;
  for (std::size_t i = 0; i < words.size(); ++i) counts.push_back(read_u32_at(counts_arr.payload, i));

  Model model = [&] {
    try {
      return Model::create(config, Vocabulary(config.subword, std::move(words), std::move(counts)),
                           seed);
    } catch (const ConfigError& e) {
      throw FormatError(std::string("inconsistent model file: ") + e.what());
    } catch (const DataError& e) {
      throw FormatError(std::string("inconsistent model file: ") + e.what());
    }
  }();

  load_matrix(arrays, "embedding.words", model.params.embedding.words);
  const Array& ids = require_array(arrays, "embedding.ngram_ids", DType::u32, 1);
  const Array& rows = require_array(arrays, "embedding.ngram_rows", DType::f32, 2);
  const std::size_t d = config.d_emb;
  if (rows.dims[0] != ids.dims[0] || rows.dims[1] != d) {
    throw FormatError("embedding.ngram_rows shape does not match embedding.ngram_ids");
  }
  std::vector<double> row(d);
  for (std::size_t i = 0; i < ids.dims[0]; ++i) {
    const std::uint32_t bucket = read_u32_at(ids.payload, i);
    if (bucket >= config.subword.buckets) {
      throw FormatError("n-gram bucket " + std::to_string(bucket) + " out of range");
    }
    for (std::size_t c = 0; c < d; ++c) row[c] = read_f32_at(rows.payload, i * d + c);
    model.params.embedding.ngrams.set_row(bucket, row);
  }

  auto dense = model.params.dense.named();
  for (auto& nm : dense) load_matrix(arrays, nm.name, *nm.value);
  if (arrays.size() != 5 + dense.size()) {
    for (const auto& [name, _] : arrays) {
      const bool known = name.starts_with("vocab.") || name.starts_with("embedding.") ||
                         std::any_of(dense.begin(), dense.end(),
                                     [&](const NamedMatrix& nm) { return nm.name == name; });
      if (!known) throw FormatError("unexpected array '" + name + "' in model file");
    }
  }
  for (const auto& nm : dense) {
    if (!nm.value->all_finite()) throw FormatError("array '" + nm.name + "' holds NaN or Inf");
  }
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path.string() + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_model(bytes);
}

}  // namespace attnsent
