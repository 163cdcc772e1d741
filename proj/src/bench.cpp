// SPDX-License-Identifier: Apache-2.0
#include "attnsent/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "attnsent/corpus.hpp"
#include "attnsent/errors.hpp"
#include "attnsent/gru.hpp"
#include "attnsent/parallel.hpp"
#include "attnsent/text.hpp"

namespace attnsent {

std::string hardware_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(line.find_first_not_of(' ', colon + 1));
      break;
    }
  }
  return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " logical cores";
}

std::vector<LatencyReport> bench(const std::vector<BenchModel>& models, std::size_t doc_count,
                                 std::size_t reps, std::size_t warmup, std::size_t seq_len) {
  if (doc_count == 0) throw DataError("bench needs at least one document");
  if (reps < 30) throw ConfigError("bench needs reps >= 30, got " + std::to_string(reps));
  if (warmup < 3) throw ConfigError("bench needs warmup >= 3, got " + std::to_string(warmup));

  ScopedThreadCount single(1);
  const std::string hardware = hardware_descriptor();
  std::vector<LatencyReport> reports;
  for (const auto& m : models) {
    for (std::size_t k = 0; k < warmup; ++k) m.run(k % doc_count);
    LatencyReport r;
    r.model = m.name;
    r.reps = reps;
    r.warmup = warmup;
    r.hardware = hardware;
    r.threads = 1;
    r.seq_len = seq_len;
    r.samples.reserve(reps);
    for (std::size_t k = 0; k < reps; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      m.run(k % doc_count);
      const auto t1 = std::chrono::steady_clock::now();
      r.samples.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    const auto [lo, hi] = std::minmax_element(r.samples.begin(), r.samples.end());
    r.min_s = *lo;
    r.max_s = *hi;
    r.mean_s = std::accumulate(r.samples.begin(), r.samples.end(), 0.0) / static_cast<double>(reps);
    double var = 0.0;
    for (double s : r.samples) var += (s - r.mean_s) * (s - r.mean_s);
    r.std_s = std::sqrt(var / static_cast<double>(reps - 1));
    reports.push_back(std::move(r));
  }
  return reports;
}

nlohmann::json to_json(const LatencyReport& r) {
  return {{"model", r.model},   {"mean_s", r.mean_s},     {"std_s", r.std_s},
          {"min_s", r.min_s},   {"max_s", r.max_s},       {"reps", r.reps},
          {"warmup", r.warmup}, {"hardware", r.hardware}, {"threads", r.threads},
          {"seq_len", r.seq_len}};
}

std::string format_table(const std::vector<LatencyReport>& reports) {
  std::size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.model.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "Model"
      << "  Avg.inference time (s)  Std (s)     Min (s)     Max (s)\n";
  out << std::string(width + 58, '-') << "\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(static_cast<int>(width)) << r.model << "  " << std::right
        << std::scientific << std::setprecision(4) << std::setw(22) << r.mean_s << "  "
        << std::setw(10) << r.std_s << "  " << std::setw(10) << r.min_s << "  " << std::setw(10)
        << r.max_s << "\n";
  }
  if (!reports.empty()) {
    out << "reps " << reports.front().reps << ", warmup " << reports.front().warmup
        << ", seq_len " << reports.front().seq_len << ", threads 1, " << reports.front().hardware
        << "\n";
  }
  return out.str();
}

namespace {

std::vector<LatencyReport> run_comparison(const Model& model, const LatencyComparison& cfg) {
  if (cfg.documents == 0) throw DataError("bench needs at least one document");
  if (cfg.seq_len == 0) throw ConfigError("seq_len must be >= 1");
  // Long filler documents from the synthetic generator, cut to seq_len tokens.
  SyntheticOptions opts;
  opts.documents = cfg.documents;
  opts.min_filler = cfg.seq_len;
  opts.max_filler = cfg.seq_len;
  opts.seed = cfg.seed;
  std::vector<Matrix> inputs;
  for (const auto& d : synthetic_sentiment_corpus(opts)) {
    auto tokens = tokenize(normalize(d.text));
    while (tokens.size() < cfg.seq_len) tokens.insert(tokens.end(), tokens.begin(), tokens.end());
    tokens.resize(cfg.seq_len);
    EncodedDoc doc = model.encode_tokens(tokens);
    if (doc.tokens.size() != cfg.seq_len) {
      throw ConfigError("model max_len " + std::to_string(model.config.max_len) +
                        " is shorter than seq_len " + std::to_string(cfg.seq_len));
    }
    inputs.push_back(fused_input(model, doc));
  }

  Rng rng(splitmix64(cfg.seed ^ 0x677275ULL));
  const GruClassifier gru = GruClassifier::random(model.config.d_model(), cfg.gru_units, rng);
  volatile double sink = 0.0;
  const std::vector<BenchModel> models{
      {"self-attention (d_model " + std::to_string(model.config.d_model()) + ", " +
           std::to_string(model.config.heads) + " heads)",
       [&](std::size_t i) { sink = sink + forward_fused(model.config, model.params.dense, inputs[i])[1]; }},
      {"GRU (" + std::to_string(cfg.gru_units) + " units)",
       [&](std::size_t i) { sink = sink + gru.forward(inputs[i])[1]; }},
  };
  return bench(models, inputs.size(), cfg.reps, cfg.warmup, cfg.seq_len);
}

}  // namespace

std::vector<LatencyReport> compare_attention_gru(const Model& model, const LatencyComparison& cfg) {
  return run_comparison(model, cfg);
}

std::vector<LatencyReport> compare_attention_gru(const LatencyComparison& cfg) {
  if (cfg.d_model % 2 != 0 || (cfg.d_model / 2) % 2 != 0) {
    throw ConfigError("d_model must be a multiple of 4 so d_emb = d_pe = d_model / 2 is even");
  }
  ModelConfig mc;
  mc.d_emb = cfg.d_model / 2;
  mc.d_pe = cfg.d_model / 2;
  mc.heads = cfg.heads;
  mc.max_len = std::max<std::size_t>(cfg.seq_len, 1);
  mc.subword.min_count = 1;
  mc.subword.buckets = std::size_t{1} << 14;
  SyntheticOptions opts;
  opts.documents = 64;
  opts.seed = cfg.seed;
  std::vector<std::vector<std::string>> docs;
  for (const auto& d : synthetic_sentiment_corpus(opts)) docs.push_back(tokenize(normalize(d.text)));
  const Model model = Model::create(mc, build_vocab(docs, mc.subword), cfg.seed);
  return run_comparison(model, cfg);
}

}  // namespace attnsent
