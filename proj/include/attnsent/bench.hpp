// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "attnsent/model.hpp"
#include "attnsent/vendor_json.hpp"

namespace attnsent {

struct LatencyReport {
  std::string model;
  double mean_s = 0.0;
  double std_s = 0.0;
  double min_s = 0.0;
  double max_s = 0.0;
  std::size_t reps = 0;
  std::size_t warmup = 0;
  std::string hardware;
  int threads = 1;
  std::size_t seq_len = 0;
  std::vector<double> samples;  // one per measured rep, seconds
};

struct BenchModel {
  std::string name;
  // Runs one forward pass on document i (0 <= i < doc_count).
  std::function<void(std::size_t)> run;
};

// CPU model name and logical core count.
std::string hardware_descriptor();

/// Times each model on documents cycled round-robin: warmup calls first,
/// then reps measured calls on a steady clock, single-threaded. Throws
/// DataError for an empty document set and ConfigError for reps < 30 or
/// warmup < 3.
std::vector<LatencyReport> bench(const std::vector<BenchModel>& models, std::size_t doc_count,
                                 std::size_t reps, std::size_t warmup, std::size_t seq_len = 0);

// {model, mean_s, std_s, min_s, max_s, reps, warmup, hardware} plus threads and seq_len.
nlohmann::json to_json(const LatencyReport& r);
// Columns: Model, Avg.inference time (s), Std (s), Min (s), Max (s).
std::string format_table(const std::vector<LatencyReport>& reports);

struct LatencyComparison {
  std::size_t d_model = 96;  // matched width: attention d_model == GRU input dim
  std::size_t heads = 12;
  std::size_t gru_units = 256;
  std::size_t seq_len = 64;
  std::size_t documents = 8;
  std::size_t reps = 100;
  std::size_t warmup = 5;
  std::uint64_t seed = 1;
};

/// Self-attention classifier (default assembly, concat fusion with
/// d_emb = d_pe = d_model / 2) against a GRU classifier reading the same
/// fused embedding + positional input. Both are timed from the fused
/// n x d_model matrix to class probabilities.
std::vector<LatencyReport> compare_attention_gru(const LatencyComparison& cfg);

/// Same comparison for an existing model: the GRU is width-matched to
/// model.config.d_model() and the inputs are documents of seq_len
/// synthetic tokens.
std::vector<LatencyReport> compare_attention_gru(const Model& model, const LatencyComparison& cfg);

}  // namespace attnsent
