// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "attnsent/corpus.hpp"
#include "attnsent/focal.hpp"
#include "attnsent/model.hpp"
#include "attnsent/optimizer.hpp"
#include "attnsent/vendor_json.hpp"

namespace attnsent {

struct SplitRatios {
  double train = 0.64;
  double val = 0.16;
  double test = 0.20;

  void validate() const;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer;  // Adam, lr 1e-3, betas 0.9 / 0.999, eps 1e-8
  FocalParams focal;          // gamma 2, alpha 1
  std::uint64_t seed = 1;
  SplitRatios ratios;

  void validate() const;
};

// ---- corpus preparation ----------------------------------------------

inline constexpr std::size_t kDefaultShortSentences = 2;

struct BalanceStats {
  std::array<std::size_t, 2> before{};
  std::array<std::size_t, 2> after{};
  std::size_t segmented_documents = 0;  // minority docs split into sentences
  std::size_t segments_added = 0;
  std::size_t duplicated = 0;
};

/// Evens out the two classes by touching only minority-class documents.
/// A corpus whose minority/majority ratio is already >= 0.9 is returned
/// unchanged. Otherwise:
///   1. minority documents with >= 2 sentences are replaced, in order, by
///      one document per sentence, as long as the minority count stays
///      within 1.1x the majority;
///   2. minority documents with <= short_sentences sentences are
///      duplicated round-robin until both classes have the same count.
/// Stops early when no rule applies. Labels are never changed. Throws
/// DataError on unlabeled documents or a single-class corpus.
Corpus balance_corpus(const Corpus& corpus, std::size_t short_sentences = kDefaultShortSentences,
                      BalanceStats* stats = nullptr);

struct CorpusSplits {
  Corpus train;
  Corpus val;
  Corpus test;
};

/// Label-stratified, seed-deterministic, disjoint and exhaustive. Per class
/// the counts follow largest-remainder rounding of ratio * class size.
/// Documents keep their corpus order inside each split. Throws DataError
/// if a split with a positive ratio ends up empty.
CorpusSplits split(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed);

// ---- evaluation ---------------------------------------------------------

struct EvalReport {
  std::size_t documents = 0;
  double accuracy = 0.0;
  std::array<double, 2> precision{};
  std::array<double, 2> recall{};
  std::array<double, 2> f1{};
  double macro_f1 = 0.0;
  std::array<std::array<std::size_t, 2>, 2> confusion{};  // [true][predicted]
  double latency_mean_s = 0.0;
  double latency_std_s = 0.0;
  std::size_t latency_samples = 0;
};

// Classification metrics only; latency fields stay zero.
EvalReport classification_metrics(const std::vector<std::size_t>& truth,
                                  const std::vector<std::size_t>& predicted);

struct EvalOptions {
  bool measure_latency = true;
  std::size_t warmup = 3;
  std::size_t min_latency_samples = 30;
};

/// Predicts every labeled document. Latency is the wall time of one
/// single-threaded forward pass over an encoded document, warmup calls
/// excluded; documents are cycled until min_latency_samples timings exist.
/// Throws DataError when the corpus has no usable labeled document.
EvalReport evaluate(const Model& model, const Corpus& corpus, const EvalOptions& options = {});

nlohmann::json to_json(const EvalReport& report);

// ---- training -----------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

nlohmann::json to_json(const EpochRecord& record);

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t dropped_documents = 0;  // empty after normalization or unlabeled
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Builds the vocabulary from train_docs, then runs mini-batch training.
/// The checkpoint with the best validation macro-F1 is kept (earlier epoch
/// wins ties). An empty val_docs validates on the training documents.
/// Batch gradients are summed per thread over contiguous document ranges,
/// then across threads in order, so a run is reproducible for a fixed
/// thread count. Throws NumericError on a non-finite loss.
TrainResult train(const Corpus& train_docs, const Corpus& val_docs, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

// Splits with train_config.ratios, trains on train, validates on val.
TrainResult train(const Corpus& corpus, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

struct EncodedExample {
  EncodedDoc doc;
  std::size_t label;
};

// Normalizes, tokenizes and featurizes labeled documents; empty or
// unlabeled documents are skipped and counted in *dropped.
std::vector<EncodedExample> encode_corpus(const Model& model, const Corpus& corpus,
                                          std::size_t* dropped = nullptr);

// Sum of per-document losses and gradients over examples[indices].
struct BatchResult {
  double loss_sum;
  Gradients grads;
};
BatchResult batch_gradient(const Model& model, const std::vector<EncodedExample>& examples,
                           std::span<const std::size_t> indices, const FocalParams& focal);

}  // namespace attnsent
