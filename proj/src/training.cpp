// SPDX-License-Identifier: Apache-2.0
#include "attnsent/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "attnsent/errors.hpp"
#include "attnsent/parallel.hpp"
#include "attnsent/random.hpp"
#include "attnsent/text.hpp"

namespace attnsent {

void SplitRatios::validate() const {
  for (double r : {train, val, test}) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("split ratios must be >= 0");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1, got " + std::to_string(train + val + test));
  }
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  optimizer.validate();
  focal.validate();
  ratios.validate();
}

// ---- corpus preparation ----------------------------------------------

Corpus balance_corpus(const Corpus& corpus, std::size_t short_sentences, BalanceStats* stats) {
  for (const auto& d : corpus)
    if (!d.label) throw DataError("balance_corpus: unlabeled document");
  const auto before = class_counts(corpus);
  if (before[0] == 0 || before[1] == 0) {
    throw DataError("balance_corpus: corpus has a single class");
  }
  BalanceStats local;
  BalanceStats& st = stats ? *stats : local;
  st = BalanceStats{};
  st.before = before;

  const Label minority = before[0] < before[1] ? Label::negative : Label::positive;
  const std::size_t majority_count = std::max(before[0], before[1]);
  std::size_t count = std::min(before[0], before[1]);
  Corpus out;
  if (static_cast<double>(count) >= 0.9 * static_cast<double>(majority_count)) {
    out = corpus;
    st.after = before;
    return out;
  }

  const auto ceiling = static_cast<std::size_t>(std::floor(1.1 * static_cast<double>(majority_count)));
  out.reserve(corpus.size() + majority_count - count);
  for (const auto& d : corpus) {
    if (d.label != minority || count >= majority_count) {
      out.push_back(d);
      continue;
    }
    const auto sentences = split_sentences(d.text);
    if (sentences.size() >= 2 && count + sentences.size() - 1 <= ceiling) {
      for (const auto& s : sentences) out.push_back({s, minority});
      count += sentences.size() - 1;
      ++st.segmented_documents;
      st.segments_added += sentences.size() - 1;
    } else {
      out.push_back(d);
    }
  }

  std::vector<std::size_t> short_docs;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].label == minority && split_sentences(out[i].text).size() <= short_sentences) {
      short_docs.push_back(i);
    }
  }
  for (std::size_t k = 0; count < majority_count && !short_docs.empty(); ++k) {
    out.push_back(out[short_docs[k % short_docs.size()]]);
    ++count;
    ++st.duplicated;
  }
  st.after = class_counts(out);
  return out;
}

CorpusSplits split(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  // Strata: negative, positive, unlabeled.
  std::array<std::vector<std::size_t>, 3> strata;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    strata[corpus[i].label ? class_index(*corpus[i].label) : 2].push_back(i);
  }
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  std::array<std::vector<std::size_t>, 3> parts;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    auto& idx = strata[s];
    Rng rng(splitmix64(seed + 0x9e37 * (s + 1)));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);

    const double n = static_cast<double>(idx.size());
    std::array<std::size_t, 3> take{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double exact = r[k] * n;
      take[k] = static_cast<std::size_t>(std::floor(exact));
      frac[k] = exact - std::floor(exact);
      assigned += take[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; assigned < idx.size(); ++k, ++assigned) ++take[order[k % 3]];

    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      parts[k].insert(parts[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                      idx.begin() + static_cast<std::ptrdiff_t>(pos + take[k]));
      pos += take[k];
    }
  }
  const char* names[] = {"train", "val", "test"};
  CorpusSplits out;
  Corpus* dst[] = {&out.train, &out.val, &out.test};
  for (std::size_t k = 0; k < 3; ++k) {
    if (r[k] > 0.0 && parts[k].empty()) {
      throw DataError(std::string("split: the ") + names[k] + " split received no documents");
    }
    std::sort(parts[k].begin(), parts[k].end());
    for (auto i : parts[k]) dst[k]->push_back(corpus[i]);
  }
  return out;
}

// ---- evaluation ---------------------------------------------------------

EvalReport classification_metrics(const std::vector<std::size_t>& truth,
                                  const std::vector<std::size_t>& predicted) {
  if (truth.size() != predicted.size()) throw DataError("truth/prediction length mismatch");
  if (truth.empty()) throw DataError("cannot evaluate an empty corpus");
  EvalReport r;
  r.documents = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] > 1 || predicted[i] > 1) throw DataError("class index out of range");
    ++r.confusion[truth[i]][predicted[i]];
  }
  r.accuracy = static_cast<double>(r.confusion[0][0] + r.confusion[1][1]) /
               static_cast<double>(r.documents);
  for (std::size_t c = 0; c < 2; ++c) {
    const double tp = static_cast<double>(r.confusion[c][c]);
    const double predicted_c = static_cast<double>(r.confusion[0][c] + r.confusion[1][c]);
    const double actual_c = static_cast<double>(r.confusion[c][0] + r.confusion[c][1]);
    r.precision[c] = predicted_c > 0 ? tp / predicted_c : 0.0;
    r.recall[c] = actual_c > 0 ? tp / actual_c : 0.0;
    const double denom = r.precision[c] + r.recall[c];
    r.f1[c] = denom > 0 ? 2.0 * r.precision[c] * r.recall[c] / denom : 0.0;
  }
  r.macro_f1 = (r.f1[0] + r.f1[1]) / 2.0;
  return r;
}

std::vector<EncodedExample> encode_corpus(const Model& model, const Corpus& corpus,
                                          std::size_t* dropped) {
  std::vector<EncodedExample> out;
  std::size_t skipped = 0;
  for (const auto& d : corpus) {
    if (!d.label) {
      ++skipped;
      continue;
    }
    EncodedDoc doc = model.encode(d.text);
    if (doc.tokens.empty()) {
      ++skipped;
      continue;
    }
    out.push_back({std::move(doc), class_index(*d.label)});
  }
  if (dropped) *dropped = skipped;
  return out;
}

EvalReport evaluate(const Model& model, const Corpus& corpus, const EvalOptions& options) {
  const auto examples = encode_corpus(model, corpus);
  if (examples.empty()) throw DataError("cannot evaluate an empty corpus");
  const std::size_t n = examples.size();
  std::vector<std::size_t> truth(n), predicted(n);
  for (std::size_t i = 0; i < n; ++i) truth[i] = examples[i].label;

  if (!options.measure_latency) {
    for (std::size_t i = 0; i < n; ++i) predicted[i] = predicted_class(forward(model, examples[i].doc));
    return classification_metrics(truth, predicted);
  }

  ScopedThreadCount single(1);
  for (std::size_t k = 0; k < options.warmup; ++k) forward(model, examples[k % n].doc);
  const std::size_t samples = std::max(n, options.min_latency_samples);
  std::vector<double> seconds(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const Probabilities p = forward(model, examples[k % n].doc);
    const auto t1 = std::chrono::steady_clock::now();
    seconds[k] = std::chrono::duration<double>(t1 - t0).count();
    if (k < n) predicted[k] = predicted_class(p);
  }
  EvalReport r = classification_metrics(truth, predicted);
  const double mean = std::accumulate(seconds.begin(), seconds.end(), 0.0) / static_cast<double>(samples);
  double var = 0.0;
  for (double s : seconds) var += (s - mean) * (s - mean);
  r.latency_mean_s = mean;
  r.latency_std_s = samples > 1 ? std::sqrt(var / static_cast<double>(samples - 1)) : 0.0;
  r.latency_samples = samples;
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  auto per_class = [](const std::array<double, 2>& v) {
    return nlohmann::json{{"neg", v[0]}, {"pos", v[1]}};
  };
  return {{"documents", r.documents},
          {"accuracy", r.accuracy},
          {"precision", per_class(r.precision)},
          {"recall", per_class(r.recall)},
          {"f1", per_class(r.f1)},
          {"macro_f1", r.macro_f1},
          {"confusion", {{r.confusion[0][0], r.confusion[0][1]}, {r.confusion[1][0], r.confusion[1][1]}}},
          {"latency", {{"mean_s", r.latency_mean_s}, {"std_s", r.latency_std_s}, {"samples", r.latency_samples}}}};
}

nlohmann::json to_json(const EpochRecord& e) {
  return {{"epoch", e.epoch},
          {"train_loss", e.train_loss},
          {"val_loss", e.val_loss},
          {"val_macro_f1", e.val_macro_f1}};
}

// ---- training -----------------------------------------------------------

BatchResult batch_gradient(const Model& model, const std::vector<EncodedExample>& examples,
                           std::span<const std::size_t> indices, const FocalParams& focal) {
  if (indices.empty()) throw DataError("empty batch");
  const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), indices.size());
  std::vector<std::optional<BatchResult>> partial(chunks);

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = indices.size() * c / chunks;
    const std::size_t end = indices.size() * (c + 1) / chunks;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& ex = examples[indices[i]];
      LossAndGrads r = backward(model, ex.doc, ex.label, focal);
      if (!partial[c]) {
        partial[c] = BatchResult{r.loss, std::move(r.grads)};
      } else {
        partial[c]->loss_sum += r.loss;
        partial[c]->grads.accumulate(r.grads);
      }
    }
  };
  if (chunks > 1) {
#pragma omp parallel for schedule(static, 1) num_threads(static_cast<int>(chunks))
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(chunks); ++c) run_chunk(static_cast<std::size_t>(c));
  } else {
    run_chunk(0);
  }
  BatchResult total = std::move(*partial[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    total.loss_sum += partial[c]->loss_sum;
    total.grads.accumulate(partial[c]->grads);
  }
  return total;
}

namespace {

struct ValidationResult {
  double loss;
  double macro_f1;
};

ValidationResult validate(const Model& model, const std::vector<EncodedExample>& examples,
                          const FocalParams& focal) {
  std::vector<std::size_t> truth, predicted;
  double loss = 0.0;
  for (const auto& ex : examples) {
    const Probabilities p = forward(model, ex.doc);
    loss += focal_loss(p, ex.label, focal);
    truth.push_back(ex.label);
    predicted.push_back(predicted_class(p));
  }
  return {loss / static_cast<double>(examples.size()),
          classification_metrics(truth, predicted).macro_f1};
}

}  // namespace

TrainResult train(const Corpus& train_docs, const Corpus& val_docs, const ModelConfig& model_config,
                  const TrainConfig& tc, const EpochCallback& on_epoch) {
  tc.validate();
  model_config.validate();

  std::vector<std::vector<std::string>> tokenized;
  Corpus usable;
  std::size_t dropped = 0;
  for (const auto& d : train_docs) {
    auto tokens = d.label ? tokenize(normalize(d.text)) : std::vector<std::string>{};
    if (tokens.empty()) {
      ++dropped;
      continue;
    }
    tokenized.push_back(std::move(tokens));
    usable.push_back(d);
  }
  if (usable.empty()) throw DataError("no usable training documents");

  Model model = Model::create(model_config, build_vocab(tokenized, model_config.subword), tc.seed);
  std::vector<EncodedExample> train_set;
  train_set.reserve(usable.size());
  for (std::size_t i = 0; i < usable.size(); ++i) {
    train_set.push_back({model.encode_tokens(tokenized[i]), class_index(*usable[i].label)});
  }
  std::size_t val_dropped = 0;
  std::vector<EncodedExample> val_set = encode_corpus(model, val_docs, &val_dropped);
  const std::vector<EncodedExample>& val_ref = val_set.empty() ? train_set : val_set;

  auto optimizer = make_optimizer(model.params, tc.optimizer);
  Rng order_rng(splitmix64(tc.seed ^ 0x7368756666ULL));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{model, {}, 0, dropped + val_dropped};
  double best_f1 = -1.0;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      std::span<const std::size_t> batch(order.data() + start, end - start);
      BatchResult br = batch_gradient(model, train_set, batch, tc.focal);
      if (!std::isfinite(br.loss_sum)) {
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_no));
      }
      epoch_loss += br.loss_sum;
      br.grads.scale(1.0 / static_cast<double>(batch.size()));
      optimizer->step(model.params, br.grads);
    }
    const ValidationResult v = validate(model, val_ref, tc.focal);
    if (!std::isfinite(v.loss)) {
      throw NumericError("training diverged: non-finite validation loss at epoch " +
                         std::to_string(epoch));
    }
    EpochRecord rec{epoch, epoch_loss / static_cast<double>(train_set.size()), v.loss, v.macro_f1};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (v.macro_f1 > best_f1) {
      best_f1 = v.macro_f1;
      result.best_epoch = epoch;
      result.model.params = model.params;
    }
  }
  return result;
}

TrainResult train(const Corpus& corpus, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch) {
  train_config.validate();
  CorpusSplits s = split(corpus, train_config.ratios, train_config.seed);
  return train(s.train, s.val, model_config, train_config, on_epoch);
}

}  // namespace attnsent
