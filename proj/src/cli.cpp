// SPDX-License-Identifier: Apache-2.0
#include "attnsent/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include "attnsent/bench.hpp"
#include "attnsent/errors.hpp"
#include "attnsent/gradcheck.hpp"
#include "attnsent/serialize.hpp"
#include "attnsent/text.hpp"
#include "attnsent/training.hpp"

namespace attnsent::cli {
namespace {

using nlohmann::json;

struct Options {
  std::string command;
  std::string config;
  std::string corpus;
  std::string model;
  std::string out;
  std::optional<std::string> text;
  std::uint64_t seed = 1;

  // model overrides
  std::optional<std::size_t> d_emb, d_pe, heads, reduction, ffn_width, max_len, min_count, buckets;
  std::optional<std::string> fusion;
  std::optional<bool> ffn, residual_norm, gate;

  // training
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double gamma = 2.0;
  double alpha_neg = 1.0;
  double alpha_pos = 1.0;
  double lr = 1e-3;
  std::string optimizer = "adam";
  double val_ratio = 0.16;
  double test_ratio = 0.20;

  // prepare
  std::size_t synthetic = 0;
  std::size_t short_sentences = kDefaultShortSentences;
  bool balance = true;

  // bench
  std::size_t reps = 100;
  std::size_t warmup = 5;
  std::size_t seq_len = 64;
  std::size_t units = 256;
  std::size_t bench_d_model = 96;

  // gradcheck
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::size_t probe_len = GradCheckOptions{}.seq_len;
};

void add_model_options(CLI::App* app, Options& o) {
  app->add_option("--d-emb", o.d_emb, "embedding width");
  app->add_option("--d-pe", o.d_pe, "positional encoding width");
  app->add_option("--heads", o.heads, "attention heads");
  app->add_option("--fusion", o.fusion, "add or concat")->check(CLI::IsMember({"add", "concat"}));
  app->add_option("--reduction", o.reduction, "feature gate reduction ratio");
  app->add_option("--ffn-width", o.ffn_width, "FFN hidden width (0 = 4 * d_model)");
  app->add_option("--ffn", o.ffn, "use the FFN sub-layer");
  app->add_option("--residual-norm", o.residual_norm, "use residual connections and layer norm");
  app->add_option("--gate", o.gate, "use the feature gate");
  app->add_option("--max-len", o.max_len, "maximum sequence length");
  app->add_option("--min-count", o.min_count, "vocabulary count threshold");
  app->add_option("--buckets", o.buckets, "n-gram hash buckets");
}

ModelConfig resolve_model(const Options& o, ModelConfig c) {
  if (o.d_emb) c.d_emb = *o.d_emb;
  if (o.d_pe) c.d_pe = *o.d_pe;
  if (o.heads) c.heads = *o.heads;
  if (o.fusion) c.fusion = parse_fusion(*o.fusion);
  if (o.reduction) c.reduction = *o.reduction;
  if (o.ffn_width) c.ffn_width = *o.ffn_width;
  if (o.ffn) c.use_ffn = *o.ffn;
  if (o.residual_norm) c.use_residual_norm = *o.residual_norm;
  if (o.gate) c.use_feature_gate = *o.gate;
  if (o.max_len) c.max_len = *o.max_len;
  if (o.min_count) c.subword.min_count = *o.min_count;
  if (o.buckets) c.subword.buckets = *o.buckets;
  c.validate();
  return c;
}

TrainConfig resolve_train(const Options& o) {
  TrainConfig t;
  t.epochs = o.epochs;
  t.batch_size = o.batch_size;
  t.focal.gamma = o.gamma;
  t.focal.alpha = {o.alpha_neg, o.alpha_pos};
  t.optimizer.kind = parse_optimizer(o.optimizer);
  t.optimizer.learning_rate = o.lr;
  t.seed = o.seed;
  t.ratios = {1.0 - o.val_ratio - o.test_ratio, o.val_ratio, o.test_ratio};
  t.validate();
  return t;
}

json train_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"optimizer", to_string(t.optimizer.kind)},
          {"lr", t.optimizer.learning_rate},
          {"beta1", t.optimizer.beta1},
          {"beta2", t.optimizer.beta2},
          {"adam_eps", t.optimizer.epsilon},
          {"gamma", t.focal.gamma},
          {"alpha", {t.focal.alpha[0], t.focal.alpha[1]}},
          {"seed", t.seed},
          {"ratios", {t.ratios.train, t.ratios.val, t.ratios.test}}};
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// key = value lines, '#' comments, optional [subcommand] sections. Keys
// outside a section apply to every subcommand.
std::vector<std::string> config_file_args(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::vector<std::string> args;
  std::string section;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    if (!section.empty() && section != command) continue;
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty() || key == "config") {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": invalid key");
    }
    args.push_back("--" + key);
    args.push_back(value);
  }
  return args;
}

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  return path;
}

void echo_config(std::ostream& err, json config) { err << "config: " << config.dump() << "\n"; }

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

int cmd_prepare(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.out, "--out");
  if (o.corpus.empty() == (o.synthetic == 0)) {
    throw CLI::ValidationError("prepare", "give exactly one of --corpus or --synthetic");
  }
  echo_config(err, {{"command", "prepare"},
                    {"corpus", o.corpus},
                    {"synthetic", o.synthetic},
                    {"seed", o.seed},
                    {"balance", o.balance},
                    {"short_sentences", o.short_sentences},
                    {"out", o.out}});
  Corpus input;
  if (o.synthetic > 0) {
    SyntheticOptions s;
    s.documents = o.synthetic;
    s.seed = o.seed;
    input = synthetic_sentiment_corpus(s);
  } else {
    input = read_jsonl(o.corpus);
  }
  Corpus cleaned;
  std::size_t dropped = 0;
  for (const auto& d : input) {
    std::string text = normalize(d.text);
    if (tokenize(text).empty()) {
      ++dropped;
      continue;
    }
    cleaned.push_back({std::move(text), d.label});
  }
  json stats{{"documents_in", input.size()}, {"dropped_empty", dropped}};
  Corpus result = cleaned;
  if (o.balance) {
    BalanceStats bs;
    result = balance_corpus(cleaned, o.short_sentences, &bs);
    stats["before"] = {{"neg", bs.before[0]}, {"pos", bs.before[1]}};
    stats["after"] = {{"neg", bs.after[0]}, {"pos", bs.after[1]}};
    stats["segmented_documents"] = bs.segmented_documents;
    stats["segments_added"] = bs.segments_added;
    stats["duplicated"] = bs.duplicated;
  }
  stats["documents_out"] = result.size();
  write_jsonl(o.out, result);
  out << stats.dump() << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.corpus, "--corpus");
  require(o.out, "--out");
  const ModelConfig mc = resolve_model(o, ModelConfig{});
  const TrainConfig tc = resolve_train(o);
  echo_config(err, {{"command", "train"},
                    {"corpus", o.corpus},
                    {"out", o.out},
                    {"model", config_to_json(mc)},
                    {"train", train_to_json(tc)}});
  const Corpus corpus = read_jsonl(o.corpus);
  const CorpusSplits s = split(corpus, tc.ratios, tc.seed);
  TrainResult result = train(s.train, s.val, mc, tc, [&](const EpochRecord& e) {
    out << to_json(e).dump() << "\n" << std::flush;
  });
  save_model(result.model, o.out);
  json summary{{"best_epoch", result.best_epoch},
               {"dropped_documents", result.dropped_documents},
               {"train_documents", s.train.size()},
               {"val_documents", s.val.size()},
               {"test_documents", s.test.size()}};
  if (!s.test.empty()) summary["test"] = to_json(evaluate(result.model, s.test));
  out << summary.dump() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.model, "--model");
  require(o.corpus, "--corpus");
  echo_config(err, {{"command", "eval"}, {"model", o.model}, {"corpus", o.corpus}});
  const Model model = load_model(o.model);
  out << to_json(evaluate(model, read_jsonl(o.corpus))).dump() << "\n";
  return kExitOk;
}

json prediction(const Model& model, const std::string& text) {
  const Probabilities p = forward(model, model.encode(text));
  return {{"label", to_string(static_cast<Label>(predicted_class(p)))}, {"p_neg", p[0]}, {"p_pos", p[1]}};
}

int cmd_predict(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
  require(o.model, "--model");
  echo_config(err, {{"command", "predict"}, {"model", o.model}, {"text", o.text ? json(*o.text) : json()}});
  const Model model = load_model(o.model);
  if (o.text) {
    out << prediction(model, *o.text).dump() << "\n";
    return kExitOk;
  }
  int status = kExitOk;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    try {
      out << prediction(model, line).dump() << "\n" << std::flush;
    } catch (const DataError& e) {
      err << "line " << line_no << ": " << e.what() << "\n";
      out << json{{"error", e.what()}, {"line", line_no}}.dump() << "\n";
      status = kExitData;
    }
  }
  return status;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  LatencyComparison cfg;
  cfg.reps = o.reps;
  cfg.warmup = o.warmup;
  cfg.seq_len = o.seq_len;
  cfg.gru_units = o.units;
  cfg.seed = o.seed;
  cfg.d_model = o.bench_d_model;
  if (o.heads) cfg.heads = *o.heads;
  json echo{{"command", "bench"}, {"reps", cfg.reps},        {"warmup", cfg.warmup},
            {"seq_len", cfg.seq_len}, {"units", cfg.gru_units}, {"seed", cfg.seed},
            {"threads", 1}};
  std::vector<LatencyReport> reports;
  if (!o.model.empty()) {
    echo["model"] = o.model;
    echo_config(err, echo);
    reports = compare_attention_gru(load_model(o.model), cfg);
  } else {
    echo["d_model"] = cfg.d_model;
    echo["heads"] = cfg.heads;
    echo_config(err, echo);
    reports = compare_attention_gru(cfg);
  }
  json all = json::array();
  for (const auto& r : reports) {
    out << to_json(r).dump() << "\n";
    all.push_back(to_json(r));
  }
  err << format_table(reports);
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    if (!f) throw DataError("cannot write " + o.out);
    f << all.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream& err) {
  const ModelConfig mc = resolve_model(o, tiny_model_config());
  GradCheckOptions g;
  g.epsilon = o.epsilon;
  g.tolerance = o.tolerance;
  g.seed = o.seed;
  g.seq_len = o.probe_len;
  echo_config(err, {{"command", "gradcheck"},
                    {"model", config_to_json(mc)},
                    {"epsilon", g.epsilon},
                    {"tolerance", g.tolerance},
                    {"seq_len", g.seq_len},
                    {"seed", g.seed}});
  const GradCheckReport report = grad_check(mc, g);
  out << to_json(report).dump() << "\n";
  if (!report.passed) {
    err << "gradient check failed: max relative error " << report.max_rel_error << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Sentiment classification with concatenated positional encoding, "
               "multi-head self-attention and a feature gate",
               "attnsent"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  auto* prepare = app.add_subcommand("prepare", "normalize and balance a labeled corpus");
  prepare->add_option("--corpus", o.corpus, "input JSONL corpus");
  prepare->add_option("--synthetic", o.synthetic, "generate this many synthetic documents instead");
  prepare->add_option("--out", o.out, "output JSONL corpus");
  prepare->add_option("--seed", o.seed, "random seed");
  prepare->add_option("--balance", o.balance, "balance the two classes");
  prepare->add_option("--short-sentences", o.short_sentences,
                      "documents with at most this many sentences may be duplicated");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--corpus", o.corpus, "labeled JSONL corpus");
  train_cmd->add_option("--out", o.out, "model file to write");
  train_cmd->add_option("--seed", o.seed, "random seed");
  train_cmd->add_option("--epochs", o.epochs, "training epochs");
  train_cmd->add_option("--batch-size", o.batch_size, "documents per batch");
  train_cmd->add_option("--gamma", o.gamma, "focal loss gamma");
  train_cmd->add_option("--alpha-neg", o.alpha_neg, "focal loss weight of the negative class");
  train_cmd->add_option("--alpha-pos", o.alpha_pos, "focal loss weight of the positive class");
  train_cmd->add_option("--lr", o.lr, "learning rate");
  train_cmd->add_option("--optimizer", o.optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  train_cmd->add_option("--val-ratio", o.val_ratio, "validation share of the corpus");
  train_cmd->add_option("--test-ratio", o.test_ratio, "test share of the corpus");
  add_model_options(train_cmd, o);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a labeled corpus");
  eval_cmd->add_option("--model", o.model, "model file");
  eval_cmd->add_option("--corpus", o.corpus, "labeled JSONL corpus");

  auto* predict = app.add_subcommand("predict", "classify --text, or one text per stdin line");
  predict->add_option("--model", o.model, "model file");
  predict->add_option("--text", o.text, "text to classify");

  auto* bench_cmd = app.add_subcommand("bench", "self-attention vs GRU inference latency");
  bench_cmd->add_option("--model", o.model, "model file (default: synthetic width-matched model)");
  bench_cmd->add_option("--d-model", o.bench_d_model, "attention width when no model is given");
  bench_cmd->add_option("--heads", o.heads, "attention heads when no model is given");
  bench_cmd->add_option("--units", o.units, "GRU hidden units");
  bench_cmd->add_option("--seq-len", o.seq_len, "tokens per document");
  bench_cmd->add_option("--reps", o.reps, "measured repetitions per model");
  bench_cmd->add_option("--warmup", o.warmup, "unmeasured warmup calls per model");
  bench_cmd->add_option("--seed", o.seed, "random seed");
  bench_cmd->add_option("--out", o.out, "JSON report file");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  gradcheck->add_option("--seed", o.seed, "random seed");
  gradcheck->add_option("--epsilon", o.epsilon, "finite-difference step");
  gradcheck->add_option("--tolerance", o.tolerance, "maximum relative error");
  gradcheck->add_option("--seq-len", o.probe_len, "tokens in the probe document (1-4)");
  add_model_options(gradcheck, o);

  for (auto* sub : app.get_subcommands({})) {
    sub->add_option("--config", o.config, "key = value defaults file");
  }

  try {
    std::vector<std::string> argv = args;
    if (!argv.empty()) {
      if (auto path = find_config_path(argv)) {
        const auto extra = config_file_args(*path, argv.front());
        argv.insert(argv.begin() + 1, extra.begin(), extra.end());
      }
    }
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);

    if (*prepare) return cmd_prepare(o, out, err);
    if (*train_cmd) return cmd_train(o, out, err);
    if (*eval_cmd) return cmd_eval(o, out, err);
    if (*predict) return cmd_predict(o, in, out, err);
    if (*bench_cmd) return cmd_bench(o, out, err);
    return cmd_gradcheck(o, out, err);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace attnsent::cli
