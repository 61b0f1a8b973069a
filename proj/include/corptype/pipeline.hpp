// Copyright 2026 The corptype Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Pipeline stages over a run directory. Each stage validates its inputs,
// writes its artifacts atomically and records input/output hashes in
// manifest.json. Layout:
//
//   run_dir/kb/split.tsv
//   run_dir/corpus/preprocessed.jsonl, entity_ids.txt, units.txt
//   run_dir/embeddings/entities.vec, units.vec
//   run_dir/datasets/{train,dev,test}.jsonl, sampling.json
//   run_dir/models/gm.json, cm.json
//   run_dir/scores/<model>.<dev|test>.tsv
//   run_dir/reports/<model>.json, sweep_context.tsv
//   run_dir/manifest.json

#ifndef CORPTYPE_PIPELINE_HPP
#define CORPTYPE_PIPELINE_HPP

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "corptype/common.hpp"
#include "corptype/corpus.hpp"
#include "corptype/embeddings.hpp"
#include "corptype/eval.hpp"
#include "corptype/kb.hpp"
#include "corptype/models.hpp"
#include "corptype/neural.hpp"
#include "corptype/syngen.hpp"

namespace corptype {

inline constexpr std::string_view kToolVersion = "corptype 1.0.0";

struct ModelTraining {
  std::size_t hidden = 200;
  TrainConfig train;
};

struct RunConfig {
  // Paths. corpus / kb_* are inputs; run_dir receives every artifact.
  std::string corpus;
  std::string kb_entities;
  std::string kb_types;
  std::string kb_split;  // optional; otherwise split from seed and ratios
  std::string run_dir = "run";

  std::uint64_t seed = 1;
  bool deterministic = false;
  int workers = 1;
  SplitRatios split;

  // Embeddings
  std::size_t entity_dim = 200;
  std::size_t unit_dim = 100;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t embed_epochs = 5;
  std::uint64_t min_count = 5;
  double embed_learning_rate = 0.025;
  double subsample = 0.0;

  // Context model input
  std::size_t k = 4;
  std::size_t l = 5;
  std::size_t dataset_window = 0;  // 0: max(k, l)
  std::string summary = "mean";

  ModelTraining gm{200, {}};
  ModelTraining cm{300, {}};

  // Context sampling
  TrainSampling sampling;
  std::size_t dev_contexts_per_entity = 200;
  std::size_t test_contexts_per_entity = 300;

  SliceConfig slices;

  // generate-synthetic
  SynSpec synthetic;

  std::size_t built_window() const { return dataset_window ? dataset_window : std::max(k, l); }
};

namespace detail {

struct ConfigField {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

template <typename T>
ConfigField field(std::string key, T& ref) {
  ConfigField f;
  f.key = key;
  f.set = [&ref, key](const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      ref = v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1") {
        ref = true;
      } else if (v == "false" || v == "0") {
        ref = false;
      } else {
        throw ValidationError("config " + key + ": expected true/false, got " + v);
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!parse_real(v, ref)) throw ValidationError("config " + key + ": not a number: " + v);
    } else {
      long long x;
      if (!parse_int(v, x)) throw ValidationError("config " + key + ": not an integer: " + v);
      if constexpr (std::is_unsigned_v<T>) {
        if (x < 0) throw ValidationError("config " + key + ": must be non-negative");
      }
      ref = static_cast<T>(x);
    }
  };
  f.get = [&ref] {
    if constexpr (std::is_same_v<T, std::string>) {
      return ref;
    } else if constexpr (std::is_same_v<T, bool>) {
      return std::string(ref ? "true" : "false");
    } else if constexpr (std::is_floating_point_v<T>) {
      return format_real(ref);
    } else {
      return std::to_string(ref);
    }
  };
  return f;
}

inline ConfigField early_stop_field(std::string key, TrainConfig::EarlyStop& ref) {
  ConfigField f;
  f.key = key;
  f.set = [&ref, key](const std::string& v) {
    if (v == "dev_loss") {
      ref = TrainConfig::EarlyStop::kDevLoss;
    } else if (v == "dev_micro_f1") {
      ref = TrainConfig::EarlyStop::kDevMicroF1;
    } else {
      throw ValidationError("config " + key + ": expected dev_loss or dev_micro_f1");
    }
  };
  f.get = [&ref] {
    return std::string(ref == TrainConfig::EarlyStop::kDevLoss ? "dev_loss" : "dev_micro_f1");
  };
  return f;
}

inline void add_training_fields(std::vector<ConfigField>& fs, const std::string& prefix, ModelTraining& m) {
  fs.push_back(field(prefix + ".hidden", m.hidden));
  fs.push_back(field(prefix + ".learning_rate", m.train.learning_rate));
  fs.push_back(field(prefix + ".adagrad_epsilon", m.train.adagrad_epsilon));
  fs.push_back(field(prefix + ".batch_size", m.train.batch_size));
  fs.push_back(field(prefix + ".max_epochs", m.train.max_epochs));
  fs.push_back(field(prefix + ".patience", m.train.patience));
  fs.push_back(early_stop_field(prefix + ".early_stop", m.train.early_stop));
}

}  // namespace detail

// Every config key, bound to `cfg`. The returned closures reference cfg.
inline std::vector<detail::ConfigField> config_fields(RunConfig& cfg) {
  using detail::field;
  std::vector<detail::ConfigField> fs;
  fs.push_back(field("corpus", cfg.corpus));
  fs.push_back(field("kb.entities", cfg.kb_entities));
  fs.push_back(field("kb.types", cfg.kb_types));
  fs.push_back(field("kb.split", cfg.kb_split));
  fs.push_back(field("run_dir", cfg.run_dir));
  fs.push_back(field("seed", cfg.seed));
  fs.push_back(field("deterministic", cfg.deterministic));
  fs.push_back(field("workers", cfg.workers));
  fs.push_back(field("split.train", cfg.split.train));
  fs.push_back(field("split.dev", cfg.split.dev));
  fs.push_back(field("split.test", cfg.split.test));
  fs.push_back(field("embed.entity_dim", cfg.entity_dim));
  fs.push_back(field("embed.unit_dim", cfg.unit_dim));
  fs.push_back(field("embed.window", cfg.window));
  fs.push_back(field("embed.negatives", cfg.negatives));
  fs.push_back(field("embed.epochs", cfg.embed_epochs));
  fs.push_back(field("embed.min_count", cfg.min_count));
  fs.push_back(field("embed.learning_rate", cfg.embed_learning_rate));
  fs.push_back(field("embed.subsample", cfg.subsample));
  fs.push_back(field("context.k", cfg.k));
  fs.push_back(field("context.l", cfg.l));
  fs.push_back(field("context.dataset_window", cfg.dataset_window));
  fs.push_back(field("context.summary", cfg.summary));
  detail::add_training_fields(fs, "gm", cfg.gm);
  detail::add_training_fields(fs, "cm", cfg.cm);
  fs.push_back(field("sample.min_per_type", cfg.sampling.min_per_type));
  fs.push_back(field("sample.max_per_type", cfg.sampling.max_per_type));
  fs.push_back(field("sample.dev_per_entity", cfg.dev_contexts_per_entity));
  fs.push_back(field("sample.test_per_entity", cfg.test_contexts_per_entity));
  fs.push_back(field("slice.head_entity_frequency", cfg.slices.head_entity_min_frequency));
  fs.push_back(field("slice.tail_entity_frequency", cfg.slices.tail_entity_max_frequency));
  fs.push_back(field("slice.head_type_train", cfg.slices.head_type_min_train));
  fs.push_back(field("slice.tail_type_train", cfg.slices.tail_type_max_train));
  fs.push_back(field("synthetic.num_types", cfg.synthetic.num_types));
  fs.push_back(field("synthetic.entities_per_type", cfg.synthetic.entities_per_type));
  fs.push_back(field("synthetic.vocab_per_type", cfg.synthetic.vocab_per_type));
  fs.push_back(field("synthetic.background_vocab", cfg.synthetic.background_vocab));
  fs.push_back(field("synthetic.informativeness", cfg.synthetic.context_informativeness));
  fs.push_back(field("synthetic.mentions_per_entity", cfg.synthetic.mentions_per_entity));
  fs.push_back(field("synthetic.sentence_length", cfg.synthetic.sentence_length));
  fs.push_back(field("synthetic.notable_share", cfg.synthetic.notable_share));
  fs.push_back(field("synthetic.positional_signal", cfg.synthetic.positional_signal));
  return fs;
}

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (auto& f : config_fields(cfg)) {
    if (f.key == key) {
      f.set(value);
      return;
    }
  }
  throw ValidationError("unknown config key: " + key);
}

// "key = value" lines; '#' starts a comment.
inline void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& origin = "config") {
  const auto lines = split(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(origin + ":" + std::to_string(i + 1) + ": expected key = value");
    }
    try {
      set_config_value(cfg, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    } catch (const ValidationError& e) {
      throw ValidationError(origin + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

inline std::string format_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  for (auto& f : config_fields(copy)) out += f.key + " = " + f.get() + "\n";
  return out;
}

inline bool is_path_key(std::string_view key) {
  return key == "corpus" || key == "kb.entities" || key == "kb.types" || key == "kb.split" ||
         key == "run_dir";
}

// Parameter echo; paths are left out when `with_paths` is false so reports
// from different run directories stay comparable.
inline nlohmann::json config_json(const RunConfig& cfg, bool with_paths = true) {
  RunConfig copy = cfg;
  nlohmann::json j = nlohmann::json::object();
  for (auto& f : config_fields(copy)) {
    if (with_paths || !is_path_key(f.key)) j[f.key] = f.get();
  }
  return j;
}

// Hash of everything that influences artifacts; worker count excluded in
// deterministic mode since it cannot change results there.
inline std::string config_hash(const RunConfig& cfg) {
  RunConfig copy = cfg;
  if (copy.deterministic) copy.workers = 1;
  Fnv1a h;
  h.update(format_config(copy));
  return h.hex();
}

inline void validate_config(const RunConfig& cfg) {
  if (cfg.run_dir.empty()) throw ValidationError("run_dir must be set");
  if (cfg.workers < 1) throw ValidationError("workers must be >= 1");
  if (cfg.entity_dim == 0 || cfg.unit_dim == 0) throw ValidationError("embedding dims must be positive");
  if (cfg.window == 0) throw ValidationError("embed.window must be positive");
  if (cfg.embed_epochs == 0) throw ValidationError("embed.epochs must be positive");
  if (cfg.gm.hidden == 0 || cfg.cm.hidden == 0) throw ValidationError("hidden sizes must be positive");
  if (cfg.dataset_window && cfg.dataset_window < std::max(cfg.k, cfg.l)) {
    throw ValidationError("context.dataset_window is smaller than max(k, l)");
  }
  cfg.gm.train.validate();
  cfg.cm.train.validate();
  parse_summary(cfg.summary);
}

// ---------------------------------------------------------------------------

class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg, std::ostream* log = &std::clog) : cfg_(std::move(cfg)), log_(log) {
    validate_config(cfg_);
    root_ = cfg_.run_dir;
    adopt_generated_inputs();
    load_manifest();
  }

  const RunConfig& config() const { return cfg_; }
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path(const std::string& rel) const { return root_ / rel; }

  // generate-synthetic: writes corpus, kb and split under run_dir/input and
  // points the config at them.
  void generate_synthetic() {
    SynSpec spec = cfg_.synthetic;
    spec.seed = cfg_.seed;
    spec.split = cfg_.split;
    const auto data = generate(spec);
    const auto dir = root_ / "input";
    save_corpus(data.corpus, dir / "corpus.jsonl");
    save_kb(data.kb, dir / "entities.tsv", dir / "types.txt");
    write_file_atomic(dir / "split.tsv", format_split(data.kb));
    cfg_.corpus = (dir / "corpus.jsonl").string();
    cfg_.kb_entities = (dir / "entities.tsv").string();
    cfg_.kb_types = (dir / "types.txt").string();
    cfg_.kb_split = (dir / "split.tsv").string();
    record("generate-synthetic", {}, {"input/corpus.jsonl", "input/entities.tsv", "input/types.txt", "input/split.tsv"});
    say("generate-synthetic", std::to_string(data.corpus.size()) + " sentences, " +
                                  std::to_string(data.kb.num_entities()) + " entities");
  }

  void preprocess() {
    require_input(cfg_.corpus, "corpus");
    const auto corpus = load_corpus(cfg_.corpus);
    AnnotatedCorpus out;
    for (const auto& s : corpus) {
      if (auto p = preprocess_sentence(s)) out.push_back(std::move(*p));
    }
    save_corpus(out, path("corpus/preprocessed.jsonl"));
    record("preprocess", {cfg_.corpus}, {"corpus/preprocessed.jsonl"});
    say("preprocess", std::to_string(out.size()) + " of " + std::to_string(corpus.size()) + " sentences kept");
  }

  void split() {
    const auto kb = knowledge_base();
    write_file_atomic(path("kb/split.tsv"), format_split(kb));
    record("split", kb_inputs(), {"kb/split.tsv"});
  }

  void rewrite() {
    const auto kb = knowledge_base();
    const auto corpus = preprocessed();
    std::unordered_set<std::string> test_entities;
    for (EntityIndex e : kb.entities_in(Split::kTest)) test_entities.insert(kb.entity(e).id);
    write_file_atomic(path("corpus/entity_ids.txt"),
                      format_token_stream(rewrite_corpus(corpus, kb, RewriteMode::kEntityId)));
    write_file_atomic(path("corpus/units.txt"),
                      format_token_stream(rewrite_corpus(corpus, kb, RewriteMode::kNotableType, test_entities)));
    record("rewrite", with_kb({path("corpus/preprocessed.jsonl").string()}),
           {"corpus/entity_ids.txt", "corpus/units.txt"});
  }

  void embed() {
    require_artifact("corpus/entity_ids.txt", "rewrite");
    require_artifact("corpus/units.txt", "rewrite");
    SkipgramConfig sg;
    sg.window = cfg_.window;
    sg.negatives = cfg_.negatives;
    sg.epochs = cfg_.embed_epochs;
    sg.min_count = cfg_.min_count;
    sg.learning_rate = static_cast<float>(cfg_.embed_learning_rate);
    sg.subsample = cfg_.subsample;
    sg.workers = cfg_.workers;
    sg.deterministic = cfg_.deterministic;

    sg.dim = cfg_.entity_dim;
    sg.seed = cfg_.seed;
    const auto entities = train_skipgram(load_token_stream(path("corpus/entity_ids.txt")), sg);
    save_table(entities, path("embeddings/entities.vec"));
    sg.dim = cfg_.unit_dim;
    sg.seed = cfg_.seed + 1;
    const auto units = train_skipgram(load_token_stream(path("corpus/units.txt")), sg);
    save_table(units, path("embeddings/units.vec"));
    record("embed", {path("corpus/entity_ids.txt").string(), path("corpus/units.txt").string()},
           {"embeddings/entities.vec", "embeddings/units.vec"});
    say("embed", std::to_string(entities.size()) + " entity rows, " + std::to_string(units.size()) + " unit rows");
  }

  void build_dataset() {
    const auto kb = knowledge_base();
    const auto corpus = preprocessed();
    const std::size_t w = cfg_.built_window();
    const auto train = build_distant_dataset(corpus, kb, Split::kTrain, w, w);
    const auto dev = build_distant_dataset(corpus, kb, Split::kDev, w, w);
    const auto test = build_distant_dataset(corpus, kb, Split::kTest, w, w);
    Rng rng(cfg_.seed);
    const auto sampled = sample_train_contexts(train, kb, cfg_.sampling, rng.fork(1).next());
    const auto dev_s = sample_eval_contexts(dev, cfg_.dev_contexts_per_entity, rng.fork(2).next());
    const auto test_s = sample_eval_contexts(test, cfg_.test_contexts_per_entity, rng.fork(3).next());
    write_file_atomic(path("datasets/train.jsonl"), format_context_dataset(sampled.examples, kb));
    write_file_atomic(path("datasets/dev.jsonl"), format_context_dataset(dev_s, kb));
    write_file_atomic(path("datasets/test.jsonl"), format_context_dataset(test_s, kb));
    nlohmann::json rep;
    rep["window"] = w;
    for (TypeId t = 0; t < kb.num_types(); ++t) {
      const auto& r = sampled.per_type[t];
      rep["train_per_type"][kb.types().name(t)] = {
          {"train_entities", r.train_entities}, {"pool", r.pool}, {"quota", r.quota}, {"kept", r.kept}};
    }
    rep["dev_contexts"] = dev_s.size();
    rep["test_contexts"] = test_s.size();
    write_file_atomic(path("datasets/sampling.json"), rep.dump(2) + "\n");
    record("build-dataset", with_kb({path("corpus/preprocessed.jsonl").string()}),
           {"datasets/train.jsonl", "datasets/dev.jsonl", "datasets/test.jsonl", "datasets/sampling.json"});
    say("build-dataset", std::to_string(sampled.examples.size()) + " train, " + std::to_string(dev_s.size()) +
                             " dev, " + std::to_string(test_s.size()) + " test contexts");
  }

  void train_gm() {
    const auto kb = knowledge_base();
    require_artifact("embeddings/entities.vec", "embed");
    const auto table = load_table(path("embeddings/entities.vec"));
    const auto train_set = global_examples(table, kb, kb.entities_in(Split::kTrain));
    const auto dev_set = global_examples(table, kb, kb.entities_in(Split::kDev));
    if (train_set.empty() || dev_set.empty()) {
      throw ValidationError("no train or dev entity has an embedding; cannot train the global model");
    }
    auto tc = cfg_.gm.train;
    tc.seed = cfg_.seed;
    const auto result = train(train_set, dev_set, cfg_.gm.hidden, tc);
    save_checkpoint(result.model, path("models/gm.json"));
    record("train-gm", with_kb({path("embeddings/entities.vec").string()}), {"models/gm.json"});
    say("train-gm", "best epoch " + std::to_string(result.best_epoch) + " of " + std::to_string(result.epochs_run));
  }

  Mlp train_cm_model(std::size_t k, std::size_t l, TrainResult* info = nullptr) {
    const auto kb = knowledge_base();
    require_artifact("embeddings/units.vec", "embed");
    require_artifact("datasets/train.jsonl", "build-dataset");
    require_artifact("datasets/dev.jsonl", "build-dataset");
    const auto units = load_table(path("embeddings/units.vec"));
    const auto train_ctx = load_context_dataset(path("datasets/train.jsonl"), kb);
    const auto dev_ctx = load_context_dataset(path("datasets/dev.jsonl"), kb);
    if (train_ctx.empty() || dev_ctx.empty()) throw ValidationError("empty context dataset");
    const auto train_set = featurize(train_ctx, kb, units, k, l, cfg_.workers);
    const auto dev_set = featurize(dev_ctx, kb, units, k, l, cfg_.workers);
    auto tc = cfg_.cm.train;
    tc.seed = cfg_.seed + 1;
    auto result = train(train_set, dev_set, cfg_.cm.hidden, tc);
    if (info) *info = result;
    return result.model;
  }

  void train_cm() {
    TrainResult info;
    const Mlp model = train_cm_model(cfg_.k, cfg_.l, &info);
    save_checkpoint(model, path("models/cm.json"));
    record("train-cm",
           with_kb({path("embeddings/units.vec").string(), path("datasets/train.jsonl").string(),
                    path("datasets/dev.jsonl").string()}),
           {"models/cm.json"});
    say("train-cm", "best epoch " + std::to_string(info.best_epoch) + " of " + std::to_string(info.epochs_run));
  }

  void score(Provenance model) {
    const auto kb = knowledge_base();
    std::vector<std::string> inputs = kb_inputs();
    for (const Split s : {Split::kDev, Split::kTest}) {
      const auto entities = kb.entities_in(s);
      ScoreMatrix m;
      switch (model) {
        case Provenance::kGM: {
          require_artifact("models/gm.json", "train gm");
          const auto table = load_table(path("embeddings/entities.vec"));
          m = score_gm(table, load_checkpoint(path("models/gm.json")), kb, entities);
          inputs.push_back(path("models/gm.json").string());
          break;
        }
        case Provenance::kCM: {
          require_artifact("models/cm.json", "train cm");
          m = score_cm_split(load_checkpoint(path("models/cm.json")), kb, s, cfg_.k, cfg_.l);
          inputs.push_back(path("models/cm.json").string());
          break;
        }
        case Provenance::kJM: {
          const auto gm = load_scores_for(kb, Provenance::kGM, s);
          const auto cm = load_scores_for(kb, Provenance::kCM, s);
          auto joint = score_jm(gm, cm);
          if (!joint.gm_only.empty() || !joint.cm_only.empty()) {
            say("score-jm", std::string(split_name(s)) + ": " + std::to_string(joint.gm_only.size()) +
                                " entities fell back to the global score, " + std::to_string(joint.cm_only.size()) +
                                " to the context score");
          }
          m = std::move(joint.scores);
          inputs.push_back(score_path(Provenance::kGM, s).string());
          inputs.push_back(score_path(Provenance::kCM, s).string());
          break;
        }
        case Provenance::kMFT:
          m = score_mft(kb, entities);
          break;
      }
      save_scores(m, score_path(model, s));
    }
    record("score-" + std::string(provenance_name(model)), inputs,
           {rel_score(model, Split::kDev), rel_score(model, Split::kTest)});
  }

  EvalReport evaluate(Provenance model) {
    const auto kb = knowledge_base();
    const auto dev = load_scores_for(kb, model, Split::kDev);
    const auto test = load_scores_for(kb, model, Split::kTest);
    check_disjoint(dev.entities(), test.entities());
    const auto dev_rows = scored_rows(dev);
    if (dev_rows.empty()) throw ValidationError("no dev entity has a score row");
    const auto thresholds = select_thresholds(dev, gold_from_kb(dev, kb), dev_rows);
    SliceInputs slices;
    slices.entity_frequency = count_mentions(preprocessed());
    slices.type_train_count = kb.train_type_counts();
    slices.config = cfg_.slices;
    auto report = slice_report(test, gold_from_kb(test, kb), thresholds, slices);
    report.config = config_json(cfg_, false);
    const std::string rel = "reports/" + std::string(provenance_name(model)) + ".json";
    write_file_atomic(path(rel), report_to_json(report).dump(2) + "\n");
    record("evaluate-" + std::string(provenance_name(model)),
           with_kb({score_path(model, Split::kDev).string(), score_path(model, Split::kTest).string()}), {rel});
    say("evaluate", std::string(provenance_name(model)) + " P@1=" + format_real(report.p_at_1) +
                        " micro=" + format_real(report.micro_f1));
    return report;
  }

  struct SweepRow {
    std::size_t k;
    double micro_f1;
    double p_at_1;
  };

  // Trains one context model per k on the stored datasets (truncating the
  // window) and reports test micro F1 and P@1.
  std::vector<SweepRow> sweep_context(const std::vector<std::size_t>& k_values) {
    if (k_values.empty()) throw ValidationError("no k values to sweep");
    const auto kb = knowledge_base();
    const std::size_t built = stored_window();
    std::vector<SweepRow> rows;
    std::string tsv = "2k\tmicro_f1\tp_at_1\n";
    for (std::size_t k : k_values) {
      if (k > built || cfg_.l > built) {
        throw ValidationError("k=" + std::to_string(k) + " exceeds the built context window " + std::to_string(built));
      }
      const Mlp model = train_cm_model(k, cfg_.l);
      const auto dev = score_cm_split(model, kb, Split::kDev, k, cfg_.l);
      const auto test = score_cm_split(model, kb, Split::kTest, k, cfg_.l);
      const auto dev_rows = scored_rows(dev);
      const auto test_rows = scored_rows(test);
      const auto thresholds = select_thresholds(dev, gold_from_kb(dev, kb), dev_rows);
      const auto gold = gold_from_kb(test, kb);
      const auto m = classify_and_score(test, thresholds.value, gold, test_rows);
      const double p1 = precision_at_1(test, gold, test_rows);
      rows.push_back({k, m.micro_f1, p1});
      tsv += std::to_string(2 * k) + "\t" + format_real(m.micro_f1) + "\t" + format_real(p1) + "\n";
      say("sweep-context", "2k=" + std::to_string(2 * k) + " micro=" + format_real(m.micro_f1));
    }
    write_file_atomic(path("reports/sweep_context.tsv"), tsv);
    record("sweep-context", with_kb({path("datasets/train.jsonl").string()}), {"reports/sweep_context.tsv"});
    return rows;
  }

  // Every stage in order, for all four models.
  void run_all() {
    preprocess();
    rewrite();
    embed();
    build_dataset();
    train_gm();
    train_cm();
    for (auto m : {Provenance::kGM, Provenance::kCM, Provenance::kJM, Provenance::kMFT}) score(m);
    for (auto m : {Provenance::kGM, Provenance::kCM, Provenance::kJM, Provenance::kMFT}) evaluate(m);
  }

  // Loaded once per call; immutable afterwards.
  KnowledgeBase knowledge_base() const {
    require_input(cfg_.kb_entities, "kb.entities");
    require_input(cfg_.kb_types, "kb.types");
    KnowledgeBase kb = load_kb(cfg_.kb_entities, cfg_.kb_types);
    if (!cfg_.kb_split.empty()) {
      require_input(cfg_.kb_split, "kb.split");
      load_split(kb, cfg_.kb_split);
      return kb;
    }
    return split_entities(std::move(kb), cfg_.split, cfg_.seed);
  }

  std::filesystem::path score_path(Provenance m, Split s) const { return path(rel_score(m, s)); }

 private:
  static std::string rel_score(Provenance m, Split s) {
    return "scores/" + std::string(provenance_name(m)) + "." + std::string(split_name(s)) + ".tsv";
  }

  std::size_t stored_window() const {
    require_artifact("datasets/sampling.json", "build-dataset");
    return nlohmann::json::parse(read_file(path("datasets/sampling.json"))).at("window").get<std::size_t>();
  }

  ScoreMatrix score_cm_split(const Mlp& model, const KnowledgeBase& kb, Split s, std::size_t k, std::size_t l) {
    require_artifact("embeddings/units.vec", "embed");
    const std::string file = s == Split::kDev ? "datasets/dev.jsonl" : "datasets/test.jsonl";
    require_artifact(file, "build-dataset");
    const auto units = load_table(path("embeddings/units.vec"));
    const auto contexts = load_context_dataset(path(file), kb);
    return score_cm(model, units, kb, contexts, kb.entities_in(s), k, l, parse_summary(cfg_.summary),
                    cfg_.workers);
  }

  ScoreMatrix load_scores_for(const KnowledgeBase& kb, Provenance m, Split s) const {
    const auto p = score_path(m, s);
    if (!std::filesystem::exists(p)) {
      throw ValidationError("missing artifact " + p.string() + " (run: score " + std::string(provenance_name(m)) + ")");
    }
    return load_scores(p, m, kb.types(), entity_ids(kb, kb.entities_in(s)));
  }

  AnnotatedCorpus preprocessed() const {
    require_artifact("corpus/preprocessed.jsonl", "preprocess");
    return load_corpus(path("corpus/preprocessed.jsonl"));
  }

  static void require_input(const std::string& p, const std::string& key) {
    if (p.empty()) throw ValidationError("config key " + key + " is not set");
    if (!std::filesystem::exists(p)) throw ValidationError("missing input " + p + " (" + key + ")");
  }

  void require_artifact(const std::string& rel, const std::string& producer) const {
    if (!std::filesystem::exists(path(rel))) {
      throw ValidationError("missing artifact " + path(rel).string() + " (run: " + producer + ")");
    }
  }

  std::vector<std::string> kb_inputs() const {
    std::vector<std::string> v{cfg_.kb_entities, cfg_.kb_types};
    if (!cfg_.kb_split.empty()) v.push_back(cfg_.kb_split);
    return v;
  }

  std::vector<std::string> with_kb(std::vector<std::string> v) const {
    for (auto& p : kb_inputs()) v.push_back(p);
    return v;
  }

  void say(const std::string& stage, const std::string& msg) const {
    if (log_) *log_ << "[" << stage << "] " << msg << "\n";
  }

  // Inputs written by generate-synthetic are used when the config names none.
  void adopt_generated_inputs() {
    const auto dir = root_ / "input";
    auto adopt = [&](std::string& key, const char* file) {
      if (key.empty() && std::filesystem::exists(dir / file)) key = (dir / file).string();
    };
    adopt(cfg_.corpus, "corpus.jsonl");
    adopt(cfg_.kb_entities, "entities.tsv");
    adopt(cfg_.kb_types, "types.txt");
    adopt(cfg_.kb_split, "split.tsv");
  }

  void load_manifest() {
    const auto p = root_ / "manifest.json";
    const std::string hash = config_hash(cfg_);
    if (std::filesystem::exists(p)) {
      manifest_ = nlohmann::json::parse(read_file(p));
      const auto old = manifest_.value("config_hash", std::string());
      if (old != hash && !config_rebind_allowed(old)) {
        throw ValidationError("run directory " + root_.string() + " was created with a different config (hash " +
                              old + ", now " + hash + ")");
      }
    } else {
      manifest_ = nlohmann::json::object();
    }
    manifest_["config_hash"] = hash;
    manifest_["version"] = std::string(kToolVersion);
    manifest_["config"] = config_json(cfg_);
  }

  // generate-synthetic fills in the input paths, which changes the hash;
  // accept a manifest whose recorded config differs only in those keys.
  bool config_rebind_allowed(const std::string&) const {
    if (!manifest_.contains("config")) return false;
    auto recorded = manifest_["config"];
    auto now = config_json(cfg_);
    for (const char* key : {"corpus", "kb.entities", "kb.types", "kb.split"}) {
      recorded.erase(key);
      now.erase(key);
    }
    if (cfg_.deterministic) {
      recorded.erase("workers");
      now.erase("workers");
    }
    return recorded == now;
  }

  void record(const std::string& stage, const std::vector<std::string>& inputs,
              const std::vector<std::string>& outputs) {
    nlohmann::json entry;
    entry["inputs"] = nlohmann::json::object();
    for (const auto& in : inputs) {
      if (!in.empty() && std::filesystem::exists(in)) entry["inputs"][in] = hash_file(in);
    }
    entry["outputs"] = nlohmann::json::object();
    for (const auto& out : outputs) entry["outputs"][out] = hash_file(path(out));
    manifest_["stages"][stage] = entry;
    manifest_["config_hash"] = config_hash(cfg_);
    manifest_["config"] = config_json(cfg_);
    write_file_atomic(root_ / "manifest.json", manifest_.dump(2) + "\n");
  }

  RunConfig cfg_;
  std::ostream* log_;
  std::filesystem::path root_;
  nlohmann::json manifest_;
};

}  // namespace corptype

#endif  // CORPTYPE_PIPELINE_HPP
