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

// corptype: command-line driver for the corpus-level entity typing pipeline.
//
// Exit status: 0 success, 2 validation failure, 1 runtime error.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "corptype/pipeline.hpp"

using namespace corptype;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<int> workers;
  std::string run_dir;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Flat key = value config file");
  cmd->add_option("--set", o.overrides, "Override a config key (key=value); repeatable");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_flag("--deterministic", o.deterministic, "Reproducible single-writer mode");
  cmd->add_option("--workers", o.workers, "Worker threads");
  cmd->add_option("--run-dir", o.run_dir, "Run directory");
  cmd->add_flag("-q,--quiet", o.quiet, "No progress output");
}

// Config file first, then --set, then dedicated flags.
RunConfig resolve_config(const CommonOptions& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) {
    if (!std::filesystem::exists(o.config_path)) throw ValidationError("missing config file " + o.config_path);
    apply_config_text(cfg, read_file(o.config_path), o.config_path);
  }
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got " + kv);
    set_config_value(cfg, std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.deterministic) cfg.deterministic = true;
  if (o.workers) cfg.workers = *o.workers;
  if (!o.run_dir.empty()) cfg.run_dir = o.run_dir;
  return cfg;
}

std::vector<Provenance> models_from(const std::string& name) {
  if (name == "all") return {Provenance::kGM, Provenance::kCM, Provenance::kJM, Provenance::kMFT};
  return {parse_provenance(name)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus-level fine-grained entity typing"};
  app.require_subcommand(1);
  CommonOptions o;

  auto* preprocess = app.add_subcommand("preprocess", "Normalize the corpus (numbers, links, short sentences)");
  std::string raw_input, raw_output;
  preprocess->add_option("--raw-input", raw_input, "Plain text, one line per document line; bypasses the run dir");
  preprocess->add_option("--output", raw_output, "JSONL output for --raw-input");
  auto* split_cmd = app.add_subcommand("split", "Write the train/dev/test entity split");
  auto* rewrite = app.add_subcommand("rewrite", "Write entity-id and notable-type token streams");
  auto* embed = app.add_subcommand("embed", "Train entity and word/type embeddings");
  auto* build = app.add_subcommand("build-dataset", "Extract and sample distant-supervision contexts");
  auto* train_cmd = app.add_subcommand("train", "Train the global (gm) or context (cm) model");
  std::string train_model;
  train_cmd->add_option("model", train_model, "gm or cm")->required()->check(CLI::IsMember({"gm", "cm"}));
  auto* score = app.add_subcommand("score", "Score dev and test entities");
  std::string score_model;
  score->add_option("model", score_model, "gm, cm, jm, mft or all")
      ->required()
      ->check(CLI::IsMember({"gm", "cm", "jm", "mft", "all"}));
  auto* evaluate = app.add_subcommand("evaluate", "Select thresholds on dev, report on test");
  std::string eval_model = "all";
  evaluate->add_option("model", eval_model, "gm, cm, jm, mft or all")
      ->check(CLI::IsMember({"gm", "cm", "jm", "mft", "all"}));
  auto* generate = app.add_subcommand("generate-synthetic", "Write a synthetic corpus and KB to run_dir/input");
  auto* sweep = app.add_subcommand("sweep-context", "Train one context model per k and tabulate");
  std::vector<std::size_t> k_values;
  sweep->add_option("--k", k_values, "k values (context size 2k)")->required()->delimiter(',');
  auto* run = app.add_subcommand("run", "Every stage from preprocess to evaluate");

  for (auto* cmd : {preprocess, split_cmd, rewrite, embed, build, train_cmd, score, evaluate, generate, sweep, run}) {
    add_common(cmd, o);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (preprocess->parsed() && !raw_input.empty()) {
      if (raw_output.empty()) throw ValidationError("--raw-input requires --output");
      if (!std::filesystem::exists(raw_input)) throw ValidationError("missing input " + raw_input);
      AnnotatedCorpus out;
      for (const auto& line : detail::read_lines(raw_input)) {
        for (auto& s : corptype::preprocess(line)) out.push_back(std::move(s));
      }
      save_corpus(out, raw_output);
      return 0;
    }

    RunConfig cfg = resolve_config(o);
    Pipeline pipeline(cfg, o.quiet ? nullptr : &std::clog);
    if (preprocess->parsed()) {
      pipeline.preprocess();
    } else if (split_cmd->parsed()) {
      pipeline.split();
    } else if (rewrite->parsed()) {
      pipeline.rewrite();
    } else if (embed->parsed()) {
      pipeline.embed();
    } else if (build->parsed()) {
      pipeline.build_dataset();
    } else if (train_cmd->parsed()) {
      if (train_model == "gm") {
        pipeline.train_gm();
      } else {
        pipeline.train_cm();
      }
    } else if (score->parsed()) {
      for (auto m : models_from(score_model)) pipeline.score(m);
    } else if (evaluate->parsed()) {
      for (auto m : models_from(eval_model)) pipeline.evaluate(m);
    } else if (generate->parsed()) {
      pipeline.generate_synthetic();
    } else if (sweep->parsed()) {
      const auto rows = pipeline.sweep_context(k_values);
      std::cout << "2k\tmicro_f1\tp_at_1\n";
      for (const auto& r : rows) {
        std::cout << 2 * r.k << '\t' << format_real(r.micro_f1) << '\t' << format_real(r.p_at_1) << '\n';
      }
    } else if (run->parsed()) {
      pipeline.run_all();
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
