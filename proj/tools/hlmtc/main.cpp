// Copyright 2026 The hlmtc Authors.
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

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "hlmtc/error.hpp"
#include "hlmtc/exits.hpp"

namespace {

int report(std::string_view code, const std::string& message) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n') c = ' ';
  }
  std::cerr << "error[" << code << "]: " << line << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace hlmtc::cli;
  CLI::App app{"Hierarchical multi-label text classification with layer-wise exit heads"};
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic hierarchical corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_flag("--force", gen.force, "Overwrite an existing directory");
  gen_cmd->add_option("--seed", gen.spec.seed, "Root seed")->capture_default_str();
  gen_cmd->add_option("--depth", gen.spec.depth, "Hierarchy depth")->capture_default_str();
  gen_cmd->add_option("--branching", gen.spec.branching, "Children per node")->capture_default_str();
  gen_cmd->add_option("--vocab-size", gen.spec.vocabulary_size, "Distinct word types")
      ->capture_default_str();
  gen_cmd->add_option("--docs", gen.spec.documents, "Number of documents")->capture_default_str();
  gen_cmd->add_option("--noise", gen.spec.noise_rate, "Fraction of noise tokens")
      ->capture_default_str();
  gen_cmd->add_option("--signature-tokens", gen.spec.signature_tokens,
                      "Signature tokens per label")
      ->capture_default_str();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model (or a grid of models)");
  train_cmd->add_option("--scheme", tr.scheme,
                        "flat | last-six | one-by-one | in-pairs | hybrid | custom=<file>");
  train_cmd->add_option("--corpus", tr.corpus, "Directory with train.jsonl and dev.jsonl");
  train_cmd->add_option("--hierarchy", tr.hierarchy, "Hierarchy file (default: <corpus>/hierarchy.tsv)");
  train_cmd->add_option("--config", tr.config, "Config file");
  train_cmd->add_option("--seed", tr.seed, "Root seed");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_flag("--grid", tr.grid, "Grid-search learning rate x dropout");
  train_cmd->add_option("--jobs", tr.jobs, "Grid cells trained concurrently");
  train_cmd->add_option("--lr", tr.learning_rate, "Learning rate");
  train_cmd->add_option("--dropout", tr.dropout, "Dropout rate");
  train_cmd->add_option("--epochs", tr.epochs, "Maximum epochs");
  train_cmd->add_option("--patience", tr.patience, "Early-stopping patience");
  train_cmd->add_option("--batch-size", tr.batch_size, "Documents per batch");
  train_cmd->add_option("--threads", tr.threads, "Threads per training run");
  train_cmd->add_option("--drop-top", tr.drop_top, "Hierarchy levels removed from the top");
  train_cmd->add_option("--drop-bottom", tr.drop_bottom, "Hierarchy levels removed from the bottom");
  train_cmd->add_option("--layers", tr.layers, "Encoder layers");
  train_cmd->add_option("--hidden", tr.hidden, "Hidden size");
  train_cmd->add_option("--heads", tr.heads, "Attention heads");
  train_cmd->add_option("--ff", tr.feed_forward, "Feed-forward size");
  train_cmd->add_option("--max-len", tr.max_length, "Maximum sequence length");
  train_cmd->add_option("--min-frequency", tr.min_frequency, "Vocabulary frequency cutoff");
  train_cmd->add_option("--max-vocab", tr.max_vocabulary, "Vocabulary size cap (0 = none)");
  train_cmd->add_option("--stopwords", tr.stopwords, "Stopword file or 'default'");

  EvaluateOptions ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "R-Precision per level, micro and macro");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--corpus-split", ev.split, "Corpus file (.jsonl)")->required();
  eval_cmd->add_option("--out", ev.out, "Output directory")->required();

  AnalyzeOptions an;
  auto* analyze_cmd = app.add_subcommand("analyze", "CLS angular distances and attention statistics");
  analyze_cmd->add_option("--checkpoint", an.checkpoint, "Checkpoint file")->required();
  analyze_cmd->add_option("--corpus-split", an.split, "Corpus file (.jsonl)")->required();
  analyze_cmd->add_option("--out", an.out, "Output directory")->required();
  analyze_cmd->add_option("--reduction", an.reduction, "all-queries | cls-query");
  analyze_cmd->add_option("--compare", an.compare, "Second checkpoint for the angular comparison");
  analyze_cmd->add_option("--max-docs", an.max_documents, "Analyze at most this many documents");
  analyze_cmd->add_flag("--snapshot", an.snapshot, "Also save per-document activations");

  AugmentOptions au;
  auto* augment_cmd = app.add_subcommand("augment", "Add all ancestors to annotated label sets");
  augment_cmd->add_option("--hierarchy", au.hierarchy, "Hierarchy file")->required();
  augment_cmd->add_option("--labels-in", au.labels_in, "Annotation file")->required();
  augment_cmd->add_option("--out", au.out, "Output annotation file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("E_USAGE", e.what());
    return 2;
  }

  try {
    if (*gen_cmd) run_gen_data(gen);
    if (*train_cmd) run_train(tr);
    if (*eval_cmd) run_evaluate(ev);
    if (*analyze_cmd) run_analyze(an);
    if (*augment_cmd) run_augment(au);
  } catch (const hlmtc::Error& e) {
    const bool usage = e.code() == hlmtc::Errc::kUnsupportedScheme &&
                       std::string(e.what()).find("unknown scheme") != std::string::npos;
    report(hlmtc::errc_name(e.code()), e.what());
    return usage ? 2 : 1;
  } catch (const std::exception& e) {
    return report("E_INTERNAL", e.what());
  }
  return 0;
}
