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

#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hlmtc/error.hpp"
#include "hlmtc/evaluation.hpp"
#include "hlmtc/exits.hpp"
#include "hlmtc/hierarchy.hpp"
#include "hlmtc/introspection.hpp"
#include "hlmtc/model.hpp"
#include "hlmtc/training.hpp"

namespace fs = std::filesystem;

namespace hlmtc::cli {
namespace {

constexpr const char* kCheckpointFile = "checkpoint.hlmtc";

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::kIo, "cannot write '" + path.string() + "'");
  return out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::kIo, "cannot create '" + dir.string() + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

StopwordSet resolve_stopwords(const std::string& setting) {
  return setting == "default" ? default_stopwords() : load_stopwords(setting);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// The untruncated hierarchy is kept in the checkpoint so that labels of
// dropped levels can still be recognized at evaluation time.
Hierarchy source_hierarchy(const Checkpoint& cp) {
  if (!cp.meta.contains("source_hierarchy")) return cp.model.hierarchy();
  std::istringstream in(cp.meta.at("source_hierarchy").get<std::string>());
  return parse_hierarchy(in, "checkpoint#source_hierarchy");
}

RunConfig checkpoint_config(const Checkpoint& cp) {
  if (!cp.meta.contains("config")) return RunConfig{};
  return RunConfig::from_ini(cp.meta.at("config").get<std::string>());
}

std::vector<Example> examples_for(const Checkpoint& cp, const std::vector<Document>& docs) {
  PreprocessOptions pre;
  pre.stopwords = cp.stopwords;
  pre.max_sequence_length = static_cast<std::size_t>(cp.model.config().max_sequence_length);
  return prepare_examples(docs, source_hierarchy(cp), cp.model.hierarchy(), cp.vocabulary, pre);
}

}  // namespace

void run_gen_data(const GenDataOptions& options) {
  const fs::path out(options.out);
  if (fs::exists(out) && !options.force) {
    if (!fs::is_directory(out) || !fs::is_empty(out)) {
      fail(Errc::kIo, "'" + out.string() + "' already exists; pass --force to overwrite");
    }
  }
  const SyntheticCorpus corpus = generate_synthetic(options.spec);
  write_synthetic(out, corpus);
  const auto& s = options.spec;
  std::ostringstream ini;
  ini << "[synthetic]\n"
      << "seed = " << s.seed << '\n'
      << "depth = " << s.depth << '\n'
      << "branching = " << s.branching << '\n'
      << "vocabulary_size = " << s.vocabulary_size << '\n'
      << "documents = " << s.documents << '\n'
      << "noise_rate = " << g17(s.noise_rate) << '\n'
      << "signature_tokens = " << s.signature_tokens << '\n';
  write_text(out / "synthetic.ini", ini.str());
  std::cout << "wrote " << corpus.hierarchy.total_count() << " labels, " << corpus.train.size()
            << "/" << corpus.dev.size() << "/" << corpus.test.size()
            << " train/dev/test documents to " << out.string() << '\n';
}

void run_train(const TrainOptions& o) {
  RunConfig cfg;
  if (!o.config.empty()) cfg.merge_file(o.config);
  if (o.scheme) cfg.scheme = *o.scheme;
  if (o.corpus) cfg.corpus = *o.corpus;
  if (o.hierarchy) cfg.hierarchy = *o.hierarchy;
  if (o.stopwords) cfg.stopwords = *o.stopwords;
  if (o.seed) cfg.seed = *o.seed;
  if (o.learning_rate) cfg.train.learning_rate = *o.learning_rate;
  if (o.dropout) cfg.model.dropout_rate = *o.dropout;
  if (o.epochs) cfg.train.max_epochs = *o.epochs;
  if (o.patience) cfg.train.patience = *o.patience;
  if (o.threads) cfg.train.threads = *o.threads;
  if (o.jobs) cfg.grid.jobs = *o.jobs;
  if (o.drop_top) cfg.drop_top = *o.drop_top;
  if (o.drop_bottom) cfg.drop_bottom = *o.drop_bottom;
  if (o.layers) cfg.model.num_layers = *o.layers;
  if (o.hidden) cfg.model.hidden_size = *o.hidden;
  if (o.heads) cfg.model.num_heads = *o.heads;
  if (o.feed_forward) cfg.model.feed_forward_size = *o.feed_forward;
  if (o.max_length) cfg.model.max_sequence_length = *o.max_length;
  if (o.batch_size) cfg.train.batch_size = *o.batch_size;
  if (o.min_frequency) cfg.min_frequency = *o.min_frequency;
  if (o.max_vocabulary) cfg.max_vocabulary = *o.max_vocabulary;
  if (cfg.corpus.empty()) fail(Errc::kConfig, "no corpus given (--corpus or paths.corpus)");
  if (cfg.hierarchy.empty()) cfg.hierarchy = (fs::path(cfg.corpus) / "hierarchy.tsv").string();
  cfg.validate();

  const Hierarchy full = load_hierarchy(cfg.hierarchy);
  const bool truncated = cfg.drop_top > 0 || cfg.drop_bottom > 0;
  const Hierarchy hierarchy = truncated ? full.truncate(cfg.drop_top, cfg.drop_bottom) : full;
  const Wiring wiring =
      build_wiring(WiringScheme::parse(cfg.scheme), cfg.model.num_layers, hierarchy.depth());

  const StopwordSet stopwords = resolve_stopwords(cfg.stopwords);
  const auto train_docs = load_corpus(fs::path(cfg.corpus) / "train.jsonl");
  const auto dev_docs = load_corpus(fs::path(cfg.corpus) / "dev.jsonl");
  std::vector<std::vector<std::string>> normalized;
  for (const auto& d : train_docs) normalized.push_back(normalize(d.text, stopwords));
  const Vocabulary vocab = Vocabulary::build(normalized, cfg.min_frequency, cfg.max_vocabulary);

  ModelConfig mc = cfg.model;
  mc.vocabulary_size = static_cast<int>(vocab.size());
  mc.seed = cfg.seed;
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;

  PreprocessOptions pre;
  pre.stopwords = stopwords;
  pre.max_sequence_length = static_cast<std::size_t>(mc.max_sequence_length);
  const auto train_set = prepare_examples(train_docs, full, hierarchy, vocab, pre);
  const auto dev_set = prepare_examples(dev_docs, full, hierarchy, vocab, pre);

  const fs::path out(o.out);
  make_dir(out);
  write_text(out / "run.ini", cfg.to_ini());
  save_vocabulary(out / "vocab.tsv", vocab);

  TrainResult result;
  nlohmann::json summary;
  if (o.grid) {
    const fs::path logs = out / "grid_logs";
    make_dir(logs);
    std::vector<std::ofstream> sinks;
    std::size_t cells = cfg.grid.learning_rates.size() * cfg.grid.dropout_rates.size();
    for (std::size_t c = 0; c < cells; ++c) {
      sinks.push_back(open_out(logs / ("cell-" + std::to_string(c) + ".jsonl")));
    }
    GridResult grid = grid_search(mc, wiring, hierarchy, train_set, dev_set, tc, cfg.grid,
                                  [&](std::size_t c, const LossReport& r) {
                                    write_loss_record(sinks[c], r);
                                    sinks[c].flush();
                                  });
    {
      auto table = open_out(out / "grid.tsv");
      write_grid_table(table, grid);
    }
    const GridCell& sel = grid.cells[grid.selected];
    summary["grid_selected"] = {{"learning_rate", sel.learning_rate},
                                {"dropout_rate", sel.dropout_rate}};
    summary["grid_cells"] = cells;
    result = std::move(grid.best_run);
    std::cout << "grid: " << cells << " cells, selected lr=" << g17(sel.learning_rate)
              << " dropout=" << g17(sel.dropout_rate) << '\n';
  } else {
    auto log = open_out(out / "train_log.jsonl");
    result = train(Model::create(mc, wiring, hierarchy), train_set, dev_set, tc,
                   [&](const LossReport& r) {
                     write_loss_record(log, r);
                     log.flush();
                     if (r.split == "validation") {
                       std::cerr << "epoch " << r.epoch << " validation loss "
                                 << g17(r.weighted) << " (" << r.wall_seconds << " s)\n";
                     }
                   });
  }

  summary["scheme"] = cfg.scheme;
  summary["seed"] = cfg.seed;
  summary["best_epoch"] = result.best_epoch;
  summary["best_validation_loss"] = result.best_validation_loss;
  summary["epochs_run"] = result.epochs_run;
  summary["early_stopped"] = result.early_stopped;
  summary["parameter_count"] = result.best.params().element_count();

  Checkpoint cp;
  cp.vocabulary = vocab;
  cp.stopwords = stopwords;
  cp.meta = summary;
  cp.meta["config"] = cfg.to_ini();
  if (truncated) {
    std::ostringstream text;
    write_hierarchy(text, full);
    cp.meta["source_hierarchy"] = text.str();
  }
  cp.model = std::move(result.best);
  save_checkpoint(out / kCheckpointFile, cp);
  write_text(out / "summary.json", summary.dump(2) + "\n");
  std::cout << "best epoch " << summary["best_epoch"] << ", validation loss "
            << g17(summary["best_validation_loss"].get<double>()) << "; checkpoint "
            << (out / kCheckpointFile).string() << '\n';
}

void run_evaluate(const EvaluateOptions& o) {
  const Checkpoint cp = load_checkpoint(o.checkpoint);
  const auto docs = load_corpus(o.split);
  const auto examples = examples_for(cp, docs);

  std::vector<PredictionRecord> predictions;
  std::vector<LabelSet> gold;
  for (const Example& ex : examples) {
    predictions.push_back({ex.id, cp.model.flat_scores(ex.tokens)});
    gold.push_back(ex.targets.augmented);
  }
  const Hierarchy& h = cp.model.hierarchy();
  const EvalReport report = per_level_eval(predictions, gold, h);

  const fs::path out(o.out);
  make_dir(out);
  write_text(out / "run.ini", checkpoint_config(cp).to_ini());
  {
    auto f = open_out(out / "report.tsv");
    write_report(f, report, h);
  }
  {
    auto f = open_out(out / "predictions.tsv");
    write_predictions(f, predictions, h);
  }
  nlohmann::json j;
  j["checkpoint"] = fs::path(o.checkpoint).filename().string();
  j["split"] = fs::path(o.split).filename().string();
  j["documents"] = report.documents;
  j["levels"] = nlohmann::json::array();
  for (const auto& v : report.levels) j["levels"].push_back(optional_json(v));
  j["level_documents"] = report.level_documents;
  j["micro"] = optional_json(report.micro);
  j["macro"] = optional_json(report.macro);
  write_text(out / "eval.json", j.dump(2) + "\n");

  std::ostringstream table;
  write_report(table, report, h);
  std::cout << table.str();
}

void run_analyze(const AnalyzeOptions& o) {
  const Checkpoint cp = load_checkpoint(o.checkpoint);
  RunConfig cfg = checkpoint_config(cp);
  if (o.reduction) cfg.reduction = parse_reduction(*o.reduction);

  auto docs = load_corpus(o.split);
  if (o.max_documents > 0 && docs.size() > o.max_documents) docs.resize(o.max_documents);
  if (docs.empty()) fail(Errc::kEmptySplit, "no documents to analyze in '" + o.split + "'");

  auto activations_of = [&](const Checkpoint& c) {
    ActivationSnapshot snap;
    for (const Example& ex : examples_for(c, docs)) {
      snap.doc_ids.push_back(ex.id);
      snap.activations.push_back(c.model.activate(ex.tokens));
    }
    return snap;
  };

  const ActivationSnapshot snap = activations_of(cp);
  const UtilizationReport report = analyze_utilization(snap.activations, cfg.reduction);
  const fs::path out(o.out);
  emit_report(report, out);
  write_text(out / "run.ini", cfg.to_ini());
  if (o.snapshot) save_snapshot(out / "activations.hlmtc", snap);

  const auto scheme_of = [](const Checkpoint& c) {
    return WiringScheme{c.model.wiring().kind, {}}.name();
  };
  std::cout << "reduction " << reduction_name(cfg.reduction) << ", " << report.documents
            << " documents, mean off-diagonal angular distance "
            << g17(report.mean_off_diagonal_angular) << '\n';

  if (!o.compare.empty()) {
    const Checkpoint other = load_checkpoint(o.compare);
    const ActivationSnapshot other_snap = activations_of(other);
    const double other_mean =
        mean_off_diagonal(cls_distance_matrix(ClsSnapshot::from_activations(other_snap.activations)));
    auto f = open_out(out / "comparison.tsv");
    f << "# mean off-diagonal CLS angular distance on the same documents\n";
    f << "model\tscheme\tmean_off_diagonal_angular\n";
    f << "primary\t" << scheme_of(cp) << '\t' << g17(report.mean_off_diagonal_angular) << '\n';
    f << "compared\t" << scheme_of(other) << '\t' << g17(other_mean) << '\n';
    const bool exceeds = report.mean_off_diagonal_angular > other_mean;
    f << "primary_exceeds_compared\t" << (exceeds ? "yes" : "no") << "\t-\n";
    std::cout << "compared (" << scheme_of(other) << "): " << g17(other_mean)
              << "; primary exceeds compared: " << (exceeds ? "yes" : "no") << '\n';
  }
}

void run_augment(const AugmentOptions& o) {
  const Hierarchy h = load_hierarchy(o.hierarchy);
  std::ifstream in(o.labels_in, std::ios::binary);
  if (!in) fail(Errc::kIo, "cannot open '" + o.labels_in + "'");
  const bool empty_input = in.peek() == std::ifstream::traits_type::eof();
  const auto records = parse_annotations(in, o.labels_in);
  auto out = open_out(o.out);
  if (empty_input) return;
  write_annotations(out, augment_annotations(records, h));
}

}  // namespace hlmtc::cli
