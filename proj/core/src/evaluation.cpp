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

#include "hlmtc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "hlmtc/error.hpp"

namespace hlmtc {
namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string round_trip(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? fixed(*v) : "-"; }

void write_header(std::ostream& out, std::size_t depth) {
  out << "row";
  for (std::size_t n = 1; n <= depth; ++n) out << "\tL" << n;
  out << "\tMicro\tMacro\n";
}

}  // namespace

std::vector<std::size_t> rank_labels(std::span<const double> scores,
                                     std::span<const std::size_t> tie_keys) {
  if (!tie_keys.empty() && tie_keys.size() != scores.size()) {
    fail(Errc::kShapeMismatch, "tie keys do not match the score vector");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return tie_keys.empty() ? a < b : tie_keys[a] < tie_keys[b];
  });
  return order;
}

double r_precision(std::span<const double> scores, std::span<const std::size_t> gold,
                   std::span<const std::size_t> tie_keys) {
  if (gold.empty()) fail(Errc::kInvalidArgument, "r_precision needs at least one gold label");
  std::vector<char> is_gold(scores.size(), 0);
  for (std::size_t g : gold) {
    if (g >= scores.size()) {
      fail(Errc::kInvalidArgument, "gold position " + std::to_string(g) +
                                       " outside a label space of " +
                                       std::to_string(scores.size()));
    }
    if (is_gold[g]) fail(Errc::kInvalidArgument, "gold position repeated");
    is_gold[g] = 1;
  }
  for (double s : scores) {
    if (!std::isfinite(s)) fail(Errc::kNonFinite, "r_precision: non-finite score");
  }
  const auto order = rank_labels(scores, tie_keys);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < gold.size(); ++k) hits += static_cast<std::size_t>(is_gold[order[k]]);
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

std::vector<std::size_t> label_id_ranks(const Hierarchy& hierarchy) {
  const std::size_t n = hierarchy.total_count();
  std::vector<std::size_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) {
    return hierarchy.label_at(a) < hierarchy.label_at(b);
  });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[by_id[r]] = r;
  return rank;
}

EvalReport per_level_eval(std::span<const PredictionRecord> predictions,
                          std::span<const LabelSet> gold, const Hierarchy& hierarchy) {
  if (predictions.size() != gold.size()) {
    fail(Errc::kShapeMismatch, std::to_string(predictions.size()) + " predictions for " +
                                   std::to_string(gold.size()) + " gold sets");
  }
  const auto depth = static_cast<std::size_t>(hierarchy.depth());
  const std::size_t total = hierarchy.total_count();
  const auto tie_keys = label_id_ranks(hierarchy);

  EvalReport report;
  report.documents = predictions.size();
  std::vector<double> level_sums(depth, 0.0);
  report.level_documents.assign(depth, 0);
  std::vector<std::vector<char>> seen(depth);
  for (std::size_t n = 0; n < depth; ++n) seen[n].assign(hierarchy.level_size(static_cast<int>(n + 1)), 0);
  double micro_sum = 0.0;

  std::vector<std::vector<std::size_t>> level_gold(depth);
  std::vector<std::size_t> flat_gold;
  for (std::size_t d = 0; d < predictions.size(); ++d) {
    const auto& scores = predictions[d].scores;
    if (scores.size() != total) {
      fail(Errc::kShapeMismatch, "document '" + predictions[d].doc_id + "' has " +
                                     std::to_string(scores.size()) + " scores for " +
                                     std::to_string(total) + " labels");
    }
    for (auto& g : level_gold) g.clear();
    flat_gold.clear();
    for (const LabelId& label : gold[d]) {
      const std::size_t g = hierarchy.global_index(label);
      const auto [level, local] = hierarchy.level_position(g);
      level_gold[static_cast<std::size_t>(level - 1)].push_back(local);
      flat_gold.push_back(g);
    }
    if (flat_gold.empty()) continue;
    micro_sum += r_precision(scores, flat_gold, tie_keys);
    ++report.micro_documents;

    for (std::size_t n = 0; n < depth; ++n) {
      if (level_gold[n].empty()) continue;
      const std::size_t offset = hierarchy.level_offset(static_cast<int>(n + 1));
      const std::size_t size = seen[n].size();
      const std::span<const double> slice(scores.data() + offset, size);
      level_sums[n] += r_precision(slice, level_gold[n],
                                   std::span<const std::size_t>(tie_keys.data() + offset, size));
      ++report.level_documents[n];
      for (std::size_t local : level_gold[n]) seen[n][local] = 1;
    }
  }

  double macro_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t n = 0; n < depth; ++n) {
    report.observed_labels.push_back(
        static_cast<std::size_t>(std::count(seen[n].begin(), seen[n].end(), 1)));
    if (report.level_documents[n] == 0) {
      report.levels.emplace_back();
      continue;
    }
    const double v = level_sums[n] / static_cast<double>(report.level_documents[n]);
    report.levels.emplace_back(v);
    macro_sum += v;
    ++present;
  }
  if (report.micro_documents > 0) {
    report.micro = micro_sum / static_cast<double>(report.micro_documents);
  }
  if (present > 0) report.macro = macro_sum / static_cast<double>(present);
  return report;
}

namespace {

std::optional<Stat> stat_of(std::span<const EvalReport> reports,
                            std::optional<double> EvalReport::*member) {
  const bool present = (reports.front().*member).has_value();
  for (const auto& r : reports) {
    if ((r.*member).has_value() != present) {
      fail(Errc::kIncongruent, "reports disagree on which cells are present");
    }
  }
  if (!present) return std::nullopt;
  std::vector<double> xs;
  for (const auto& r : reports) xs.push_back(*(r.*member));
  Stat s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

}  // namespace

AggregateReport aggregate_runs(std::span<const EvalReport> reports) {
  if (reports.empty()) fail(Errc::kInvalidArgument, "aggregate_runs needs at least one report");
  const std::size_t depth = reports.front().levels.size();
  for (const auto& r : reports) {
    if (r.levels.size() != depth) {
      fail(Errc::kIncongruent, "reports cover different numbers of levels");
    }
  }
  AggregateReport out;
  out.runs = reports.size();
  for (std::size_t n = 0; n < depth; ++n) {
    const bool present = reports.front().levels[n].has_value();
    std::vector<EvalReport> column;
    for (const auto& r : reports) {
      if (r.levels[n].has_value() != present) {
        fail(Errc::kIncongruent, "reports disagree on level " + std::to_string(n + 1));
      }
      EvalReport single;
      single.micro = r.levels[n];
      column.push_back(std::move(single));
    }
    out.levels.push_back(stat_of(column, &EvalReport::micro));
  }
  out.micro = stat_of(reports, &EvalReport::micro);
  out.macro = stat_of(reports, &EvalReport::macro);
  return out;
}

void write_predictions(std::ostream& out, std::span<const PredictionRecord> predictions,
                       const Hierarchy& hierarchy) {
  out << "# hlmtc-predictions v1\ndoc_id\tlabel_id\tscore\n";
  for (const auto& p : predictions) {
    if (p.scores.size() != hierarchy.total_count()) {
      fail(Errc::kShapeMismatch, "document '" + p.doc_id + "' has the wrong score count");
    }
    for (std::size_t g = 0; g < p.scores.size(); ++g) {
      out << p.doc_id << '\t' << hierarchy.label_at(g) << '\t' << round_trip(p.scores[g]) << '\n';
    }
  }
}

void write_report(std::ostream& out, const EvalReport& report, const Hierarchy& hierarchy) {
  const std::size_t depth = report.levels.size();
  if (depth != static_cast<std::size_t>(hierarchy.depth())) {
    fail(Errc::kShapeMismatch, "report depth does not match the hierarchy");
  }
  write_header(out, depth);
  out << "#Labels (hierarchy)";
  for (std::size_t n = 1; n <= depth; ++n) out << '\t' << hierarchy.level_size(static_cast<int>(n));
  out << '\t' << hierarchy.total_count() << "\t-\n";

  std::size_t observed_total = 0;
  out << "#Labels (observed)";
  for (std::size_t c : report.observed_labels) {
    out << '\t' << c;
    observed_total += c;
  }
  out << '\t' << observed_total << "\t-\n";

  out << "#Documents";
  for (std::size_t c : report.level_documents) out << '\t' << c;
  out << '\t' << report.micro_documents << "\t-\n";

  out << "R-Precision";
  for (const auto& v : report.levels) out << '\t' << cell(v);
  out << '\t' << cell(report.micro) << '\t' << cell(report.macro) << '\n';
}

void write_aggregate_report(std::ostream& out, const AggregateReport& report) {
  write_header(out, report.levels.size());
  auto row = [&](const char* name, double Stat::*field) {
    out << name;
    auto put = [&](const std::optional<Stat>& s) {
      out << '\t' << (s ? fixed((*s).*field) : std::string("-"));
    };
    for (const auto& s : report.levels) put(s);
    put(report.micro);
    put(report.macro);
    out << '\n';
  };
  out << "#Runs";
  for (std::size_t n = 0; n < report.levels.size() + 2; ++n) out << '\t' << report.runs;
  out << '\n';
  row("R-Precision mean", &Stat::mean);
  row("R-Precision std", &Stat::std);
}

}  // namespace hlmtc
