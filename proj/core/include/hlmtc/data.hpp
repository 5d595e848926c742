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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hlmtc/hierarchy.hpp"
#include "hlmtc/tensor.hpp"

namespace hlmtc {

using StopwordSet = std::set<std::string, std::less<>>;

/// The English list shipped as data/stopwords_en.txt, compiled in.
const StopwordSet& default_stopwords();
/// One word per line; blank lines and `#` comments ignored. Words are
/// lowercased.
StopwordSet load_stopwords(const std::filesystem::path& path);

/// Lowercases ASCII letters, splits on whitespace, trims punctuation from
/// both ends of each token, then drops empty tokens, tokens made only of
/// digits and punctuation, and stopwords.
std::vector<std::string> normalize(std::string_view text, const StopwordSet& stopwords);

/// Marks a word piece that continues the previous piece.
inline constexpr std::string_view kContinuationPrefix = "##";

class Vocabulary {
 public:
  struct Entry {
    std::string token;
    std::size_t frequency = 0;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  /// Specials only.
  Vocabulary();

  /// Counts tokens over `documents` and keeps those seen at least
  /// `min_frequency` times, ordered by descending frequency then
  /// lexicographically. `max_size` (0 = unlimited) caps the total size,
  /// specials included.
  static Vocabulary build(const std::vector<std::vector<std::string>>& documents,
                          std::size_t min_frequency = 1, std::size_t max_size = 0);
  /// Entries must start with the four specials in id order.
  static Vocabulary from_entries(std::vector<Entry> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  std::optional<std::int32_t> find(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Format: `# hlmtc-vocab v1`, header `token<TAB>frequency`, one entry per
/// line in id order, specials first.
Vocabulary parse_vocabulary(std::istream& in, const std::string& source = "<stream>");
Vocabulary load_vocabulary(const std::filesystem::path& path);
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);

/// Greedy longest-match split into vocabulary pieces; pieces after the first
/// carry kContinuationPrefix. Empty if some position matches no piece.
std::vector<std::int32_t> word_pieces(std::string_view word, const Vocabulary& vocab);

/// [CLS] followed by the ids of `tokens` (whole word, else word pieces, else
/// [UNK]), truncated to `max_len` keeping the first ids.
std::vector<std::int32_t> tokenize(const std::vector<std::string>& tokens,
                                   const Vocabulary& vocab, std::size_t max_len);
/// Right-pads every sequence with [PAD] to the longest length in the batch.
std::vector<std::vector<std::int32_t>> pad_batch(std::vector<std::vector<std::int32_t>> batch);

struct Document {
  std::string id;
  std::string text;
  std::vector<LabelId> labels;

  friend bool operator==(const Document&, const Document&) = default;
};

/// Line-delimited JSON. First line `{"format":"hlmtc-corpus","version":1}`,
/// then one `{"id","labels","text"}` object per line. Ids must be unique.
std::vector<Document> parse_corpus(std::istream& in, const std::string& source = "<stream>");
std::vector<Document> load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const std::vector<Document>& docs);
void save_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);

/// Keeps labels present in `target`; drops labels that exist only in `full`
/// (levels removed by truncation). Throws kUnknownLabel for labels in
/// neither, naming `doc_id`.
LabelSet project_labels(const std::vector<LabelId>& raw, const Hierarchy& full,
                        const Hierarchy& target, const std::string& doc_id);

struct Targets {
  LabelSet augmented;
  /// levels[n-1] is a [1, |L_n|] binary row in canonical order.
  std::vector<Tensor> levels;
  /// [1, |L|]: the level rows concatenated in global order.
  Tensor flat;
};

/// Throws kUnknownLabel.
Targets build_targets(const LabelSet& raw, const Hierarchy& hierarchy);

struct Example {
  std::string id;
  std::vector<std::int32_t> tokens;
  Targets targets;
};

struct PreprocessOptions {
  StopwordSet stopwords = default_stopwords();
  std::size_t max_sequence_length = 128;
};

/// Normalizes, tokenizes and builds targets. `full` is the untruncated
/// hierarchy used to recognize labels on dropped levels.
std::vector<Example> prepare_examples(const std::vector<Document>& docs,
                                      const Hierarchy& full, const Hierarchy& hierarchy,
                                      const Vocabulary& vocab,
                                      const PreprocessOptions& options);

/// Annotation file for `augment`: `# hlmtc-annotations v1`, then
/// `doc_id<TAB>label[,label...]` per line.
struct Annotation {
  std::string doc_id;
  std::vector<LabelId> labels;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};
std::vector<Annotation> parse_annotations(std::istream& in,
                                          const std::string& source = "<stream>");
void write_annotations(std::ostream& out, const std::vector<Annotation>& records);
/// Ancestor-closes every record, keeping record order. Unknown labels throw
/// kUnknownLabel naming the document.
std::vector<Annotation> augment_annotations(const std::vector<Annotation>& records,
                                            const Hierarchy& hierarchy);

struct SyntheticSpec {
  int depth = 6;
  int branching = 2;
  /// Distinct word types: signature tokens plus noise tokens.
  std::size_t vocabulary_size = 1200;
  std::size_t documents = 2000;
  /// Fraction of document tokens drawn from the noise vocabulary.
  double noise_rate = 0.3;
  /// Signature tokens owned by each label.
  int signature_tokens = 3;
  std::uint64_t seed = 13;

  /// Throws kInvalidArgument.
  void validate() const;
  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct SyntheticCorpus {
  Hierarchy hierarchy;
  /// signatures[g] are the tokens of the label with global index g.
  std::vector<std::vector<std::string>> signatures;
  std::vector<Document> train;
  std::vector<Document> dev;
  std::vector<Document> test;
};

/// Balanced tree with `branching` children per node (level n has
/// branching^n labels). Each document takes 1-3 distinct leaves, emits one
/// or two signature tokens for every leaf and ancestor, adds noise tokens
/// and shuffles. Raw labels are the leaves. Split by a hash of the
/// document index: 80% train, 10% dev, 10% test.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

/// Writes hierarchy.tsv, train.jsonl, dev.jsonl and test.jsonl into `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpus& corpus);

}  // namespace hlmtc
