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

#include "hlmtc/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hlmtc/error.hpp"
#include "hlmtc/rng.hpp"
#include "hlmtc/special_tokens.hpp"
#include "text_util.hpp"

namespace hlmtc {
namespace detail {
extern const std::string_view kDefaultStopwordText;
}  // namespace detail

namespace {

constexpr std::string_view kVocabVersion = "# hlmtc-vocab v1";
constexpr std::string_view kVocabColumns = "token\tfrequency";
constexpr std::string_view kAnnotationVersion = "# hlmtc-annotations v1";
constexpr int kCorpusVersion = 1;

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u) != 0;
}

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

StopwordSet parse_stopwords(std::istream& in) {
  StopwordSet out;
  std::string line;
  while (std::getline(in, line)) {
    const auto word = text::trim(line);
    if (word.empty() || word.front() == '#') continue;
    out.insert(lower_ascii(word));
  }
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::kIo, "cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIo, "cannot open " + std::string(what) + " '" + path.string() + "'");
  return in;
}

void check_version_line(std::istream& in, std::string_view expected,
                        const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || text::strip_cr(line) != expected) {
    fail(Errc::kFormat, source + ": expected version line '" + std::string(expected) + "'");
  }
}

}  // namespace

const StopwordSet& default_stopwords() {
  static const StopwordSet words = [] {
    std::istringstream in{std::string(detail::kDefaultStopwordText)};
    return parse_stopwords(in);
  }();
  return words;
}

StopwordSet load_stopwords(const std::filesystem::path& path) {
  auto in = open_in(path, "stopword list");
  return parse_stopwords(in);
}

std::vector<std::string> normalize(std::string_view text, const StopwordSet& stopwords) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view raw = text.substr(i, j - i);
    i = j;
    while (!raw.empty() && is_ascii_punct(raw.front())) raw.remove_prefix(1);
    while (!raw.empty() && is_ascii_punct(raw.back())) raw.remove_suffix(1);
    if (raw.empty()) continue;
    if (std::all_of(raw.begin(), raw.end(),
                    [](char c) { return is_ascii_digit(c) || is_ascii_punct(c); })) {
      continue;
    }
    std::string token = lower_ascii(raw);
    if (stopwords.contains(token)) continue;
    out.push_back(std::move(token));
  }
  return out;
}

Vocabulary::Vocabulary() {
  entries_ = {{std::string(kPadToken), 0},
              {std::string(kUnkToken), 0},
              {std::string(kClsToken), 0},
              {std::string(kSepToken), 0}};
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    index_.emplace(entries_[i].token, static_cast<std::int32_t>(i));
  }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& documents,
                             std::size_t min_frequency, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : documents) {
    for (const auto& token : doc) ++counts[token];
  }
  std::vector<Entry> ranked;
  for (const auto& [token, count] : counts) {
    if (count >= min_frequency) ranked.push_back({token, count});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Entry& a, const Entry& b) {
    return a.frequency > b.frequency;
  });
  Vocabulary vocab;
  std::vector<Entry> entries = vocab.entries_;
  for (auto& e : ranked) {
    if (max_size != 0 && entries.size() >= max_size) break;
    if (vocab.index_.contains(e.token)) continue;  // a literal "[CLS]" in text
    entries.push_back(std::move(e));
  }
  return from_entries(std::move(entries));
}

Vocabulary Vocabulary::from_entries(std::vector<Entry> entries) {
  Vocabulary vocab;
  const std::vector<Entry> specials = vocab.entries_;
  if (entries.size() < specials.size()) {
    fail(Errc::kFormat, "vocabulary lacks the special tokens");
  }
  for (std::size_t i = 0; i < specials.size(); ++i) {
    if (entries[i].token != specials[i].token) {
      fail(Errc::kFormat, "vocabulary entry " + std::to_string(i) + " must be " +
                              specials[i].token);
    }
  }
  vocab.index_.clear();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!vocab.index_.emplace(entries[i].token, static_cast<std::int32_t>(i)).second) {
      fail(Errc::kDuplicateId, "vocabulary token '" + entries[i].token + "' repeated");
    }
  }
  vocab.entries_ = std::move(entries);
  return vocab;
}

std::optional<std::int32_t> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
    fail(Errc::kOutOfRange, "token id " + std::to_string(id) + " outside vocabulary of " +
                                std::to_string(entries_.size()));
  }
  return entries_[static_cast<std::size_t>(id)].token;
}

Vocabulary parse_vocabulary(std::istream& in, const std::string& source) {
  check_version_line(in, kVocabVersion, source);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || text::strip_cr(line) != kVocabColumns) {
    fail(Errc::kFormat, source + ":2: expected column header");
  }
  ++line_no;
  std::vector<Vocabulary::Entry> entries;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = text::strip_cr(line);
    if (row.empty()) continue;
    const auto fields = text::split(row, '\t');
    if (fields.size() != 2 || fields[0].empty()) {
      fail(Errc::kParse, source + ":" + std::to_string(line_no) + ": expected token and frequency");
    }
    std::size_t freq = 0;
    try {
      std::size_t used = 0;
      freq = std::stoull(std::string(fields[1]), &used);
      if (used != fields[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(Errc::kParse, source + ":" + std::to_string(line_no) + ": bad frequency");
    }
    entries.push_back({std::string(fields[0]), freq});
  }
  return Vocabulary::from_entries(std::move(entries));
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  auto in = open_in(path, "vocabulary");
  return parse_vocabulary(in, path.string());
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  out << kVocabVersion << '\n' << kVocabColumns << '\n';
  for (const auto& e : vocab.entries()) out << e.token << '\t' << e.frequency << '\n';
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto out = open_out(path);
  write_vocabulary(out, vocab);
}

std::vector<std::int32_t> word_pieces(std::string_view word, const Vocabulary& vocab) {
  std::vector<std::int32_t> pieces;
  std::size_t start = 0;
  std::string candidate;
  while (start < word.size()) {
    std::optional<std::int32_t> match;
    std::size_t end = word.size();
    for (; end > start; --end) {
      candidate.clear();
      if (start > 0) candidate = kContinuationPrefix;
      candidate.append(word.substr(start, end - start));
      match = vocab.find(candidate);
      if (match) break;
    }
    if (!match) return {};
    pieces.push_back(*match);
    start = end;
  }
  return pieces;
}

std::vector<std::int32_t> tokenize(const std::vector<std::string>& tokens,
                                   const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) fail(Errc::kInvalidArgument, "max_len must be positive");
  std::vector<std::int32_t> ids{kClsId};
  for (const auto& token : tokens) {
    if (ids.size() >= max_len) break;
    if (const auto id = vocab.find(token)) {
      ids.push_back(*id);
      continue;
    }
    const auto pieces = word_pieces(token, vocab);
    if (pieces.empty()) {
      ids.push_back(kUnkId);
    } else {
      ids.insert(ids.end(), pieces.begin(), pieces.end());
    }
  }
  if (ids.size() > max_len) ids.resize(max_len);
  return ids;
}

std::vector<std::vector<std::int32_t>> pad_batch(
    std::vector<std::vector<std::int32_t>> batch) {
  std::size_t longest = 0;
  for (const auto& seq : batch) longest = std::max(longest, seq.size());
  for (auto& seq : batch) seq.resize(longest, kPadId);
  return batch;
}

std::vector<Document> parse_corpus(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) fail(Errc::kFormat, source + ": empty corpus file");
  try {
    const auto header = nlohmann::json::parse(text::strip_cr(line));
    if (header.value("format", "") != "hlmtc-corpus" ||
        header.value("version", 0) != kCorpusVersion) {
      fail(Errc::kFormat, source + ": not an hlmtc-corpus v1 file");
    }
  } catch (const nlohmann::json::exception&) {
    fail(Errc::kFormat, source + ": first line is not a corpus header");
  }
  std::vector<Document> docs;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = text::strip_cr(line);
    if (text::trim(row).empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    Document doc;
    try {
      const auto j = nlohmann::json::parse(row);
      j.at("id").get_to(doc.id);
      j.at("text").get_to(doc.text);
      j.at("labels").get_to(doc.labels);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::kParse, where + ": " + e.what());
    }
    if (doc.id.empty()) fail(Errc::kParse, where + ": empty document id");
    if (!seen.insert(doc.id).second) {
      fail(Errc::kDuplicateId, where + ": document id '" + doc.id + "' repeated");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  auto in = open_in(path, "corpus");
  return parse_corpus(in, path.string());
}

void write_corpus(std::ostream& out, const std::vector<Document>& docs) {
  out << nlohmann::json{{"format", "hlmtc-corpus"}, {"version", kCorpusVersion}}.dump()
      << '\n';
  for (const auto& d : docs) {
    out << nlohmann::json{{"id", d.id}, {"text", d.text}, {"labels", d.labels}}.dump()
        << '\n';
  }
}

void save_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
  auto out = open_out(path);
  write_corpus(out, docs);
}

LabelSet project_labels(const std::vector<LabelId>& raw, const Hierarchy& full,
                        const Hierarchy& target, const std::string& doc_id) {
  LabelSet out;
  for (const auto& label : raw) {
    if (target.contains(label)) {
      out.insert(label);
    } else if (!full.contains(label)) {
      fail(Errc::kUnknownLabel, "document '" + doc_id + "': unknown label '" + label + "'");
    }
  }
  return out;
}

Targets build_targets(const LabelSet& raw, const Hierarchy& hierarchy) {
  Targets t;
  t.augmented = hierarchy.augment(raw);
  t.flat = Tensor({1, hierarchy.total_count()}, 0.0);
  for (int n = 1; n <= hierarchy.depth(); ++n) {
    t.levels.emplace_back(Shape{1, hierarchy.level_size(n)}, 0.0);
  }
  for (const auto& label : t.augmented) {
    const std::size_t g = hierarchy.global_index(label);
    const auto [level, local] = hierarchy.level_position(g);
    t.levels[static_cast<std::size_t>(level - 1)].data()[local] = 1.0;
    t.flat.data()[g] = 1.0;
  }
  return t;
}

std::vector<Example> prepare_examples(const std::vector<Document>& docs,
                                      const Hierarchy& full, const Hierarchy& hierarchy,
                                      const Vocabulary& vocab,
                                      const PreprocessOptions& options) {
  std::vector<Example> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    Example ex;
    ex.id = doc.id;
    ex.tokens = tokenize(normalize(doc.text, options.stopwords), vocab,
                         options.max_sequence_length);
    ex.targets = build_targets(project_labels(doc.labels, full, hierarchy, doc.id), hierarchy);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Annotation> parse_annotations(std::istream& in, const std::string& source) {
  std::vector<Annotation> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (text::strip_cr(line) != kAnnotationVersion) {
    fail(Errc::kFormat, source + ": expected version line '" +
                            std::string(kAnnotationVersion) + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = text::strip_cr(line);
    if (row.empty() || row.front() == '#') continue;
    const auto tab = row.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      fail(Errc::kParse, source + ":" + std::to_string(line_no) +
                             ": expected 'doc_id<TAB>labels'");
    }
    Annotation a;
    a.doc_id = std::string(row.substr(0, tab));
    const auto labels = row.substr(tab + 1);
    if (!labels.empty()) {
      for (auto l : text::split(labels, ',')) {
        if (!l.empty()) a.labels.emplace_back(l);
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

void write_annotations(std::ostream& out, const std::vector<Annotation>& records) {
  out << kAnnotationVersion << '\n';
  for (const auto& r : records) {
    out << r.doc_id << '\t';
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      if (i) out << ',';
      out << r.labels[i];
    }
    out << '\n';
  }
}

std::vector<Annotation> augment_annotations(const std::vector<Annotation>& records,
                                            const Hierarchy& hierarchy) {
  std::vector<Annotation> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    for (const auto& l : r.labels) {
      if (!hierarchy.contains(l)) {
        fail(Errc::kUnknownLabel, "document '" + r.doc_id + "': unknown label '" + l + "'");
      }
    }
    const LabelSet closed = hierarchy.augment(LabelSet(r.labels.begin(), r.labels.end()));
    out.push_back({r.doc_id, std::vector<LabelId>(closed.begin(), closed.end())});
  }
  return out;
}

// Synthetic corpus ---------------------------------------------------------

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

// Pronounceable, purely alphabetic word for `n`: `prefix` followed by
// three consonant-vowel syllables (70^3 distinct values).
std::string pseudo_word(std::string_view prefix, std::size_t n) {
  const std::size_t base = kConsonants.size() * kVowels.size();
  std::string out(prefix);
  for (int k = 0; k < 3; ++k) {
    const std::size_t s = n % base;
    n /= base;
    out += kConsonants[s / kVowels.size()];
    out += kVowels[s % kVowels.size()];
  }
  return out;
}

std::size_t pow_size(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

std::string label_id(int level, std::size_t index, std::size_t level_size) {
  std::string digits = std::to_string(index);
  const std::size_t width = std::to_string(level_size - 1).size();
  digits.insert(0, width - digits.size(), '0');
  return "s" + std::to_string(level) + "." + digits;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto bad = [](const std::string& msg) { fail(Errc::kInvalidArgument, msg); };
  if (depth < 2) bad("synthetic depth must be at least 2");
  if (branching < 2) bad("synthetic branching must be at least 2");
  if (documents == 0) bad("synthetic corpus needs at least one document");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) bad("noise rate must lie in [0, 1)");
  if (signature_tokens < 1) bad("each label needs at least one signature token");
  std::size_t labels = 0;
  for (int n = 1; n <= depth; ++n) labels += pow_size(static_cast<std::size_t>(branching), n);
  const std::size_t signature_total = labels * static_cast<std::size_t>(signature_tokens);
  if (signature_total > 70 * 70 * 70) bad("hierarchy too large for the pseudo-word space");
  if (vocabulary_size - std::min(vocabulary_size, signature_total) > 70 * 70 * 70) {
    bad("vocabulary size exceeds the pseudo-word space");
  }
  if (vocabulary_size <= signature_total) {
    bad("vocabulary size " + std::to_string(vocabulary_size) +
        " leaves no noise tokens after " + std::to_string(signature_total) +
        " signature tokens");
  }
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto b = static_cast<std::size_t>(spec.branching);

  std::vector<LabelNode> nodes;
  for (int n = 1; n <= spec.depth; ++n) {
    const std::size_t size = pow_size(b, n);
    const std::size_t parent_size = size / b;
    for (std::size_t j = 0; j < size; ++j) {
      LabelNode node;
      node.id = label_id(n, j, size);
      node.name = "synthetic level " + std::to_string(n) + " node " + std::to_string(j);
      node.level = n;
      if (n > 1) node.parents = {label_id(n - 1, j / b, parent_size)};
      nodes.push_back(std::move(node));
    }
  }

  SyntheticCorpus corpus;
  corpus.hierarchy = Hierarchy::from_nodes(std::move(nodes));
  const Hierarchy& h = corpus.hierarchy;
  const auto k = static_cast<std::size_t>(spec.signature_tokens);

  for (std::size_t g = 0; g < h.total_count(); ++g) {
    std::vector<std::string> sig;
    for (std::size_t t = 0; t < k; ++t) sig.push_back(pseudo_word("qu", g * k + t));
    corpus.signatures.push_back(std::move(sig));
  }
  const std::size_t noise_size = spec.vocabulary_size - h.total_count() * k;

  const auto& leaves = h.labels_at_level(h.depth());
  Rng rng(derive_seed(spec.seed, "synthetic-docs"));
  const std::uint64_t split_seed = derive_seed(spec.seed, "synthetic-split");
  const std::size_t id_width = std::to_string(spec.documents - 1).size();

  for (std::size_t d = 0; d < spec.documents; ++d) {
    const std::size_t label_count = 1 + rng.below(3);
    std::vector<LabelId> chosen;
    while (chosen.size() < std::min(label_count, leaves.size())) {
      const auto& leaf = leaves[rng.below(leaves.size())];
      if (std::find(chosen.begin(), chosen.end(), leaf) == chosen.end()) chosen.push_back(leaf);
    }
    std::sort(chosen.begin(), chosen.end());

    std::vector<std::string> words;
    for (const auto& label : h.augment(LabelSet(chosen.begin(), chosen.end()))) {
      const auto& sig = corpus.signatures[h.global_index(label)];
      const std::size_t emit = std::min<std::size_t>(1 + rng.below(2), sig.size());
      const std::size_t first = rng.below(sig.size());
      for (std::size_t e = 0; e < emit; ++e) words.push_back(sig[(first + e) % sig.size()]);
    }
    const auto noise = static_cast<std::size_t>(std::llround(
        static_cast<double>(words.size()) * spec.noise_rate / (1.0 - spec.noise_rate)));
    for (std::size_t e = 0; e < noise; ++e) {
      words.push_back(pseudo_word("x", rng.below(noise_size)));
    }
    rng.shuffle(words.begin(), words.end());

    Document doc;
    std::string num = std::to_string(d);
    num.insert(0, id_width - num.size(), '0');
    doc.id = "doc-" + num;
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (w) doc.text += ' ';
      doc.text += words[w];
    }
    doc.labels = std::move(chosen);

    const std::uint64_t bucket = splitmix64(split_seed + d) % 10;
    if (bucket < 8) {
      corpus.train.push_back(std::move(doc));
    } else if (bucket == 8) {
      corpus.dev.push_back(std::move(doc));
    } else {
      corpus.test.push_back(std::move(doc));
    }
  }
  return corpus;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpus& corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Errc::kIo, "cannot create '" + dir.string() + "': " + ec.message());
  save_hierarchy(dir / "hierarchy.tsv", corpus.hierarchy);
  save_corpus(dir / "train.jsonl", corpus.train);
  save_corpus(dir / "dev.jsonl", corpus.dev);
  save_corpus(dir / "test.jsonl", corpus.test);
}

}  // namespace hlmtc
