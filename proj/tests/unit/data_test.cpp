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

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "hlmtc/data.hpp"
#include "hlmtc/error.hpp"
#include "hlmtc/evaluation.hpp"
#include "hlmtc/special_tokens.hpp"
#include "test_support.hpp"

namespace hlmtc {
namespace {

using testing::fixture;
using Tokens = std::vector<std::string>;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Vocabulary vocab_of(std::initializer_list<const char*> tokens) {
  std::vector<Vocabulary::Entry> entries{{std::string(kPadToken), 0},
                                         {std::string(kUnkToken), 0},
                                         {std::string(kClsToken), 0},
                                         {std::string(kSepToken), 0}};
  for (const char* t : tokens) entries.push_back({t, 1});
  return Vocabulary::from_entries(entries);
}

TEST(Normalize, DropsNumbersPunctuationAndStopwords) {
  const StopwordSet stop{"the"};
  EXPECT_EQ(normalize("The Council adopted Regulation 1234.", stop),
            (Tokens{"council", "adopted", "regulation"}));
  EXPECT_TRUE(normalize("", stop).empty());
  EXPECT_TRUE(normalize("...!!!", stop).empty());
  EXPECT_TRUE(normalize("12.5 -3 (2020)", stop).empty());
}

TEST(Normalize, KeepsInnerPunctuationAndMixedTokens) {
  EXPECT_EQ(normalize("  Covid-19\tX-ray's\n(alpha) ", {}),
            (Tokens{"covid-19", "x-ray's", "alpha"}));
}

TEST(Normalize, DefaultStopwordsAreEnglish) {
  const StopwordSet& stop = default_stopwords();
  for (const char* w : {"the", "and", "of", "is", "a"}) EXPECT_TRUE(stop.contains(w)) << w;
  EXPECT_FALSE(stop.contains("grape"));
  EXPECT_EQ(normalize("the grape of the vine", stop), (Tokens{"grape", "vine"}));
}

TEST(Normalize, StopwordFileIsLowercased) {
  const auto path = testing::scratch_dir("stopwords") / "stop.txt";
  std::ofstream(path) << "# custom\nFoo\n\nbar\n";
  EXPECT_EQ(load_stopwords(path), (StopwordSet{"bar", "foo"}));
}

TEST(Vocabulary, SpecialsFirstThenFrequencyThenLexicographic) {
  const Vocabulary v = Vocabulary::build({{"b", "a", "c", "b"}, {"c", "d"}});
  const auto& e = v.entries();
  ASSERT_EQ(v.size(), 8u);
  EXPECT_EQ(e[kPadId].token, kPadToken);
  EXPECT_EQ(e[kUnkId].token, kUnkToken);
  EXPECT_EQ(e[kClsId].token, kClsToken);
  EXPECT_EQ(e[kSepId].token, kSepToken);
  EXPECT_EQ(e[4].token, "b");
  EXPECT_EQ(e[5].token, "c");
  EXPECT_EQ(e[6].token, "a");
  EXPECT_EQ(e[7].token, "d");
  EXPECT_EQ(*v.find("c"), 5);
  EXPECT_FALSE(v.find("zzz").has_value());
}

TEST(Vocabulary, FrequencyCutoffAndCap) {
  const std::vector<Tokens> docs{{"x", "x", "y", "z", "z", "z"}};
  EXPECT_EQ(Vocabulary::build(docs, 2).size(), 6u);
  EXPECT_EQ(Vocabulary::build(docs, 1, 5).size(), 5u);
  EXPECT_EQ(Vocabulary::build(docs, 1, 5).token(4), "z");
}

TEST(Vocabulary, FileRoundTrip) {
  const Vocabulary v = Vocabulary::build({{"alpha", "beta", "beta", "##ta"}});
  std::stringstream buf;
  write_vocabulary(buf, v);
  EXPECT_EQ(parse_vocabulary(buf), v);
}

TEST(Vocabulary, RejectsMissingSpecials) {
  EXPECT_THROW(Vocabulary::from_entries({{"a", 1}}), Error);
}

TEST(Tokenize, KnownTokensGetClsPrefix) {
  const Vocabulary v = vocab_of({"council", "adopted"});
  EXPECT_EQ(tokenize({"council", "adopted"}, v, 16),
            (std::vector<std::int32_t>{kClsId, 4, 5}));
}

TEST(Tokenize, TruncatesKeepingFirstTokens) {
  const Vocabulary v = vocab_of({"a", "b", "c"});
  EXPECT_EQ(tokenize({"a", "b", "c", "a", "b"}, v, 3), (std::vector<std::int32_t>{kClsId, 4, 5}));
}

TEST(Tokenize, WordPieceFallbackSplitsAtelectasis) {
  const Vocabulary v = vocab_of({"ate", "##lect", "##asis", "at"});
  const auto pieces = word_pieces("atelectasis", v);
  EXPECT_EQ(pieces, (std::vector<std::int32_t>{4, 5, 6}));
  EXPECT_EQ(tokenize({"atelectasis"}, v, 16), (std::vector<std::int32_t>{kClsId, 4, 5, 6}));
}

TEST(Tokenize, UnsplittableWordBecomesUnk) {
  const Vocabulary v = vocab_of({"ate"});
  EXPECT_TRUE(word_pieces("atelectasis", v).empty());
  EXPECT_EQ(tokenize({"atelectasis"}, v, 16), (std::vector<std::int32_t>{kClsId, kUnkId}));
}

TEST(Tokenize, PadBatchRightPads) {
  const auto padded = pad_batch({{kClsId, 4}, {kClsId, 4, 5, 6}});
  EXPECT_EQ(padded[0], (std::vector<std::int32_t>{kClsId, 4, kPadId, kPadId}));
  EXPECT_EQ(padded[1].size(), 4u);
}

TEST(Targets, GrapeHasOneLabelPerLevel) {
  const Hierarchy h = load_hierarchy(fixture("eurovoc_sample.tsv"));
  const Targets t = build_targets({"grape"}, h);
  ASSERT_EQ(t.levels.size(), 4u);
  for (const Tensor& level : t.levels) {
    double ones = 0.0;
    for (double x : level.data()) ones += x;
    EXPECT_EQ(ones, 1.0);
  }
  EXPECT_EQ(t.levels[3].at(0, 1), 1.0);  // "grape" sorts after "citrus-fruit"
  EXPECT_EQ(t.augmented, h.augment({"grape"}));
}

TEST(Targets, FlatIsConcatenationOfLevels) {
  const Hierarchy h = load_hierarchy(fixture("eurovoc_sample.tsv"));
  const Targets t = build_targets({"grape-juice", "marketing"}, h);
  std::vector<double> concat;
  for (const Tensor& level : t.levels) concat.insert(concat.end(), level.data().begin(), level.data().end());
  EXPECT_EQ(t.flat.values(), concat);
  for (std::size_t g = 0; g < h.total_count(); ++g) {
    EXPECT_EQ(t.flat[g] == 1.0, t.augmented.contains(h.label_at(g)));
  }
}

TEST(Targets, EmptyAndClosedSets) {
  const Hierarchy h = load_hierarchy(fixture("eurovoc_sample.tsv"));
  const Targets empty = build_targets({}, h);
  for (double x : empty.flat.data()) EXPECT_EQ(x, 0.0);
  const LabelSet closed = h.augment({"leaf-vegetable"});
  EXPECT_EQ(build_targets(closed, h).flat, build_targets({"leaf-vegetable"}, h).flat);
  EXPECT_THROW(build_targets({"kiwi"}, h), Error);
}

TEST(Targets, ProjectionDropsLabelsOfRemovedLevels) {
  const Hierarchy full = load_hierarchy(fixture("eurovoc_sample.tsv"));
  const Hierarchy cut = full.truncate(1, 0);
  EXPECT_EQ(project_labels({"trade", "fruit"}, full, cut, "d"), (LabelSet{"fruit"}));
  try {
    project_labels({"kiwi"}, full, cut, "doc-9");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownLabel);
    EXPECT_NE(std::string(e.what()).find("doc-9"), std::string::npos);
  }
}

TEST(Corpus, RoundTripAndDuplicateIds) {
  const std::vector<Document> docs{{"d1", "Some \"quoted\" text\nwith newline", {"a", "b"}},
                                   {"d2", "", {}}};
  std::stringstream buf;
  write_corpus(buf, docs);
  EXPECT_EQ(buf.str().substr(0, buf.str().find('\n')),
            R"({"format":"hlmtc-corpus","version":1})");
  EXPECT_EQ(parse_corpus(buf), docs);
  std::stringstream dup;
  write_corpus(dup, {docs[0], docs[0]});
  try {
    parse_corpus(dup);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDuplicateId);
  }
}

TEST(Corpus, RejectsMissingHeader) {
  std::istringstream in(R"({"id":"d1","labels":[],"text":"x"})" "\n");
  EXPECT_THROW(parse_corpus(in), Error);
}

TEST(Annotations, AugmentFixture) {
  const Hierarchy h = load_hierarchy(fixture("eurovoc_sample.tsv"));
  std::ifstream in(fixture("annotations_grape.tsv"));
  const auto records = augment_annotations(parse_annotations(in), h);
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[0].doc_id, "doc-1");
  EXPECT_EQ(LabelSet(records[0].labels.begin(), records[0].labels.end()), h.augment({"grape"}));
  EXPECT_EQ(records[1].labels.size(), 6u);
  EXPECT_TRUE(records[2].labels.empty());
  std::stringstream out;
  write_annotations(out, records);
  EXPECT_EQ(parse_annotations(out), records);
}

TEST(Annotations, UnknownLabelNamesDocument) {
  const Hierarchy h = load_hierarchy(fixture("eurovoc_sample.tsv"));
  std::ifstream in(fixture("annotations_unknown.tsv"));
  try {
    augment_annotations(parse_annotations(in), h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownLabel);
    EXPECT_NE(std::string(e.what()).find("doc-bad"), std::string::npos);
  }
}

TEST(Annotations, EmptyFileParsesToNothing) {
  std::ifstream in(fixture("annotations_empty.tsv"));
  EXPECT_TRUE(parse_annotations(in).empty());
}

TEST(Synthetic, DefaultSpecHas126Labels) {
  const SyntheticCorpus c = generate_synthetic(SyntheticSpec{});
  EXPECT_EQ(c.hierarchy.depth(), 6);
  EXPECT_EQ(c.hierarchy.total_count(), 2u + 4 + 8 + 16 + 32 + 64);
  EXPECT_EQ(c.train.size() + c.dev.size() + c.test.size(), 2000u);
  EXPECT_GT(c.train.size(), 1500u);
  EXPECT_GT(c.dev.size(), 150u);
  EXPECT_GT(c.test.size(), 150u);
}

TEST(Synthetic, LabelsAreLeavesAndSignaturesDisjoint) {
  SyntheticSpec spec;
  spec.documents = 200;
  const SyntheticCorpus c = generate_synthetic(spec);
  std::set<std::string> seen;
  for (const auto& sig : c.signatures) {
    EXPECT_EQ(sig.size(), 3u);
    for (const auto& t : sig) EXPECT_TRUE(seen.insert(t).second) << t;
  }
  for (const Document& d : c.train) {
    EXPECT_GE(d.labels.size(), 1u);
    EXPECT_LE(d.labels.size(), 3u);
    for (const LabelId& l : d.labels) EXPECT_EQ(c.hierarchy.node(l).level, 6);
  }
}

TEST(Synthetic, ZeroNoiseUsesOnlySignatureTokens) {
  SyntheticSpec spec;
  spec.documents = 150;
  spec.noise_rate = 0.0;
  const SyntheticCorpus c = generate_synthetic(spec);
  std::set<std::string> sig;
  for (const auto& s : c.signatures) sig.insert(s.begin(), s.end());
  for (const auto* split : {&c.train, &c.dev, &c.test}) {
    for (const Document& d : *split) {
      std::istringstream words(d.text);
      std::string w;
      while (words >> w) EXPECT_TRUE(sig.contains(w)) << w;
    }
  }
}

TEST(Synthetic, SameSeedGivesIdenticalFiles) {
  SyntheticSpec spec;
  spec.documents = 100;
  spec.seed = 7;
  const auto a = testing::scratch_dir("synthetic_a");
  const auto b = testing::scratch_dir("synthetic_b");
  write_synthetic(a, generate_synthetic(spec));
  write_synthetic(b, generate_synthetic(spec));
  for (const char* f : {"hierarchy.tsv", "train.jsonl", "dev.jsonl", "test.jsonl"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(load_hierarchy(a / "hierarchy.tsv"), generate_synthetic(spec).hierarchy);
  spec.seed = 8;
  EXPECT_NE(generate_synthetic(spec).train, generate_synthetic(SyntheticSpec{}).train);
}

TEST(Synthetic, InvalidSpecsThrow) {
  SyntheticSpec spec;
  spec.depth = 1;
  EXPECT_THROW(spec.validate(), Error);
  spec = SyntheticSpec{};
  spec.branching = 1;
  EXPECT_THROW(spec.validate(), Error);
  spec = SyntheticSpec{};
  spec.noise_rate = 1.0;
  EXPECT_THROW(spec.validate(), Error);
  spec = SyntheticSpec{};
  spec.vocabulary_size = 10;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(Synthetic, BagOfSignaturesOracleIsPerfectWithoutNoise) {
  SyntheticSpec spec;
  spec.documents = 200;
  spec.noise_rate = 0.0;
  const SyntheticCorpus c = generate_synthetic(spec);
  const Hierarchy& h = c.hierarchy;
  std::map<std::string, std::size_t> owner;
  for (std::size_t g = 0; g < c.signatures.size(); ++g) {
    for (const auto& t : c.signatures[g]) owner[t] = g;
  }
  std::vector<PredictionRecord> preds;
  std::vector<LabelSet> gold;
  for (const Document& d : c.test) {
    std::vector<double> scores(h.total_count(), 0.0);
    std::istringstream words(d.text);
    std::string w;
    while (words >> w) scores[owner.at(w)] += 1.0;
    preds.push_back({d.id, scores});
    gold.push_back(h.augment(LabelSet(d.labels.begin(), d.labels.end())));
  }
  const EvalReport r = per_level_eval(preds, gold, h);
  for (const auto& level : r.levels) EXPECT_EQ(*level, 1.0);
  EXPECT_EQ(*r.micro, 1.0);
}

TEST(Preprocess, ExamplesRespectMaxLength) {
  SyntheticSpec spec;
  spec.documents = 60;
  const auto data = testing::synthetic_examples(spec, 12);
  for (const Example& e : data.train) {
    EXPECT_LE(e.tokens.size(), 12u);
    EXPECT_EQ(e.tokens.front(), kClsId);
  }
}

}  // namespace
}  // namespace hlmtc
