// Copyright 2026 The LCA Toolkit Authors.
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

#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "lca/corpus.hpp"
#include "lca/error.hpp"
#include "support.hpp"

using namespace lca;
using lca::testing::TempDir;
using lca::testing::WriteText;

namespace {

TokenIndex IndexOf(const std::vector<std::pair<std::string, std::string>>& words) {
  // words: (sentence_id, surface); positions count up within a sentence.
  TokenIndex idx;
  std::map<std::string, std::uint64_t> pos;
  for (const auto& [sid, surface] : words) {
    idx.entries.push_back({sid, pos[sid]++, surface, idx.entries.size()});
  }
  return idx;
}

}  // namespace

TEST_CASE("tag file sizes match a plain line count per tag") {
  TempDir dir;
  const char* tagset[] = {"NOUN", "VERB", "ADJ", "DET"};
  std::mt19937_64 rng(10);
  std::vector<std::pair<std::string, std::string>> words;
  std::ostringstream tsv;
  for (int s = 0; s < 10; ++s) {
    const int len = 3 + static_cast<int>(rng() % 6);
    for (int p = 0; p < len; ++p) {
      const std::string sid = "sent" + std::to_string(s);
      const std::string surface = "w" + std::to_string(rng() % 20);
      words.emplace_back(sid, surface);
      tsv << sid << '\t' << p << '\t' << surface << '\t' << tagset[rng() % 4] << '\n';
    }
  }
  WriteText(dir / "pos.tsv", tsv.str());
  const TokenIndex idx = IndexOf(words);
  const Taxonomy tax = ParseTaxonomy(dir / "pos.tsv", "pos", idx);

  // Independent scan: count the last field of each line.
  std::map<std::string, std::size_t> expected;
  std::istringstream in(tsv.str());
  for (std::string line; std::getline(in, line);) {
    expected[line.substr(line.rfind('\t') + 1)]++;
  }
  REQUIRE(tax.concepts.size() == expected.size());
  for (const auto& [tag, n] : expected) CHECK(tax.concepts.at(tag).size() == n);
  CHECK(tax.num_occurrences() == idx.size());
}

TEST_CASE("tag file referencing unknown occurrences is rejected") {
  TempDir dir;
  WriteText(dir / "pos.tsv", "s1\t0\tthe\tDET\ns1\t9\tghost\tNOUN\n");
  const TokenIndex idx = IndexOf({{"s1", "the"}});
  CHECK_THROWS_AS(ParseTaxonomy(dir / "pos.tsv", "pos", idx), DataError);
}

TEST_CASE("conflicting tags for one occurrence are rejected") {
  TempDir dir;
  WriteText(dir / "pos.tsv", "s1\t0\tthe\tDET\ns1\t0\tthe\tNOUN\n");
  CHECK_THROWS_AS(ParseTaxonomy(dir / "pos.tsv", "pos", IndexOf({{"s1", "the"}})),
                  DataError);
}

TEST_CASE("missing tag file is a user error") {
  CHECK_THROWS_AS(ParseTaxonomy("/nonexistent/pos.tsv", "pos", {}), UserError);
}

TEST_CASE("boundaries: 3 utterances of 4 words") {
  TempDir dir;
  std::ostringstream tsv;
  // Written out of order on purpose.
  for (int u : {2, 0, 1}) {
    for (int w : {3, 1, 0, 2}) {
      tsv << "utt" << u << '\t' << w << "\tword" << w << '\t' << 0.5 * w << '\t'
          << 0.5 * w + 0.4 << '\n';
    }
  }
  WriteText(dir / "b.tsv", tsv.str());
  const auto b = ParseBoundaries(dir / "b.tsv");
  REQUIRE(b.size() == 12);
  std::map<std::string, int> per_utt;
  for (std::size_t i = 0; i < b.size(); ++i) {
    per_utt[b[i].utterance_id]++;
    if (i > 0 && b[i].utterance_id == b[i - 1].utterance_id) {
      CHECK(b[i].t_start > b[i - 1].t_start);
    }
  }
  CHECK(per_utt == std::map<std::string, int>{{"utt0", 4}, {"utt1", 4}, {"utt2", 4}});
  // Grouped: each utterance id forms one contiguous run.
  std::set<std::string> closed;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (i > 0 && b[i].utterance_id != b[i - 1].utterance_id) {
      closed.insert(b[i - 1].utterance_id);
    }
    CHECK_FALSE(closed.contains(b[i].utterance_id));
  }
}

TEST_CASE("overlapping or inverted boundaries are rejected") {
  TempDir dir;
  WriteText(dir / "overlap.tsv", "u\t0\ta\t0.0\t0.5\nu\t1\tb\t0.4\t0.9\n");
  CHECK_THROWS_AS(ParseBoundaries(dir / "overlap.tsv"), DataError);
  WriteText(dir / "inverted.tsv", "u\t0\ta\t0.5\t0.1\n");
  CHECK_THROWS_AS(ParseBoundaries(dir / "inverted.tsv"), DataError);
}

TEST_CASE("polarity: good fun / bad fun") {
  const TokenIndex idx = IndexOf({{"s1", "good"}, {"s1", "fun"}, {"s2", "bad"}, {"s2", "fun"}});
  const Taxonomy tax = BuildPolarityConcepts(
      {{"s1", Polarity::kPositive}, {"s2", Polarity::kNegative}}, idx);
  CHECK(tax.name == kPolarityTaxonomy);
  REQUIRE(tax.concepts.size() == 2);
  const auto& pos = tax.concepts.at(kPositiveTag);
  const auto& neg = tax.concepts.at(kNegativeTag);
  REQUIRE(pos.size() == 1);
  REQUIRE(neg.size() == 1);
  CHECK(pos[0].surface == "good");
  CHECK(pos[0].sentence_id == "s1");
  CHECK(neg[0].surface == "bad");
}

TEST_CASE("polarity exclusivity ignores ASCII case") {
  const TokenIndex idx = IndexOf({{"s1", "Fun"}, {"s1", "good"}, {"s2", "fun"}});
  const Taxonomy tax = BuildPolarityConcepts(
      {{"s1", Polarity::kPositive}, {"s2", Polarity::kNegative}}, idx);
  CHECK(tax.concepts.size() == 1);
  CHECK(tax.concepts.at(kPositiveTag).size() == 1);
}

TEST_CASE("polarity with no exclusive vocabulary is an error") {
  const TokenIndex idx = IndexOf({{"s1", "fun"}, {"s2", "fun"}});
  CHECK_THROWS_AS(BuildPolarityConcepts(
                      {{"s1", Polarity::kPositive}, {"s2", Polarity::kNegative}}, idx),
                  DataError);
}

TEST_CASE("property: polarity concepts never share a surface form") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const int sentences = 1 + static_cast<int>(rng() % 12);
    const int vocab = 1 + static_cast<int>(rng() % 15);
    std::vector<std::pair<std::string, std::string>> words;
    std::vector<SentenceLabel> labels;
    std::map<std::string, Polarity> label_of;
    for (int s = 0; s < sentences; ++s) {
      const std::string sid = "s" + std::to_string(s);
      const Polarity p = rng() % 2 ? Polarity::kPositive : Polarity::kNegative;
      labels.push_back({sid, p});
      label_of[sid] = p;
      const int len = 1 + static_cast<int>(rng() % 8);
      for (int w = 0; w < len; ++w) {
        std::string surface = "v" + std::to_string(rng() % vocab);
        if (rng() % 3 == 0) surface[0] = 'V';
        words.emplace_back(sid, surface);
      }
    }
    const TokenIndex idx = IndexOf(words);
    Taxonomy tax;
    try {
      tax = BuildPolarityConcepts(labels, idx);
    } catch (const DataError&) {
      continue;  // every form appeared under both labels
    }
    std::set<std::string> pos_forms, neg_forms;
    if (tax.concepts.contains(kPositiveTag)) {
      for (const auto& o : tax.concepts.at(kPositiveTag)) {
        pos_forms.insert(AsciiLower(o.surface));
        REQUIRE(label_of[o.sentence_id] == Polarity::kPositive);
      }
    }
    if (tax.concepts.contains(kNegativeTag)) {
      for (const auto& o : tax.concepts.at(kNegativeTag)) {
        neg_forms.insert(AsciiLower(o.surface));
        REQUIRE(label_of[o.sentence_id] == Polarity::kNegative);
      }
    }
    for (const auto& f : pos_forms) REQUIRE_FALSE(neg_forms.contains(f));
  }
}

TEST_CASE("label file parsing") {
  TempDir dir;
  WriteText(dir / "labels.tsv", "s1\tpositive\ns2\tnegative\n");
  const auto labels = ParseLabels(dir / "labels.tsv");
  REQUIRE(labels.size() == 2);
  CHECK(labels[1].label == Polarity::kNegative);
  WriteText(dir / "bad.tsv", "s1\tmaybe\n");
  CHECK_THROWS_AS(ParseLabels(dir / "bad.tsv"), DataError);
}
