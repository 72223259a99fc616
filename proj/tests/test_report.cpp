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

#include <json.hpp>

#include "lca/report.hpp"
#include "support.hpp"

using namespace lca;
using lca::testing::ReadText;
using lca::testing::TempDir;

namespace {

AlignmentRecord Record(std::uint32_t layer, const std::string& taxonomy, double a, double c) {
  AlignmentRecord r;
  r.layer = layer;
  r.model_id = "hubert";
  r.taxonomy = taxonomy;
  r.alignment_term = a;
  r.coverage_term = c;
  r.lambda = 50.0 * (a + c);
  r.num_encoded = 4;
  r.num_linguistic = 2;
  return r;
}

std::size_t Count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("13 layers and 4 taxonomies give 4 curves of 13 points") {
  TempDir dir;
  std::vector<AlignmentRecord> records;
  for (const char* tax : {"pos", "sem", "ner", "phone"}) {
    for (std::uint32_t l = 0; l < 13; ++l) records.push_back(Record(l, tax, 0.25, 0.5));
  }
  const ReportFiles files = EmitAlignmentReport(records, dir.path());
  REQUIRE(files.curves.size() == 4);
  for (const auto& f : files.curves) {
    CHECK(ValidateCurveJson(f).empty());
    const auto j = nlohmann::json::parse(ReadText(f));
    CHECK(j["points"].size() == 13);
    CHECK(j["value_kind"] == "lambda");
    CHECK(j["points"][12][0] == 12);
    CHECK(j["points"][12][1] == 37.5);
  }
  CHECK(ValidateAlignmentCsv(files.csv).empty());
  CHECK(Count(ReadText(files.csv), "\n") == 53);
}

TEST_CASE("polarity runs add a curve per polarity tag") {
  TempDir dir;
  std::vector<AlignmentRecord> records;
  for (std::uint32_t l = 0; l < 3; ++l) {
    AlignmentRecord r = Record(l, kPolarityTaxonomy, 0.5, 1.0);
    r.per_tag = {{kPositiveTag, 10, true, 2}, {kNegativeTag, 10, true, l % 2}};
    records.push_back(r);
  }
  const ReportFiles files = EmitAlignmentReport(records, dir.path());
  REQUIRE(files.curves.size() == 3);
  std::map<std::string, nlohmann::json> by_tag;
  for (const auto& f : files.curves) {
    CHECK(ValidateCurveJson(f).empty());
    const auto j = nlohmann::json::parse(ReadText(f));
    by_tag[j.value("tag", "")] = j;
  }
  CHECK(by_tag.at("")["value_kind"] == "lambda");
  CHECK(by_tag.at("+ve")["value_kind"] == "alignment_term");
  CHECK(by_tag.at("+ve")["points"][0][1] == 0.5);
  CHECK(by_tag.at("-ve")["points"][1][1] == 0.25);
}

TEST_CASE("planted records give an all-100 curve") {
  TempDir dir;
  std::vector<AlignmentRecord> records;
  for (std::uint32_t l = 0; l < 5; ++l) records.push_back(Record(l, "planted", 1.0, 1.0));
  const ReportFiles files = EmitAlignmentReport(records, dir.path());
  const auto j = nlohmann::json::parse(ReadText(files.curves.at(0)));
  for (const auto& p : j["points"]) CHECK(p[1] == 100.0);
}

TEST_CASE("report output is byte-identical for identical input") {
  TempDir a, b;
  std::vector<AlignmentRecord> records = {Record(1, "pos", 0.5, 0.5), Record(0, "pos", 0.1, 0.2)};
  const ReportFiles fa = EmitAlignmentReport(records, a.path());
  const ReportFiles fb = EmitAlignmentReport(records, b.path());
  CHECK(ReadText(fa.csv) == ReadText(fb.csv));
  CHECK(ReadText(fa.curves[0]) == ReadText(fb.curves[0]));
}

TEST_CASE("validators catch malformed files") {
  TempDir dir;
  lca::testing::WriteText(dir / "bad.csv", "layer,taxonomy\n0,pos\n");
  CHECK_FALSE(ValidateAlignmentCsv(dir / "bad.csv").empty());
  lca::testing::WriteText(dir / "wrong.csv",
                          std::string(kAlignmentCsvHeader) + "\n0,pos,0.9,80,0.5,0.5,2,2\n");
  CHECK_FALSE(ValidateAlignmentCsv(dir / "wrong.csv").empty());
  lca::testing::WriteText(dir / "c.json",
                          R"({"model":"m","taxonomy":"t","theta":0.9,"value_kind":"lambda",)"
                          R"("points":[[1,10],[0,20]]})");
  CHECK_FALSE(ValidateCurveJson(dir / "c.json").empty());
  lca::testing::WriteText(dir / "d.json",
                          R"({"model":"m","taxonomy":"t","theta":0.9,"value_kind":"lambda",)"
                          R"("points":[[0,101]]})");
  CHECK_FALSE(ValidateCurveJson(dir / "d.json").empty());
}

TEST_CASE("concept report entries") {
  TempDir dir;
  EncodedConcept c;
  c.layer = 12;
  c.cluster_id = 141;
  for (const char* w : {"French", "German", "Italian", "German"}) {
    c.members.push_back({"s", c.members.size(), w, c.members.size()});
  }
  EncodedConcept unlabeled = c;
  unlabeled.cluster_id = 7;

  AlignmentRecord r = Record(12, "pos", 1.0, 1.0);
  r.per_concept = {{141, 4, true, "NOUN", 1.0}};
  EmitConceptReport({c, unlabeled}, {{{12, 141}, "Nationalities and Ethnicities"}}, {r}, 10,
                    dir / "concepts.md");
  const std::string md = ReadText(dir / "concepts.md");
  CHECK(md.find("### Concept L12/C141") != std::string::npos);
  CHECK(md.find("- size: 4") != std::string::npos);
  CHECK(md.find("- label: Nationalities and Ethnicities") != std::string::npos);
  CHECK(md.find("- pos: best tag NOUN, purity 1 (aligned)") != std::string::npos);
  CHECK(md.find("- words: German, French, Italian") != std::string::npos);
  CHECK(md.find("- label: _absent_") != std::string::npos);
  CHECK(md.find("- label: \n") == std::string::npos);
  // Concepts are listed in (layer, cluster) order.
  CHECK(md.find("L12/C7") < md.find("L12/C141"));
}

TEST_CASE("600 concepts with top_n 10") {
  TempDir dir;
  std::vector<EncodedConcept> concepts;
  for (std::uint32_t i = 0; i < 600; ++i) {
    EncodedConcept c;
    c.cluster_id = i;
    for (std::uint64_t w = 0; w < 25; ++w) c.members.push_back({"s", w, "w" + std::to_string(w), w});
    concepts.push_back(c);
  }
  EmitConceptReport(concepts, {}, {}, 10, dir / "concepts.md");
  const std::string md = ReadText(dir / "concepts.md");
  CHECK(Count(md, "### Concept ") == 600);
  std::istringstream in(md);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("- words:", 0) == 0) REQUIRE(Count(line, ",") <= 9);
  }
}
