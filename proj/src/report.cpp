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

#include "lca/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "tsv.hpp"

namespace lca {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const char* ValueKindName(ValueKind kind) {
  switch (kind) {
    case ValueKind::kLambda:
      return "lambda";
    case ValueKind::kAlignmentTerm:
      return "alignment_term";
    case ValueKind::kCoverageTerm:
      return "coverage_term";
  }
  return "unknown";
}

namespace {

std::string Sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' ||
                    c == '.' || c == '+';
    out += ok ? c : '_';
  }
  return out.empty() ? "_" : out;
}

double MaxValue(ValueKind kind) { return kind == ValueKind::kLambda ? 100.0 : 1.0; }

}  // namespace

std::vector<CurveSeries> BuildCurves(const std::vector<AlignmentRecord>& records) {
  // Keyed by (model, taxonomy, tag) so output order is deterministic.
  std::map<std::tuple<std::string, std::string, std::string>, CurveSeries> curves;
  for (const auto& r : records) {
    auto& lam = curves[{r.model_id, r.taxonomy, ""}];
    lam.model_id = r.model_id;
    lam.taxonomy = r.taxonomy;
    lam.theta = r.theta;
    lam.value_kind = ValueKind::kLambda;
    lam.points.emplace_back(r.layer, r.lambda);

    if (r.taxonomy != kPolarityTaxonomy) continue;
    for (const auto& t : r.per_tag) {
      auto& c = curves[{r.model_id, r.taxonomy, t.tag}];
      c.model_id = r.model_id;
      c.taxonomy = r.taxonomy;
      c.tag = t.tag;
      c.theta = r.theta;
      c.value_kind = ValueKind::kAlignmentTerm;
      c.points.emplace_back(r.layer, static_cast<double>(t.aligned_concepts) /
                                         static_cast<double>(r.num_encoded));
    }
  }
  std::vector<CurveSeries> out;
  for (auto& [key, c] : curves) {
    std::sort(c.points.begin(), c.points.end());
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> CheckCurve(const CurveSeries& curve) {
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto [layer, value] = curve.points[i];
    if (i > 0 && layer <= curve.points[i - 1].first) {
      problems.push_back("layers not strictly increasing at layer " +
                         std::to_string(layer));
    }
    if (!(value >= 0.0 && value <= MaxValue(curve.value_kind))) {
      problems.push_back("value " + FormatDouble(value) + " out of range at layer " +
                         std::to_string(layer));
    }
  }
  return problems;
}

std::string CurveFileName(const CurveSeries& curve) {
  std::string name = Sanitize(curve.model_id.empty() ? "model" : curve.model_id) +
                     "__" + Sanitize(curve.taxonomy);
  if (curve.tag) name += "__" + Sanitize(*curve.tag);
  return name + ".json";
}

ReportFiles EmitAlignmentReport(const std::vector<AlignmentRecord>& records,
                                const fs::path& out_dir) {
  if (records.empty()) throw DataError("no alignment records to report");
  fs::create_directories(out_dir / "curves");
  ReportFiles files;
  files.csv = out_dir / "alignment.csv";
  WriteAlignmentCsv(files.csv, records);

  for (const auto& curve : BuildCurves(records)) {
    auto problems = CheckCurve(curve);
    if (!problems.empty()) {
      throw DataError("curve " + CurveFileName(curve) + ": " + problems[0]);
    }
    ojson j;
    j["model"] = curve.model_id;
    j["taxonomy"] = curve.taxonomy;
    if (curve.tag) j["tag"] = *curve.tag;
    j["theta"] = curve.theta;
    j["value_kind"] = ValueKindName(curve.value_kind);
    j["layer_convention"] = kLayerConvention;
    j["points"] = ojson::array();
    for (const auto& [layer, value] : curve.points) {
      j["points"].push_back({layer, value});
    }
    const fs::path path = out_dir / "curves" / CurveFileName(curve);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UserError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    files.curves.push_back(path);
  }
  return files;
}

std::vector<std::string> ValidateAlignmentCsv(const fs::path& path) {
  std::vector<std::string> problems;
  bool header_seen = false;
  bool opened = tsv::ForEachLine(path.string(), [&](std::size_t lineno,
                                                    std::string_view line) {
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    if (!header_seen) {
      header_seen = true;
      if (line != kAlignmentCsvHeader) problems.push_back(where + ": bad header");
      return;
    }
    auto f = tsv::Split(line, ',');
    if (f.size() != 8) {
      problems.push_back(where + ": expected 8 fields");
      return;
    }
    std::uint32_t layer = 0;
    double theta = 0, lambda = 0, a = 0, c = 0;
    std::uint64_t ne = 0, nl = 0;
    if (!tsv::ParseNumber(f[0], layer) || f[1].empty() ||
        !tsv::ParseNumber(f[2], theta) || !tsv::ParseNumber(f[3], lambda) ||
        !tsv::ParseNumber(f[4], a) || !tsv::ParseNumber(f[5], c) ||
        !tsv::ParseNumber(f[6], ne) || !tsv::ParseNumber(f[7], nl)) {
      problems.push_back(where + ": unparsable field");
      return;
    }
    if (!(theta > 0 && theta <= 1)) problems.push_back(where + ": theta out of range");
    if (!(lambda >= 0 && lambda <= 100)) problems.push_back(where + ": lambda out of range");
    if (!(a >= 0 && a <= 1) || !(c >= 0 && c <= 1)) {
      problems.push_back(where + ": term out of range");
    }
    if (std::abs(lambda - 50.0 * (a + c)) > 1e-12) {
      problems.push_back(where + ": lambda != 50 * (alignment_term + coverage_term)");
    }
    if (ne == 0 || nl == 0) problems.push_back(where + ": zero concept count");
  });
  if (!opened) problems.push_back("cannot open " + path.string());
  if (opened && !header_seen) problems.push_back(path.string() + ": empty file");
  return problems;
}

std::vector<std::string> ValidateCurveJson(const fs::path& path) {
  std::vector<std::string> problems;
  std::ifstream in(path, std::ios::binary);
  if (!in) return {"cannot open " + path.string()};
  ojson j = ojson::parse(in, nullptr, false);
  const std::string name = path.filename().string();
  if (j.is_discarded() || !j.is_object()) return {name + ": not a JSON object"};
  for (const char* key : {"model", "taxonomy", "value_kind"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      problems.push_back(name + ": missing string field " + key);
    }
  }
  if (!j.contains("theta") || !j["theta"].is_number() ||
      !(j["theta"].get<double>() > 0 && j["theta"].get<double>() <= 1)) {
    problems.push_back(name + ": theta missing or out of range");
  }
  if (!j.contains("points") || !j["points"].is_array()) {
    problems.push_back(name + ": missing points array");
  }
  if (!problems.empty()) return problems;

  CurveSeries curve;
  const std::string kind = j["value_kind"].get<std::string>();
  if (kind == "lambda") {
    curve.value_kind = ValueKind::kLambda;
  } else if (kind == "alignment_term") {
    curve.value_kind = ValueKind::kAlignmentTerm;
  } else if (kind == "coverage_term") {
    curve.value_kind = ValueKind::kCoverageTerm;
  } else {
    return {name + ": unknown value_kind " + kind};
  }
  for (const auto& p : j["points"]) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() ||
        !p[1].is_number()) {
      return {name + ": each point must be [layer, value]"};
    }
    curve.points.emplace_back(p[0].get<std::uint32_t>(), p[1].get<double>());
  }
  for (auto& p : CheckCurve(curve)) problems.push_back(name + ": " + p);
  return problems;
}

void EmitConceptReport(const std::vector<EncodedConcept>& concepts,
                       const std::map<ConceptId, std::string>& labels,
                       const std::vector<AlignmentRecord>& alignments,
                       std::size_t top_n, const fs::path& path) {
  std::map<ConceptId, std::vector<std::pair<std::string, const ConceptAlignment*>>>
      by_concept;
  for (const auto& r : alignments) {
    for (const auto& c : r.per_concept) {
      by_concept[{r.layer, c.cluster_id}].emplace_back(r.taxonomy, &c);
    }
  }
  std::vector<const EncodedConcept*> ordered;
  for (const auto& c : concepts) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) {
    return std::tie(a->layer, a->cluster_id) < std::tie(b->layer, b->cluster_id);
  });

  std::ostringstream md;
  md << "# Concept report\n\n"
     << "Layer indexing: " << kLayerConvention << ".\n";
  std::optional<std::uint32_t> current_layer;
  for (const auto* c : ordered) {
    if (current_layer != c->layer) {
      current_layer = c->layer;
      md << "\n## Layer " << c->layer << "\n";
    }
    const ConceptId id{c->layer, c->cluster_id};
    md << "\n### Concept " << ToString(id) << "\n\n";
    md << "- size: " << c->members.size() << "\n";
    auto label = labels.find(id);
    md << "- label: " << (label == labels.end() ? "_absent_" : label->second)
       << "\n";
    if (auto it = by_concept.find(id); it != by_concept.end()) {
      for (const auto& [taxonomy, a] : it->second) {
        md << "- " << taxonomy << ": ";
        if (a->best_tag) {
          md << "best tag " << *a->best_tag << ", purity "
             << FormatDouble(a->best_fraction)
             << (a->aligned ? " (aligned)" : "");
        } else {
          md << "no tagged members";
        }
        md << "\n";
      }
    }
    const LabelRequest words = BuildLabelRequest(*c, top_n);
    md << "- words:";
    for (std::size_t i = 0; i < words.words.size(); ++i) {
      md << (i ? ", " : " ") << words.words[i];
    }
    md << "\n";
  }

  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write " + path.string());
  out << md.str();
}

}  // namespace lca
