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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lca/alignment.hpp"
#include "lca/labeler.hpp"

namespace lca {

inline constexpr const char* kLayerConvention =
    "layer 0 = embedding output, layers 1..L = encoder blocks";

enum class ValueKind { kLambda, kAlignmentTerm, kCoverageTerm };

const char* ValueKindName(ValueKind kind);

struct CurveSeries {
  std::string model_id;
  std::string taxonomy;
  std::optional<std::string> tag;  // per-tag curves only
  double theta = 0.9;
  ValueKind value_kind = ValueKind::kLambda;
  std::vector<std::pair<std::uint32_t, double>> points;
};

/// One lambda curve per (model, taxonomy). Polarity taxonomies additionally
/// get one curve per tag holding the fraction of encoded concepts that are
/// theta-pure in that tag.
std::vector<CurveSeries> BuildCurves(const std::vector<AlignmentRecord>& records);

/// Problems with a curve (layers not strictly increasing, values out of
/// range); empty when valid.
std::vector<std::string> CheckCurve(const CurveSeries& curve);

std::string CurveFileName(const CurveSeries& curve);

struct ReportFiles {
  std::filesystem::path csv;
  std::vector<std::filesystem::path> curves;
};

/// Writes `<out_dir>/alignment.csv` and `<out_dir>/curves/*.json`.
ReportFiles EmitAlignmentReport(const std::vector<AlignmentRecord>& records,
                                const std::filesystem::path& out_dir);

/// Schema checks for emitted files; empty result means valid.
std::vector<std::string> ValidateAlignmentCsv(const std::filesystem::path& path);
std::vector<std::string> ValidateCurveJson(const std::filesystem::path& path);

/// Markdown inspection report: per layer, each concept's size, label, best
/// tag and purity per taxonomy, and up to `top_n` member words.
void EmitConceptReport(const std::vector<EncodedConcept>& concepts,
                       const std::map<ConceptId, std::string>& labels,
                       const std::vector<AlignmentRecord>& alignments,
                       std::size_t top_n, const std::filesystem::path& path);

}  // namespace lca
