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
#include <optional>
#include <string>
#include <vector>

#include "lca/clustering.hpp"
#include "lca/corpus.hpp"

namespace lca {

/// Which set size divides |C_e ∩ C_l| when deciding whether a linguistic
/// concept is covered. kEncoded is the default.
enum class CoverageDenominator { kEncoded, kLinguistic };

const char* CoverageDenominatorName(CoverageDenominator d);
CoverageDenominator ParseCoverageDenominator(const std::string& name);

struct AlignmentOptions {
  double theta = 0.9;
  CoverageDenominator coverage_denominator = CoverageDenominator::kEncoded;
};

/// Throws UserError unless 0 < theta <= 1.
void CheckTheta(double theta);

/// True when count / size >= theta, evaluated as a correctly rounded double
/// division so that e.g. 9/10 meets theta = 0.9.
inline bool MeetsTheta(std::uint64_t count, std::uint64_t size, double theta) {
  return static_cast<double>(count) / static_cast<double>(size) >= theta;
}

struct ConceptAlignment {
  std::uint32_t cluster_id = 0;
  std::uint64_t size = 0;
  bool aligned = false;
  std::optional<std::string> best_tag;
  double best_fraction = 0.0;
};

struct TagAlignment {
  std::string tag;
  std::uint64_t size = 0;
  bool covered = false;
  // Encoded concepts whose members are at least theta in this tag.
  std::uint64_t aligned_concepts = 0;
};

struct AlignmentRecord {
  std::uint32_t layer = 0;
  std::string model_id;
  std::string taxonomy;
  double theta = 0.9;
  double lambda = 0.0;
  double alignment_term = 0.0;
  double coverage_term = 0.0;
  std::uint64_t num_encoded = 0;
  std::uint64_t num_linguistic = 0;
  std::uint64_t num_aligned = 0;
  std::uint64_t num_covered = 0;
  std::vector<ConceptAlignment> per_concept;
  std::vector<TagAlignment> per_tag;
};

/// Occurrence -> tag lookup for one taxonomy. Tags are numbered in
/// lexicographic order.
class TagLookup {
 public:
  explicit TagLookup(const Taxonomy& taxonomy);

  /// -1 for untagged occurrences.
  int TagOf(const TokenOccurrence& occ) const;
  const std::string& TagName(int tag) const { return names_[tag]; }
  std::uint64_t TagSize(int tag) const { return sizes_[tag]; }
  int num_tags() const { return static_cast<int>(names_.size()); }

 private:
  std::vector<std::string> names_;
  std::vector<std::uint64_t> sizes_;
  std::unordered_map<OccurrenceKey, int, OccurrenceKeyHash> tag_of_;
};

/// Alignment indicator for one encoded concept plus its best tag (ties go to
/// the lexicographically smallest). Untagged members count toward |C_e|.
ConceptAlignment AlphaTheta(const EncodedConcept& cluster,
                            const TagLookup& tags, double theta);

/// Coverage indicator for one linguistic concept.
bool KappaTheta(const std::vector<TokenOccurrence>& linguistic,
                const std::vector<EncodedConcept>& encoded, double theta,
                CoverageDenominator denominator = CoverageDenominator::kEncoded);

/// Half the sum of the aligned-concept and covered-concept fractions, scaled
/// to [0, 100]. Throws DataError when either side is empty.
AlignmentRecord LambdaTheta(const std::vector<EncodedConcept>& encoded,
                            const Taxonomy& taxonomy,
                            const AlignmentOptions& options);

struct LayerwiseResult {
  std::vector<AlignmentRecord> records;  // ordered by (layer, taxonomy)
  std::vector<std::string> gaps;         // layers that could not be scored
};

/// Scores every requested layer of a run directory against each taxonomy.
/// Reads `embeddings/layer_NN.idx` and `clusters/layer_NN.clusters`. Each
/// taxonomy is restricted to the occurrences that were clustered in the layer.
LayerwiseResult LayerwiseAlignment(const std::filesystem::path& run_dir,
                                   const std::vector<Taxonomy>& taxonomies,
                                   const AlignmentOptions& options,
                                   const std::vector<std::uint32_t>& layers);

inline constexpr const char* kAlignmentCsvHeader =
    "layer,taxonomy,theta,lambda,alignment_term,coverage_term,num_encoded,"
    "num_linguistic";

void WriteAlignmentCsv(const std::filesystem::path& path,
                       const std::vector<AlignmentRecord>& records);

/// One JSON object per (record, encoded concept).
void WriteConceptDiagnostics(const std::filesystem::path& path,
                             const std::vector<AlignmentRecord>& records);

/// Full records, including per-concept and per-tag detail, as JSON. Used to
/// hand alignment results from the align stage to the report stage.
void WriteAlignmentRecords(const std::filesystem::path& path,
                           const std::vector<AlignmentRecord>& records);
std::vector<AlignmentRecord> ReadAlignmentRecords(
    const std::filesystem::path& path);

/// Shortest decimal form that reads back to the same double.
std::string FormatDouble(double value);

}  // namespace lca
