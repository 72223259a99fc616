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
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lca/embedding_store.hpp"

namespace lca {

/// Identity of a word occurrence across files: (sentence_id, position).
struct OccurrenceKey {
  std::string sentence_id;
  std::uint64_t position = 0;

  bool operator==(const OccurrenceKey&) const = default;
  auto operator<=>(const OccurrenceKey&) const = default;
};

struct OccurrenceKeyHash {
  std::size_t operator()(const OccurrenceKey& k) const noexcept {
    std::size_t h = std::hash<std::string>{}(k.sentence_id);
    return h ^ (std::hash<std::uint64_t>{}(k.position) + 0x9e3779b97f4a7c15ULL +
                (h << 6) + (h >> 2));
  }
};

inline OccurrenceKey KeyOf(const TokenOccurrence& occ) {
  return {occ.sentence_id, occ.position};
}

/// Named family of concepts: tag -> member occurrences (ascending row order).
/// Every occurrence carries exactly one tag and no tag set is empty.
struct Taxonomy {
  std::string name;
  std::map<std::string, std::vector<TokenOccurrence>> concepts;

  std::size_t num_occurrences() const;
};

struct WordBoundary {
  std::string utterance_id;
  std::uint64_t word_index = 0;
  std::string surface;
  double t_start = 0.0;
  double t_end = 0.0;
};

enum class Polarity { kPositive, kNegative };

struct SentenceLabel {
  std::string sentence_id;
  Polarity label = Polarity::kPositive;
};

inline constexpr const char* kPolarityTaxonomy = "sst-polarity";
inline constexpr const char* kPositiveTag = "+ve";
inline constexpr const char* kNegativeTag = "-ve";

/// Looks occurrences up by (sentence_id, position).
class IndexLookup {
 public:
  explicit IndexLookup(const TokenIndex& index);
  const TokenOccurrence* Find(const OccurrenceKey& key) const;

 private:
  const TokenIndex* index_;
  std::unordered_map<OccurrenceKey, std::size_t, OccurrenceKeyHash> pos_;
};

/// Parses a tag TSV (sentence_id, position, surface, tag) and joins it to the
/// run's token index. Unknown occurrences and conflicting tags are errors.
Taxonomy ParseTaxonomy(const std::filesystem::path& path,
                       const std::string& name, const TokenIndex& index);

/// Parses a boundary TSV (utterance_id, word_index, surface, t_start, t_end).
/// Result is grouped by utterance and sorted by start time.
std::vector<WordBoundary> ParseBoundaries(const std::filesystem::path& path);

/// Checks ordering invariants on already grouped boundaries; throws DataError.
void CheckBoundaries(const std::vector<WordBoundary>& boundaries);

/// Parses a label TSV (sentence_id, positive|negative).
std::vector<SentenceLabel> ParseLabels(const std::filesystem::path& path);

/// Builds the two polarity concepts: occurrences of (lowercased) surface forms
/// seen only in positive sentences, and symmetrically for negative. Forms seen
/// under both labels belong to neither. Empty tags are dropped.
Taxonomy BuildPolarityConcepts(const std::vector<SentenceLabel>& labels,
                               const TokenIndex& index);

/// Keeps only occurrences present in `universe`, dropping tags left empty.
Taxonomy RestrictTaxonomy(
    const Taxonomy& taxonomy,
    const std::unordered_set<OccurrenceKey, OccurrenceKeyHash>& universe);

std::string AsciiLower(std::string_view s);

}  // namespace lca
