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

#include "lca/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tsv.hpp"

namespace lca {

namespace fs = std::filesystem;

std::size_t Taxonomy::num_occurrences() const {
  std::size_t n = 0;
  for (const auto& [tag, members] : concepts) n += members.size();
  return n;
}

std::string AsciiLower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

IndexLookup::IndexLookup(const TokenIndex& index) : index_(&index) {
  pos_.reserve(index.size());
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    pos_.emplace(KeyOf(index.entries[i]), i);
  }
}

const TokenOccurrence* IndexLookup::Find(const OccurrenceKey& key) const {
  auto it = pos_.find(key);
  return it == pos_.end() ? nullptr : &index_->entries[it->second];
}

Taxonomy ParseTaxonomy(const fs::path& path, const std::string& name,
                       const TokenIndex& index) {
  IndexLookup lookup(index);
  std::unordered_map<OccurrenceKey, std::string, OccurrenceKeyHash> tag_of;
  std::vector<std::string> unknown;
  std::size_t unknown_total = 0;

  bool opened = tsv::ForEachLine(path.string(), [&](std::size_t lineno,
                                                    std::string_view line) {
    auto f = tsv::Split(line);
    OccurrenceKey key;
    if (f.size() != 4 || f[0].empty() || f[3].empty() ||
        !tsv::ParseNumber(f[1], key.position)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected sentence_id<TAB>position<TAB>surface<TAB>tag");
    }
    key.sentence_id = std::string(f[0]);
    if (!lookup.Find(key)) {
      if (unknown.size() < 10) {
        unknown.push_back("(" + key.sentence_id + ", " +
                          std::to_string(key.position) + ")");
      }
      ++unknown_total;
      return;
    }
    std::string tag(f[3]);
    auto [it, fresh] = tag_of.emplace(key, tag);
    if (!fresh && it->second != tag) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": occurrence (" + key.sentence_id + ", " +
                      std::to_string(key.position) + ") tagged both '" +
                      it->second + "' and '" + tag + "'");
    }
  });
  if (!opened) throw UserError("cannot open tag file " + path.string());
  if (unknown_total > 0) {
    std::string msg = path.string() + ": " + std::to_string(unknown_total) +
                      " occurrence(s) not in the token index, first:";
    for (const auto& u : unknown) msg += " " + u;
    throw DataError(msg);
  }

  Taxonomy tax;
  tax.name = name;
  for (const auto& [key, tag] : tag_of) {
    tax.concepts[tag].push_back(*lookup.Find(key));
  }
  for (auto& [tag, members] : tax.concepts) {
    std::sort(members.begin(), members.end(),
              [](const TokenOccurrence& a, const TokenOccurrence& b) {
                return a.row < b.row;
              });
  }
  return tax;
}

void CheckBoundaries(const std::vector<WordBoundary>& boundaries) {
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    const auto& b = boundaries[i];
    if (!(b.t_start >= 0.0) || !(b.t_start < b.t_end) ||
        !std::isfinite(b.t_end)) {
      throw DataError("utterance " + b.utterance_id + ": word " +
                      std::to_string(b.word_index) + " has invalid interval [" +
                      std::to_string(b.t_start) + ", " +
                      std::to_string(b.t_end) + "]");
    }
    if (i == 0 || boundaries[i - 1].utterance_id != b.utterance_id) continue;
    const auto& prev = boundaries[i - 1];
    if (b.t_start < prev.t_start) {
      throw DataError("utterance " + b.utterance_id +
                      ": boundaries not sorted by start time");
    }
    if (b.t_start < prev.t_end) {
      throw DataError("utterance " + b.utterance_id + ": words " +
                      std::to_string(prev.word_index) + " and " +
                      std::to_string(b.word_index) + " overlap");
    }
  }
}

std::vector<WordBoundary> ParseBoundaries(const fs::path& path) {
  std::vector<WordBoundary> out;
  bool opened = tsv::ForEachLine(path.string(), [&](std::size_t lineno,
                                                    std::string_view line) {
    auto f = tsv::Split(line);
    WordBoundary b;
    if (f.size() != 5 || f[0].empty() ||
        !tsv::ParseNumber(f[1], b.word_index) ||
        !tsv::ParseNumber(f[3], b.t_start) || !tsv::ParseNumber(f[4], b.t_end)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected utterance_id<TAB>word_index<TAB>surface"
                      "<TAB>t_start<TAB>t_end");
    }
    b.utterance_id = std::string(f[0]);
    b.surface = std::string(f[2]);
    out.push_back(std::move(b));
  });
  if (!opened) throw UserError("cannot open boundary file " + path.string());

  std::stable_sort(out.begin(), out.end(),
                   [](const WordBoundary& a, const WordBoundary& b) {
                     if (a.utterance_id != b.utterance_id) {
                       return a.utterance_id < b.utterance_id;
                     }
                     return a.t_start < b.t_start;
                   });
  std::set<std::pair<std::string_view, std::uint64_t>> seen;
  for (const auto& b : out) {
    if (!seen.emplace(b.utterance_id, b.word_index).second) {
      throw DataError("utterance " + b.utterance_id + ": duplicate word_index " +
                      std::to_string(b.word_index));
    }
  }
  CheckBoundaries(out);
  return out;
}

std::vector<SentenceLabel> ParseLabels(const fs::path& path) {
  std::vector<SentenceLabel> out;
  std::set<std::string> seen;
  bool opened = tsv::ForEachLine(path.string(), [&](std::size_t lineno,
                                                    std::string_view line) {
    auto f = tsv::Split(line);
    if (f.size() != 2 || f[0].empty() ||
        (f[1] != "positive" && f[1] != "negative")) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected sentence_id<TAB>positive|negative");
    }
    SentenceLabel label{std::string(f[0]), f[1] == "positive"
                                               ? Polarity::kPositive
                                               : Polarity::kNegative};
    if (!seen.insert(label.sentence_id).second) {
      throw DataError(path.string() + ": duplicate label for sentence " +
                      label.sentence_id);
    }
    out.push_back(std::move(label));
  });
  if (!opened) throw UserError("cannot open label file " + path.string());
  return out;
}

Taxonomy BuildPolarityConcepts(const std::vector<SentenceLabel>& labels,
                               const TokenIndex& index) {
  std::unordered_map<std::string, Polarity> label_of;
  for (const auto& l : labels) label_of.emplace(l.sentence_id, l.label);

  // Bit 1: seen in a positive sentence, bit 2: seen in a negative one.
  std::unordered_map<std::string, unsigned> seen_in;
  for (const auto& occ : index.entries) {
    auto it = label_of.find(occ.sentence_id);
    if (it == label_of.end()) {
      throw DataError("sentence " + occ.sentence_id + " has no polarity label");
    }
    seen_in[AsciiLower(occ.surface)] |=
        it->second == Polarity::kPositive ? 1u : 2u;
  }

  Taxonomy tax;
  tax.name = kPolarityTaxonomy;
  for (const auto& occ : index.entries) {
    unsigned mask = seen_in[AsciiLower(occ.surface)];
    if (mask == 1u) tax.concepts[kPositiveTag].push_back(occ);
    if (mask == 2u) tax.concepts[kNegativeTag].push_back(occ);
  }
  if (tax.concepts.empty()) {
    throw DataError("no polarity-exclusive vocabulary");
  }
  return tax;
}

Taxonomy RestrictTaxonomy(
    const Taxonomy& taxonomy,
    const std::unordered_set<OccurrenceKey, OccurrenceKeyHash>& universe) {
  Taxonomy out;
  out.name = taxonomy.name;
  for (const auto& [tag, members] : taxonomy.concepts) {
    std::vector<TokenOccurrence> kept;
    for (const auto& occ : members) {
      if (universe.contains(KeyOf(occ))) kept.push_back(occ);
    }
    if (!kept.empty()) out.concepts.emplace(tag, std::move(kept));
  }
  return out;
}

}  // namespace lca
