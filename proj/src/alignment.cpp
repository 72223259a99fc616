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

#include "lca/alignment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

namespace lca {

namespace fs = std::filesystem;

const char* CoverageDenominatorName(CoverageDenominator d) {
  return d == CoverageDenominator::kLinguistic ? "linguistic" : "encoded";
}

CoverageDenominator ParseCoverageDenominator(const std::string& name) {
  if (name == "encoded") return CoverageDenominator::kEncoded;
  if (name == "linguistic") return CoverageDenominator::kLinguistic;
  throw UserError("unknown coverage denominator '" + name +
                  "' (expected encoded or linguistic)");
}

void CheckTheta(double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw UserError("theta must lie in (0, 1], got " + FormatDouble(theta));
  }
}

std::string FormatDouble(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

TagLookup::TagLookup(const Taxonomy& taxonomy) {
  for (const auto& [tag, members] : taxonomy.concepts) {
    const int id = static_cast<int>(names_.size());
    names_.push_back(tag);
    sizes_.push_back(members.size());
    for (const auto& occ : members) tag_of_.emplace(KeyOf(occ), id);
  }
}

int TagLookup::TagOf(const TokenOccurrence& occ) const {
  auto it = tag_of_.find(KeyOf(occ));
  return it == tag_of_.end() ? -1 : it->second;
}

namespace {

// Sparse |C_e ∩ C_l| counts for one encoded concept, ordered by tag id.
std::vector<std::pair<int, std::uint64_t>> TagCounts(
    const EncodedConcept& cluster, const TagLookup& tags) {
  std::unordered_map<int, std::uint64_t> counts;
  for (const auto& occ : cluster.members) {
    const int t = tags.TagOf(occ);
    if (t >= 0) ++counts[t];
  }
  std::vector<std::pair<int, std::uint64_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end());
  return out;
}

ConceptAlignment Summarize(const EncodedConcept& cluster,
                           const std::vector<std::pair<int, std::uint64_t>>& counts,
                           const TagLookup& tags, double theta) {
  ConceptAlignment out;
  out.cluster_id = cluster.cluster_id;
  out.size = cluster.members.size();
  std::uint64_t best = 0;
  int best_tag = -1;
  for (const auto& [tag, count] : counts) {
    if (count > best) {
      best = count;
      best_tag = tag;
    }
  }
  if (best_tag >= 0) {
    out.best_tag = tags.TagName(best_tag);
    out.best_fraction = static_cast<double>(best) / static_cast<double>(out.size);
    // The largest intersection decides existence of any theta-pure tag.
    out.aligned = MeetsTheta(best, out.size, theta);
  }
  return out;
}

}  // namespace

ConceptAlignment AlphaTheta(const EncodedConcept& cluster,
                            const TagLookup& tags, double theta) {
  CheckTheta(theta);
  if (cluster.members.empty()) throw DataError("encoded concept is empty");
  return Summarize(cluster, TagCounts(cluster, tags), tags, theta);
}

bool KappaTheta(const std::vector<TokenOccurrence>& linguistic,
                const std::vector<EncodedConcept>& encoded, double theta,
                CoverageDenominator denominator) {
  CheckTheta(theta);
  if (linguistic.empty()) throw DataError("linguistic concept is empty");
  std::unordered_set<OccurrenceKey, OccurrenceKeyHash> members;
  for (const auto& occ : linguistic) members.insert(KeyOf(occ));
  for (const auto& c : encoded) {
    if (c.members.empty()) continue;
    std::uint64_t hit = 0;
    for (const auto& occ : c.members) hit += members.contains(KeyOf(occ));
    const std::uint64_t size = denominator == CoverageDenominator::kEncoded
                                   ? c.members.size()
                                   : linguistic.size();
    if (hit > 0 && MeetsTheta(hit, size, theta)) return true;
  }
  return false;
}

AlignmentRecord LambdaTheta(const std::vector<EncodedConcept>& encoded,
                            const Taxonomy& taxonomy,
                            const AlignmentOptions& options) {
  CheckTheta(options.theta);
  if (encoded.empty()) throw DataError("no encoded concepts to align");
  if (taxonomy.concepts.empty()) {
    throw DataError("taxonomy '" + taxonomy.name + "' has no concepts");
  }
  const TagLookup tags(taxonomy);
  AlignmentRecord rec;
  rec.layer = encoded.front().layer;
  rec.taxonomy = taxonomy.name;
  rec.theta = options.theta;
  rec.num_encoded = encoded.size();
  rec.num_linguistic = static_cast<std::uint64_t>(tags.num_tags());
  rec.per_tag.resize(tags.num_tags());
  for (int t = 0; t < tags.num_tags(); ++t) {
    rec.per_tag[t].tag = tags.TagName(t);
    rec.per_tag[t].size = tags.TagSize(t);
  }

  for (const auto& cluster : encoded) {
    if (cluster.members.empty()) throw DataError("encoded concept is empty");
    const auto counts = TagCounts(cluster, tags);
    rec.per_concept.push_back(Summarize(cluster, counts, tags, options.theta));
    rec.num_aligned += rec.per_concept.back().aligned;
    for (const auto& [tag, count] : counts) {
      auto& tag_rec = rec.per_tag[tag];
      const bool pure = MeetsTheta(count, cluster.members.size(), options.theta);
      tag_rec.aligned_concepts += pure;
      const std::uint64_t denom =
          options.coverage_denominator == CoverageDenominator::kEncoded
              ? cluster.members.size()
              : tag_rec.size;
      if (MeetsTheta(count, denom, options.theta)) tag_rec.covered = true;
    }
  }
  for (const auto& t : rec.per_tag) rec.num_covered += t.covered;

  rec.alignment_term =
      static_cast<double>(rec.num_aligned) / static_cast<double>(rec.num_encoded);
  rec.coverage_term = static_cast<double>(rec.num_covered) /
                      static_cast<double>(rec.num_linguistic);
  rec.lambda = 50.0 * (rec.alignment_term + rec.coverage_term);
  return rec;
}

LayerwiseResult LayerwiseAlignment(const fs::path& run_dir,
                                   const std::vector<Taxonomy>& taxonomies,
                                   const AlignmentOptions& options,
                                   const std::vector<std::uint32_t>& layers) {
  CheckTheta(options.theta);
  LayerwiseResult result;
  for (std::uint32_t layer : layers) {
    fs::path idx = LayerStem(run_dir / "embeddings", layer);
    idx += ".idx";
    fs::path clusters = LayerStem(run_dir / "clusters", layer);
    clusters += ".clusters";
    if (!fs::exists(idx) || !fs::exists(clusters)) {
      result.gaps.push_back("layer " + std::to_string(layer) + ": missing " +
                            (fs::exists(idx) ? clusters : idx).string());
      continue;
    }
    std::string model_id;
    const TokenIndex index = ReadIndex(idx, &model_id);
    const auto encoded = ReadClusterFile(clusters, index, layer);
    if (encoded.empty()) {
      result.gaps.push_back("layer " + std::to_string(layer) +
                            ": no encoded concepts");
      continue;
    }
    std::unordered_set<OccurrenceKey, OccurrenceKeyHash> universe;
    for (const auto& c : encoded) {
      for (const auto& occ : c.members) universe.insert(KeyOf(occ));
    }
    for (const auto& tax : taxonomies) {
      Taxonomy restricted = RestrictTaxonomy(tax, universe);
      if (restricted.concepts.empty()) {
        result.gaps.push_back("layer " + std::to_string(layer) + ": taxonomy " +
                              tax.name + " has no clustered occurrences");
        continue;
      }
      AlignmentRecord rec = LambdaTheta(encoded, restricted, options);
      rec.model_id = model_id;
      result.records.push_back(std::move(rec));
    }
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const AlignmentRecord& a, const AlignmentRecord& b) {
                     if (a.layer != b.layer) return a.layer < b.layer;
                     return a.taxonomy < b.taxonomy;
                   });
  return result;
}

void WriteAlignmentCsv(const fs::path& path,
                       const std::vector<AlignmentRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write " + path.string());
  out << kAlignmentCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.layer << ',' << r.taxonomy << ',' << FormatDouble(r.theta) << ','
        << FormatDouble(r.lambda) << ',' << FormatDouble(r.alignment_term) << ','
        << FormatDouble(r.coverage_term) << ',' << r.num_encoded << ','
        << r.num_linguistic << '\n';
  }
  if (!out) throw UserError("write failed: " + path.string());
}

void WriteConceptDiagnostics(const fs::path& path,
                             const std::vector<AlignmentRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write " + path.string());
  for (const auto& r : records) {
    for (const auto& c : r.per_concept) {
      nlohmann::ordered_json j;
      j["layer"] = r.layer;
      j["taxonomy"] = r.taxonomy;
      j["theta"] = r.theta;
      j["cluster_id"] = c.cluster_id;
      j["size"] = c.size;
      j["aligned"] = c.aligned;
      j["best_tag"] = c.best_tag ? nlohmann::ordered_json(*c.best_tag)
                                 : nlohmann::ordered_json(nullptr);
      j["best_fraction"] = c.best_fraction;
      out << j.dump() << '\n';
    }
  }
  if (!out) throw UserError("write failed: " + path.string());
}

void WriteAlignmentRecords(const fs::path& path,
                           const std::vector<AlignmentRecord>& records) {
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["layer"] = r.layer;
    j["model"] = r.model_id;
    j["taxonomy"] = r.taxonomy;
    j["theta"] = r.theta;
    j["lambda"] = r.lambda;
    j["alignment_term"] = r.alignment_term;
    j["coverage_term"] = r.coverage_term;
    j["num_encoded"] = r.num_encoded;
    j["num_linguistic"] = r.num_linguistic;
    j["num_aligned"] = r.num_aligned;
    j["num_covered"] = r.num_covered;
    j["per_tag"] = nlohmann::ordered_json::array();
    for (const auto& t : r.per_tag) {
      j["per_tag"].push_back({{"tag", t.tag},
                              {"size", t.size},
                              {"covered", t.covered},
                              {"aligned_concepts", t.aligned_concepts}});
    }
    j["per_concept"] = nlohmann::ordered_json::array();
    for (const auto& c : r.per_concept) {
      j["per_concept"].push_back(
          {{"cluster_id", c.cluster_id},
           {"size", c.size},
           {"aligned", c.aligned},
           {"best_tag", c.best_tag ? nlohmann::ordered_json(*c.best_tag)
                                   : nlohmann::ordered_json(nullptr)},
           {"best_fraction", c.best_fraction}});
    }
    all.push_back(std::move(j));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write " + path.string());
  out << all.dump(1) << '\n';
  if (!out) throw UserError("write failed: " + path.string());
}

std::vector<AlignmentRecord> ReadAlignmentRecords(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open " + path.string());
  nlohmann::json all = nlohmann::json::parse(in, nullptr, false);
  if (all.is_discarded() || !all.is_array()) {
    throw DataError(path.string() + ": expected a JSON array of records");
  }
  std::vector<AlignmentRecord> records;
  try {
    for (const auto& j : all) {
      AlignmentRecord r;
      r.layer = j.at("layer").get<std::uint32_t>();
      r.model_id = j.at("model").get<std::string>();
      r.taxonomy = j.at("taxonomy").get<std::string>();
      r.theta = j.at("theta").get<double>();
      r.lambda = j.at("lambda").get<double>();
      r.alignment_term = j.at("alignment_term").get<double>();
      r.coverage_term = j.at("coverage_term").get<double>();
      r.num_encoded = j.at("num_encoded").get<std::uint64_t>();
      r.num_linguistic = j.at("num_linguistic").get<std::uint64_t>();
      r.num_aligned = j.at("num_aligned").get<std::uint64_t>();
      r.num_covered = j.at("num_covered").get<std::uint64_t>();
      for (const auto& t : j.at("per_tag")) {
        r.per_tag.push_back({t.at("tag").get<std::string>(),
                             t.at("size").get<std::uint64_t>(),
                             t.at("covered").get<bool>(),
                             t.at("aligned_concepts").get<std::uint64_t>()});
      }
      for (const auto& c : j.at("per_concept")) {
        ConceptAlignment a;
        a.cluster_id = c.at("cluster_id").get<std::uint32_t>();
        a.size = c.at("size").get<std::uint64_t>();
        a.aligned = c.at("aligned").get<bool>();
        if (!c.at("best_tag").is_null()) a.best_tag = c["best_tag"].get<std::string>();
        a.best_fraction = c.at("best_fraction").get<double>();
        r.per_concept.push_back(std::move(a));
      }
      records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return records;
}

}  // namespace lca
