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

#include "lca/alignment.hpp"
#include "lca/clustering.hpp"
#include "lca/labeler.hpp"

namespace lca {

struct TaxonomySource {
  std::string name;
  std::filesystem::path path;

  bool operator==(const TaxonomySource&) const = default;
};

/// Effective settings for one pipeline run. Defaults: K = 600, theta = 0.9,
/// minimum frequency 10.
struct RunConfig {
  std::filesystem::path run_dir = ".";
  std::string model_id;
  std::vector<std::uint32_t> layers;  // empty means every layer found

  std::uint32_t k = 600;
  double theta = 0.9;
  std::uint64_t min_count = 10;
  std::uint64_t max_per_type = 0;
  std::uint64_t seed = 0;
  ClusterAlgorithm algorithm = ClusterAlgorithm::kKMeans;
  std::uint32_t max_iter = 300;
  double rel_tol = 1e-6;
  std::uint32_t n_init = 1;
  bool normalize = false;
  std::uint64_t ward_max_points = 20000;
  CoverageDenominator coverage_denominator = CoverageDenominator::kEncoded;

  std::filesystem::path boundaries;  // default <run>/boundaries.tsv
  std::vector<TaxonomySource> taxonomies;
  std::filesystem::path polarity_labels;  // optional label TSV
  std::size_t report_top_n = 10;

  LabelerConfig labeler;
};

std::string ConfigToJson(const RunConfig& config);
/// Values missing from the JSON keep the defaults from `base`.
RunConfig ConfigFromJson(const std::string& text, RunConfig base = {});
RunConfig LoadConfig(const std::filesystem::path& path, RunConfig base = {});

bool SameConfig(const RunConfig& a, const RunConfig& b);

}  // namespace lca
