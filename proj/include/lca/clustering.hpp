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
#include <string>
#include <vector>

#include "lca/embedding_store.hpp"

namespace lca {

enum class ClusterAlgorithm { kKMeans, kWard };

const char* AlgorithmName(ClusterAlgorithm algorithm);
ClusterAlgorithm ParseAlgorithm(const std::string& name);

struct ClusterAssignment {
  std::uint32_t k = 0;
  std::vector<std::uint32_t> labels;  // one per matrix row
  std::vector<double> centroids;      // k x dim, row-major
  std::uint32_t dim = 0;
  double objective = 0.0;             // within-cluster sum of squared distances

  // Run metadata.
  std::uint32_t iterations = 0;
  std::uint32_t repairs = 0;
  bool converged = false;
  std::vector<double> objective_history;  // k-means: objective after each iteration

  std::vector<std::uint64_t> ClusterSizes() const;
};

struct KMeansOptions {
  std::uint32_t k = 600;
  std::uint64_t seed = 0;
  std::uint32_t max_iter = 300;
  double rel_tol = 1e-6;
  std::uint32_t n_init = 1;  // independent seedings; the lowest objective wins
  bool repair_empty = true;
  bool normalize = false;  // unit-length rows before clustering
  unsigned threads = 0;    // 0: hardware concurrency
};

/// Lloyd iterations from greedy k-means++ seeding. Rows are only reassigned to a
/// strictly closer centroid, and a centroid update that would raise the
/// objective (possible only through rounding) ends the run, so
/// `objective_history` never increases. Empty clusters take the row farthest
/// from its centroid when `repair_empty` is set. With `n_init` > 1 the seeding
/// is repeated and the run with the lowest objective is returned. Results do
/// not depend on the thread count.
ClusterAssignment KMeans(const EmbeddingMatrix& matrix,
                         const KMeansOptions& options);

struct WardOptions {
  std::uint32_t k = 600;
  std::uint64_t max_points = 20000;
};

/// Exact agglomerative clustering under Ward's criterion. Pair costs are the
/// increase in within-cluster sum of squares, maintained with Lance-Williams
/// updates. Each step merges the cheapest pair; ties go to the smallest
/// (i, j), where a cluster is identified by its smallest member row. The
/// dendrogram is cut at k clusters, numbered by smallest member row.
ClusterAssignment WardAgglomerative(const EmbeddingMatrix& matrix,
                                    const WardOptions& options);

struct EncodedConcept {
  std::uint32_t layer = 0;
  std::uint32_t cluster_id = 0;
  std::vector<TokenOccurrence> members;
};

/// `index.entries[i]` must describe row i of the clustered matrix.
std::vector<EncodedConcept> ClustersToConcepts(
    const ClusterAssignment& assignment, const TokenIndex& index,
    std::uint32_t layer);

/// Selects rows (by TokenOccurrence::row) out of a layer matrix, in index
/// order, producing the matrix that is actually clustered.
EmbeddingMatrix SelectRows(const EmbeddingMatrix& matrix,
                           const TokenIndex& index);

/// One line per concept: `cluster_id<TAB>row,row,...` with rows referring to
/// the layer's matrix.
void WriteClusterFile(const std::filesystem::path& path,
                      const std::vector<EncodedConcept>& concepts);

/// Resolves rows back to occurrences through the layer's token index.
std::vector<EncodedConcept> ReadClusterFile(const std::filesystem::path& path,
                                            const TokenIndex& index,
                                            std::uint32_t layer);

struct ClusterRunInfo {
  std::uint32_t layer = 0;
  ClusterAlgorithm algorithm = ClusterAlgorithm::kKMeans;
  std::uint64_t seed = 0;
  std::uint64_t num_points = 0;
  std::uint32_t requested_k = 0;
};

void WriteClusterMetadata(const std::filesystem::path& path,
                          const ClusterRunInfo& info,
                          const ClusterAssignment& assignment);

}  // namespace lca
