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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lca/corpus.hpp"
#include "lca/embedding_store.hpp"

namespace lca {

/// Inclusive range of frame rows covering one word.
struct FrameWindow {
  std::uint64_t first_frame = 0;
  std::uint64_t last_frame = 0;

  std::uint64_t size() const { return last_frame - first_frame + 1; }
  bool operator==(const FrameWindow&) const = default;
};

/// Discretizes [t_start, t_end] onto the frame grid:
///   first = floor(t_start / stride)
///   last  = min(ceil(t_end / stride) - 1, num_frames - 1)
/// falling back to the single frame `first` when that leaves last < first.
/// Quotients within 1e-6 of an integer snap to it, so decimal times that sit
/// on a grid point do not drift by a frame. Throws DataError when the word
/// starts past the last frame.
FrameWindow BoundaryToWindow(const WordBoundary& b, double stride_seconds,
                             std::uint64_t num_frames);

/// Arithmetic mean of rows first..last (inclusive), accumulated in double.
std::vector<float> FramesToWord(const EmbeddingMatrix& frames,
                                const FrameWindow& window);

/// Pools one layer. `frames` maps utterance id to that utterance's frame
/// matrix for the layer; `boundaries` must be grouped per utterance (as
/// returned by ParseBoundaries). Rows follow boundary order.
std::pair<EmbeddingMatrix, TokenIndex> AggregateLayer(
    const std::map<std::string, EmbeddingMatrix>& frames,
    const std::vector<WordBoundary>& boundaries, std::uint32_t layer);

struct AggregateSummary {
  std::vector<std::uint32_t> layers;
  std::uint64_t words = 0;
};

/// Frame input layout: `<frames_dir>/<utterance_id>/layer_NN.emb`. Writes one
/// word-level `layer_NN.{emb,idx}` per layer into `out_dir`. An empty `layers`
/// list means every layer found for the first utterance.
AggregateSummary AggregateRun(const std::filesystem::path& frames_dir,
                              const std::vector<WordBoundary>& boundaries,
                              const std::filesystem::path& out_dir,
                              std::vector<std::uint32_t> layers = {});

/// Keeps occurrences of surface forms seen at least `min_count` times. Forms
/// with more than `max_per_type` occurrences are down-sampled uniformly with a
/// seeded generator (0 disables the cap). Output stays in ascending row order
/// and references the original rows.
TokenIndex FrequencyFilter(const TokenIndex& index, std::uint64_t min_count,
                           std::uint64_t max_per_type, std::uint64_t seed);

}  // namespace lca
