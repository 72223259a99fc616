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

#include "lca/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

namespace lca {

namespace fs = std::filesystem;

namespace {

double SnapToGrid(double q) {
  const double nearest = std::round(q);
  return std::abs(q - nearest) < 1e-6 ? nearest : q;
}

std::vector<std::uint32_t> DiscoverLayers(const fs::path& utt_dir) {
  std::vector<std::uint32_t> layers;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(utt_dir, ec)) {
    if (entry.path().extension() != ".emb") continue;
    try {
      layers.push_back(ReadLayerHeader(entry.path()).layer);
    } catch (const Error&) {
      // Reported when the layer is actually read.
      continue;
    }
  }
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  return layers;
}

}  // namespace

FrameWindow BoundaryToWindow(const WordBoundary& b, double stride_seconds,
                             std::uint64_t num_frames) {
  if (!(stride_seconds > 0.0) || num_frames == 0) {
    throw DataError("frame stride and frame count must be positive");
  }
  const double start = std::floor(SnapToGrid(b.t_start / stride_seconds));
  if (start >= static_cast<double>(num_frames)) {
    throw DataError("utterance " + b.utterance_id + ": word " +
                    std::to_string(b.word_index) + " starts at " +
                    std::to_string(b.t_start) + "s, beyond the last of " +
                    std::to_string(num_frames) + " frames");
  }
  const auto first = static_cast<std::uint64_t>(std::max(start, 0.0));
  const double end = std::ceil(SnapToGrid(b.t_end / stride_seconds)) - 1.0;
  std::uint64_t last = first;
  if (end >= static_cast<double>(first)) {
    last = std::min(static_cast<std::uint64_t>(end), num_frames - 1);
  }
  return {first, last};
}

std::vector<float> FramesToWord(const EmbeddingMatrix& frames,
                                const FrameWindow& window) {
  std::vector<double> acc(frames.dim, 0.0);
  for (std::uint64_t r = window.first_frame; r <= window.last_frame; ++r) {
    auto row = frames.Row(r);
    for (std::size_t d = 0; d < row.size(); ++d) acc[d] += row[d];
  }
  const double n = static_cast<double>(window.size());
  std::vector<float> out(frames.dim);
  for (std::size_t d = 0; d < out.size(); ++d) {
    out[d] = static_cast<float>(acc[d] / n);
  }
  return out;
}

std::pair<EmbeddingMatrix, TokenIndex> AggregateLayer(
    const std::map<std::string, EmbeddingMatrix>& frames,
    const std::vector<WordBoundary>& boundaries, std::uint32_t layer) {
  if (boundaries.empty()) throw DataError("empty aggregation");

  EmbeddingMatrix out;
  out.layer = layer;
  out.level = Level::kWord;
  TokenIndex index;
  index.entries.reserve(boundaries.size());

  for (const auto& b : boundaries) {
    auto it = frames.find(b.utterance_id);
    if (it == frames.end()) {
      throw DataError("no frame matrix for utterance " + b.utterance_id +
                      " at layer " + std::to_string(layer));
    }
    const EmbeddingMatrix& m = it->second;
    if (m.level != Level::kFrame || !m.stride_seconds) {
      throw DataError("utterance " + b.utterance_id + " layer " +
                      std::to_string(layer) + " is not a frame-level matrix");
    }
    if (out.dim == 0) {
      out.dim = m.dim;
      out.model_id = m.model_id;
    } else if (m.dim != out.dim) {
      throw DataError("utterance " + b.utterance_id + " has dim " +
                      std::to_string(m.dim) + ", expected " +
                      std::to_string(out.dim));
    }
    FrameWindow w = BoundaryToWindow(b, *m.stride_seconds, m.count);
    std::vector<float> v = FramesToWord(m, w);
    out.values.insert(out.values.end(), v.begin(), v.end());
    index.entries.push_back(
        TokenOccurrence{b.utterance_id, b.word_index, b.surface, out.count});
    ++out.count;
  }
  return {std::move(out), std::move(index)};
}

AggregateSummary AggregateRun(const fs::path& frames_dir,
                              const std::vector<WordBoundary>& boundaries,
                              const fs::path& out_dir,
                              std::vector<std::uint32_t> layers) {
  if (boundaries.empty()) throw DataError("empty aggregation");
  CheckBoundaries(boundaries);

  std::vector<std::string> utterances;
  for (const auto& b : boundaries) {
    if (utterances.empty() || utterances.back() != b.utterance_id) {
      utterances.push_back(b.utterance_id);
    }
  }
  for (const auto& u : utterances) {
    if (!fs::is_directory(frames_dir / u)) {
      throw DataError("missing frame directory for utterance " + u + " under " +
                      frames_dir.string());
    }
  }
  if (layers.empty()) layers = DiscoverLayers(frames_dir / utterances.front());
  if (layers.empty()) {
    throw DataError("no frame layers found for utterance " + utterances.front());
  }

  fs::create_directories(out_dir);
  AggregateSummary summary;
  for (std::uint32_t layer : layers) {
    std::map<std::string, EmbeddingMatrix> frames;
    for (const auto& u : utterances) {
      const fs::path stem = LayerStem(frames_dir / u, layer);
      fs::path emb = stem;
      emb += ".emb";
      if (!fs::exists(emb)) {
        throw DataError("utterance " + u + " has no frames for layer " +
                        std::to_string(layer));
      }
      frames.emplace(u, ReadLayer(stem).first);
    }
    auto [matrix, index] = AggregateLayer(frames, boundaries, layer);
    WriteLayer(matrix, index, LayerStem(out_dir, layer));
    summary.layers.push_back(layer);
    summary.words = matrix.count;
  }
  return summary;
}

TokenIndex FrequencyFilter(const TokenIndex& index, std::uint64_t min_count,
                           std::uint64_t max_per_type, std::uint64_t seed) {
  if (min_count < 1) throw UserError("min_count must be at least 1");
  if (max_per_type != 0 && max_per_type < min_count) {
    throw UserError("max_per_type must be 0 or at least min_count");
  }

  std::map<std::string, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    by_type[index.entries[i].surface].push_back(i);
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [surface, positions] : by_type) {
    if (positions.size() < min_count) continue;
    if (max_per_type != 0 && positions.size() > max_per_type) {
      // Partial Fisher-Yates: the first max_per_type slots become the sample.
      for (std::size_t i = 0; i < max_per_type; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, positions.size() - 1);
        std::swap(positions[i], positions[pick(rng)]);
      }
      positions.resize(max_per_type);
    }
    keep.insert(keep.end(), positions.begin(), positions.end());
  }
  if (keep.empty()) {
    throw DataError("frequency filter (min_count=" + std::to_string(min_count) +
                    ") removed every occurrence");
  }
  std::sort(keep.begin(), keep.end());
  TokenIndex out;
  out.entries.reserve(keep.size());
  for (std::size_t i : keep) out.entries.push_back(index.entries[i]);
  return out;
}

}  // namespace lca
