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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lca/error.hpp"

namespace lca {

enum class Level : std::uint8_t { kFrame = 0, kSubword = 1, kWord = 2 };

const char* LevelName(Level level);

/// One layer's N x D matrix of representation vectors, stored row-major.
struct EmbeddingMatrix {
  std::uint32_t layer = 0;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::vector<float> values;
  Level level = Level::kWord;
  std::string model_id;
  std::optional<double> stride_seconds;  // present iff level == kFrame

  std::span<const float> Row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  std::span<float> Row(std::size_t i) { return {values.data() + i * dim, dim}; }

  bool operator==(const EmbeddingMatrix&) const = default;
};

/// A single word occurrence and the matrix row that holds its vector.
struct TokenOccurrence {
  std::string sentence_id;
  std::uint64_t position = 0;
  std::string surface;
  std::uint64_t row = 0;

  bool operator==(const TokenOccurrence&) const = default;
};

/// Occurrences in ascending row order.
struct TokenIndex {
  std::vector<TokenOccurrence> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const TokenIndex&) const = default;
};

/// Store failures. Each malformed-file condition has its own kind.
class StoreError : public Error {
 public:
  enum class Kind {
    kIo,
    kInvariant,
    kBadMagic,
    kUnsupportedVersion,
    kTruncatedPayload,
    kIndexRowOutOfRange,
    kMalformedIndex,
  };

  StoreError(Kind kind, const std::string& what);
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr char kEmbMagic[4] = {'L', 'C', 'A', 'E'};
inline constexpr std::uint32_t kEmbVersion = 1;
inline constexpr std::size_t kEmbHeaderSize = 48;

/// Returns a list of invariant violations; empty when the pair is well formed.
std::vector<std::string> CheckLayer(const EmbeddingMatrix& matrix,
                                    const TokenIndex& index);

/// Writes `<stem>.emb` and `<stem>.idx`. Both files are written to temporaries
/// and renamed into place, so a failed write never leaves a partial file.
void WriteLayer(const EmbeddingMatrix& matrix, const TokenIndex& index,
                const std::filesystem::path& stem);

/// Reads the pair written by WriteLayer. The header is checked against the
/// actual file size before any payload allocation.
std::pair<EmbeddingMatrix, TokenIndex> ReadLayer(
    const std::filesystem::path& stem);

/// Reads only the 48-byte header (values left empty).
EmbeddingMatrix ReadLayerHeader(const std::filesystem::path& emb_path);

/// Reads a `.idx` file; the optional header's model id goes to `model_id`.
TokenIndex ReadIndex(const std::filesystem::path& idx_path,
                     std::string* model_id = nullptr);

/// Path stem for a layer inside a directory, e.g. dir/layer_07.
std::filesystem::path LayerStem(const std::filesystem::path& dir,
                                std::uint32_t layer);

struct LayerReport {
  std::filesystem::path stem;
  std::uint32_t layer = 0;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  Level level = Level::kWord;
  std::vector<std::string> violations;
};

struct StoreReport {
  std::vector<LayerReport> layers;     // sorted by layer then path
  std::vector<std::string> violations;  // cross-file problems

  bool clean() const;
};

/// Inspects every `.emb` file directly inside `dir`. Never throws on bad data;
/// problems are collected into the report.
StoreReport ValidateStore(const std::filesystem::path& dir);

}  // namespace lca
