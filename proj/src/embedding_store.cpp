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

#include "lca/embedding_store.hpp"

#include "tsv.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <system_error>

namespace lca {

namespace fs = std::filesystem;

namespace {

ErrorClass ClassOf(StoreError::Kind kind) {
  return kind == StoreError::Kind::kIo ? ErrorClass::kUser : ErrorClass::kData;
}

template <typename T>
void PutLe(unsigned char* out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::uint8_t>>;
  U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out[i] = static_cast<unsigned char>(bits >> (8 * i));
  }
}

template <typename T>
T GetLe(const unsigned char* in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::uint8_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(in[i]) << (8 * i);
  }
  return std::bit_cast<T>(bits);
}

bool HasFieldBreak(const std::string& s) {
  return s.find_first_of("\t\n\r") != std::string::npos;
}

fs::path WithSuffix(const fs::path& stem, const char* suffix) {
  fs::path p = stem;
  p += suffix;
  return p;
}

void WriteFileAtomically(const fs::path& target, const std::string& bytes) {
  fs::path tmp = target;
  tmp += ".tmp";
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw StoreError(StoreError::Kind::kIo,
                       "cannot open " + tmp.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw StoreError(StoreError::Kind::kIo, "write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw StoreError(StoreError::Kind::kIo,
                     "cannot rename into " + target.string());
  }
}

std::string EncodeHeader(const EmbeddingMatrix& m) {
  std::string header(kEmbHeaderSize, '\0');
  auto* p = reinterpret_cast<unsigned char*>(header.data());
  std::memcpy(p, kEmbMagic, 4);
  PutLe<std::uint32_t>(p + 4, kEmbVersion);
  PutLe<std::uint32_t>(p + 8, m.layer);
  PutLe<std::uint32_t>(p + 12, m.dim);
  PutLe<std::uint64_t>(p + 16, m.count);
  p[24] = static_cast<unsigned char>(m.level);
  p[25] = 0;  // float32
  PutLe<double>(p + 26, m.stride_seconds.value_or(0.0));
  return header;
}

std::string EncodeIndex(const EmbeddingMatrix& m, const TokenIndex& index) {
  std::ostringstream out;
  if (!m.model_id.empty()) out << "# model_id\t" << m.model_id << '\n';
  for (const auto& e : index.entries) {
    out << e.row << '\t' << e.sentence_id << '\t' << e.position << '\t'
        << e.surface << '\n';
  }
  return out.str();
}

// Parses the index text; fills model_id from the optional header line.
TokenIndex ParseIndex(const fs::path& path, std::string* model_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw StoreError(StoreError::Kind::kIo, "cannot open " + path.string());
  }
  TokenIndex index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto fields = tsv::Split(line);
      if (fields.size() == 2 && fields[0] == "# model_id" && model_id) {
        *model_id = std::string(fields[1]);
      }
      continue;
    }
    auto fields = tsv::Split(line);
    TokenOccurrence occ;
    if (fields.size() != 4 || !tsv::ParseNumber(fields[0], occ.row) ||
        !tsv::ParseNumber(fields[2], occ.position) || fields[1].empty()) {
      throw StoreError(StoreError::Kind::kMalformedIndex,
                       path.string() + ":" + std::to_string(lineno) +
                           ": expected row<TAB>sentence_id<TAB>position<TAB>surface");
    }
    occ.sentence_id = std::string(fields[1]);
    occ.surface = std::string(fields[3]);
    index.entries.push_back(std::move(occ));
  }
  return index;
}

void CheckIndexAgainst(const TokenIndex& index, std::uint64_t count,
                       const fs::path& path) {
  std::uint64_t prev = 0;
  std::set<std::pair<std::string_view, std::uint64_t>> seen;
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const auto& e = index.entries[i];
    if (e.row >= count) {
      throw StoreError(StoreError::Kind::kIndexRowOutOfRange,
                       path.string() + ": row " + std::to_string(e.row) +
                           " out of range for count " + std::to_string(count));
    }
    if (i > 0 && e.row <= prev) {
      throw StoreError(StoreError::Kind::kMalformedIndex,
                       path.string() + ": rows not strictly ascending at row " +
                           std::to_string(e.row));
    }
    if (!seen.emplace(e.sentence_id, e.position).second) {
      throw StoreError(StoreError::Kind::kMalformedIndex,
                       path.string() + ": duplicate occurrence (" +
                           e.sentence_id + ", " + std::to_string(e.position) +
                           ")");
    }
    prev = e.row;
  }
}

}  // namespace

const char* LevelName(Level level) {
  switch (level) {
    case Level::kFrame:
      return "frame";
    case Level::kSubword:
      return "subword";
    case Level::kWord:
      return "word";
  }
  return "unknown";
}

StoreError::StoreError(Kind kind, const std::string& what)
    : Error(ClassOf(kind), what), kind_(kind) {}

std::vector<std::string> CheckLayer(const EmbeddingMatrix& m,
                                    const TokenIndex& index) {
  std::vector<std::string> problems;
  if (m.dim == 0) problems.push_back("dim must be positive");
  if (m.dim != 0 && m.count > std::numeric_limits<std::size_t>::max() / m.dim) {
    problems.push_back("count * dim overflows");
  } else if (m.values.size() != m.count * m.dim) {
    problems.push_back("values has " + std::to_string(m.values.size()) +
                       " entries, expected count*dim = " +
                       std::to_string(m.count * m.dim));
  }
  auto bad = std::find_if(m.values.begin(), m.values.end(),
                          [](float v) { return !std::isfinite(v); });
  if (bad != m.values.end()) {
    problems.push_back("non-finite value at flat offset " +
                       std::to_string(bad - m.values.begin()));
  }
  if (static_cast<unsigned>(m.level) > 2) problems.push_back("unknown level");
  if (m.level == Level::kFrame) {
    if (!m.stride_seconds) {
      problems.push_back("frame level requires stride_seconds");
    } else if (!std::isfinite(*m.stride_seconds) || *m.stride_seconds < 0.0) {
      problems.push_back("stride_seconds must be finite and non-negative");
    }
  } else if (m.stride_seconds) {
    problems.push_back("stride_seconds is only allowed at frame level");
  }
  if (m.model_id.find_first_of("\n\r") != std::string::npos) {
    problems.push_back("model_id contains a line break");
  }
  std::set<std::pair<std::string_view, std::uint64_t>> seen;
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const auto& e = index.entries[i];
    if (e.row >= m.count) {
      problems.push_back("index row " + std::to_string(e.row) +
                         " out of range");
    }
    if (i > 0 && e.row <= index.entries[i - 1].row) {
      problems.push_back("index rows not strictly ascending at entry " +
                         std::to_string(i));
    }
    if (e.sentence_id.empty() || HasFieldBreak(e.sentence_id) ||
        HasFieldBreak(e.surface)) {
      problems.push_back("index entry " + std::to_string(i) +
                         " has an empty sentence id or embedded tab/newline");
    }
    if (!seen.emplace(e.sentence_id, e.position).second) {
      problems.push_back("duplicate occurrence (" + e.sentence_id + ", " +
                         std::to_string(e.position) + ")");
    }
  }
  return problems;
}

void WriteLayer(const EmbeddingMatrix& matrix, const TokenIndex& index,
                const fs::path& stem) {
  auto problems = CheckLayer(matrix, index);
  if (!problems.empty()) {
    throw StoreError(StoreError::Kind::kInvariant,
                     "refusing to write " + stem.string() + ": " + problems[0]);
  }
  std::string emb = EncodeHeader(matrix);
  const std::size_t payload = matrix.values.size() * sizeof(float);
  emb.resize(kEmbHeaderSize + payload);
  auto* p = reinterpret_cast<unsigned char*>(emb.data()) + kEmbHeaderSize;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(p, matrix.values.data(), payload);
  } else {
    for (std::size_t i = 0; i < matrix.values.size(); ++i) {
      PutLe<float>(p + 4 * i, matrix.values[i]);
    }
  }
  WriteFileAtomically(WithSuffix(stem, ".emb"), emb);
  WriteFileAtomically(WithSuffix(stem, ".idx"), EncodeIndex(matrix, index));
}

EmbeddingMatrix ReadLayerHeader(const fs::path& emb_path) {
  std::ifstream in(emb_path, std::ios::binary);
  if (!in) {
    throw StoreError(StoreError::Kind::kIo, "cannot open " + emb_path.string());
  }
  std::error_code ec;
  const std::uintmax_t file_size = fs::file_size(emb_path, ec);
  if (ec) {
    throw StoreError(StoreError::Kind::kIo, "cannot stat " + emb_path.string());
  }
  unsigned char h[kEmbHeaderSize] = {};
  const std::size_t got = std::min<std::uintmax_t>(file_size, kEmbHeaderSize);
  in.read(reinterpret_cast<char*>(h), static_cast<std::streamsize>(got));
  if (got >= 4 && std::memcmp(h, kEmbMagic, 4) != 0) {
    throw StoreError(StoreError::Kind::kBadMagic,
                     emb_path.string() + ": bad magic");
  }
  if (got < kEmbHeaderSize) {
    throw StoreError(StoreError::Kind::kTruncatedPayload,
                     emb_path.string() + ": file shorter than header");
  }
  const auto version = GetLe<std::uint32_t>(h + 4);
  if (version != kEmbVersion) {
    throw StoreError(StoreError::Kind::kUnsupportedVersion,
                     emb_path.string() + ": unsupported version " +
                         std::to_string(version));
  }
  EmbeddingMatrix m;
  m.layer = GetLe<std::uint32_t>(h + 8);
  m.dim = GetLe<std::uint32_t>(h + 12);
  m.count = GetLe<std::uint64_t>(h + 16);
  const unsigned level = h[24];
  const unsigned dtype = h[25];
  const double stride = GetLe<double>(h + 26);
  if (level > 2) {
    throw StoreError(StoreError::Kind::kInvariant,
                     emb_path.string() + ": unknown level " +
                         std::to_string(level));
  }
  if (dtype != 0) {
    throw StoreError(StoreError::Kind::kUnsupportedVersion,
                     emb_path.string() + ": unsupported dtype " +
                         std::to_string(dtype));
  }
  if (std::any_of(h + 34, h + kEmbHeaderSize,
                  [](unsigned char c) { return c != 0; })) {
    throw StoreError(StoreError::Kind::kInvariant,
                     emb_path.string() + ": reserved header bytes not zero");
  }
  if (m.dim == 0) {
    throw StoreError(StoreError::Kind::kInvariant,
                     emb_path.string() + ": dim is zero");
  }
  m.level = static_cast<Level>(level);
  if (m.level == Level::kFrame) {
    if (!std::isfinite(stride) || stride < 0.0) {
      throw StoreError(StoreError::Kind::kInvariant,
                       emb_path.string() + ": invalid stride_seconds");
    }
    m.stride_seconds = stride;
  } else if (std::bit_cast<std::uint64_t>(stride) != 0) {
    throw StoreError(StoreError::Kind::kInvariant,
                     emb_path.string() + ": stride set on non-frame level");
  }
  // Validate the declared size against the real file before allocating.
  const std::uint64_t max_elems =
      (std::numeric_limits<std::uint64_t>::max() - kEmbHeaderSize) / 4;
  if (m.count > max_elems / m.dim ||
      kEmbHeaderSize + m.count * m.dim * 4 > file_size) {
    throw StoreError(StoreError::Kind::kTruncatedPayload,
                     emb_path.string() + ": declared payload exceeds file size");
  }
  if (kEmbHeaderSize + m.count * m.dim * 4 < file_size) {
    throw StoreError(StoreError::Kind::kInvariant,
                     emb_path.string() + ": trailing bytes after payload");
  }
  return m;
}

TokenIndex ReadIndex(const fs::path& idx_path, std::string* model_id) {
  return ParseIndex(idx_path, model_id);
}

std::pair<EmbeddingMatrix, TokenIndex> ReadLayer(const fs::path& stem) {
  const fs::path emb_path = WithSuffix(stem, ".emb");
  EmbeddingMatrix m = ReadLayerHeader(emb_path);

  const std::size_t n = m.count * m.dim;
  std::vector<unsigned char> raw(n * sizeof(float));
  {
    std::ifstream in(emb_path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(kEmbHeaderSize));
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
      throw StoreError(StoreError::Kind::kTruncatedPayload,
                       emb_path.string() + ": short read");
    }
  }
  m.values.resize(n);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(m.values.data(), raw.data(), raw.size());
  } else {
    for (std::size_t i = 0; i < n; ++i) m.values[i] = GetLe<float>(&raw[4 * i]);
  }
  auto bad = std::find_if(m.values.begin(), m.values.end(),
                          [](float v) { return !std::isfinite(v); });
  if (bad != m.values.end()) {
    throw StoreError(StoreError::Kind::kInvariant,
                     emb_path.string() + ": non-finite value at offset " +
                         std::to_string(bad - m.values.begin()));
  }

  const fs::path idx_path = WithSuffix(stem, ".idx");
  // Frame layers carry no occurrences, so their index file is optional.
  if (m.level == Level::kFrame && !fs::exists(idx_path)) return {std::move(m), {}};
  TokenIndex index = ParseIndex(idx_path, &m.model_id);
  CheckIndexAgainst(index, m.count, idx_path);
  return {std::move(m), std::move(index)};
}

fs::path LayerStem(const fs::path& dir, std::uint32_t layer) {
  char name[32];
  std::snprintf(name, sizeof(name), "layer_%02u", layer);
  return dir / name;
}

bool StoreReport::clean() const {
  if (!violations.empty()) return false;
  return std::all_of(layers.begin(), layers.end(),
                     [](const LayerReport& l) { return l.violations.empty(); });
}

StoreReport ValidateStore(const fs::path& dir) {
  StoreReport report;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    report.violations.push_back(dir.string() + " is not a directory");
    return report;
  }
  std::vector<fs::path> stems;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".emb") {
      fs::path stem = entry.path();
      stem.replace_extension();
      stems.push_back(stem);
    }
  }
  std::sort(stems.begin(), stems.end());

  std::optional<std::pair<fs::path, TokenIndex>> word_index;
  std::optional<std::uint64_t> word_count;
  std::map<std::uint32_t, fs::path> layer_owner;
  for (const auto& stem : stems) {
    LayerReport lr;
    lr.stem = stem;
    try {
      auto [m, index] = ReadLayer(stem);
      lr.layer = m.layer;
      lr.dim = m.dim;
      lr.count = m.count;
      lr.level = m.level;
      for (auto& p : CheckLayer(m, index)) lr.violations.push_back(std::move(p));
      if (m.level == Level::kWord) {
        if (word_count && *word_count != m.count) {
          report.violations.push_back(
              "word-level count mismatch: " + stem.filename().string() +
              " has " + std::to_string(m.count) + " rows, expected " +
              std::to_string(*word_count));
        }
        if (!word_count) word_count = m.count;
        if (!word_index) {
          word_index.emplace(stem, std::move(index));
        } else if (!(word_index->second == index)) {
          report.violations.push_back(
              "word-level token index of " + stem.filename().string() +
              " differs from " + word_index->first.filename().string() +
              " (" + std::to_string(index.size()) + " vs " +
              std::to_string(word_index->second.size()) + " occurrences)");
        }
        auto [it, fresh] = layer_owner.emplace(m.layer, stem);
        if (!fresh) {
          report.violations.push_back("layer " + std::to_string(m.layer) +
                                      " appears in both " +
                                      it->second.filename().string() + " and " +
                                      stem.filename().string());
        }
      }
    } catch (const Error& e) {
      lr.violations.push_back(e.what());
    }
    report.layers.push_back(std::move(lr));
  }
  std::stable_sort(report.layers.begin(), report.layers.end(),
                   [](const LayerReport& a, const LayerReport& b) {
                     return a.layer < b.layer;
                   });
  return report;
}

}  // namespace lca
