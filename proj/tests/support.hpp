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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "lca/clustering.hpp"
#include "lca/corpus.hpp"
#include "lca/embedding_store.hpp"

namespace httplib {
class Server;
}

namespace lca::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

void WriteText(const std::filesystem::path& path, const std::string& text);
std::string ReadText(const std::filesystem::path& path);

struct MockReply {
  int status = 200;
  std::string body;  // empty with 200: a chat completion echoing `label`
  std::string label = "Mock label";
  std::string retry_after;
};

/// Local chat-completions endpoint. The script decides each reply from the
/// 1-based call number and the request body.
class MockChatServer {
 public:
  using Script = std::function<MockReply(std::size_t call, const std::string& body)>;

  explicit MockChatServer(Script script, double delay_seconds = 0.0);
  ~MockChatServer();
  MockChatServer(const MockChatServer&) = delete;
  MockChatServer& operator=(const MockChatServer&) = delete;

  std::string base_url() const;
  std::size_t calls() const { return calls_.load(); }
  std::size_t max_in_flight() const { return max_in_flight_.load(); }
  std::vector<std::string> bodies() const;
  std::vector<std::string> auth_headers() const;

 private:
  Script script_;
  double delay_seconds_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
  mutable std::mutex mu_;
  std::vector<std::string> bodies_;
  std::vector<std::string> auth_;
};

/// Chat completion JSON whose first choice carries `content`.
std::string CompletionJson(const std::string& content);

/// Random well-formed (matrix, index) pair. Index entries cover every row.
std::pair<EmbeddingMatrix, TokenIndex> RandomLayer(std::mt19937_64& rng,
                                                   std::uint32_t max_rows,
                                                   std::uint32_t max_dim);

/// Row-major matrix of `n` x `dim` uniform values in [-1, 1).
EmbeddingMatrix RandomMatrix(std::mt19937_64& rng, std::uint64_t n,
                             std::uint32_t dim);

/// Synthetic run with `clusters` tight Gaussian blobs on a lattice, each blob
/// holding `per_cluster` occurrences of one surface form and one tag.
struct PlantedRun {
  std::filesystem::path run_dir;
  std::filesystem::path tag_file;
  std::uint32_t clusters = 0;
  std::uint64_t points = 0;
  std::vector<std::uint32_t> layers;
};
PlantedRun WritePlantedRun(const std::filesystem::path& run_dir,
                           std::uint32_t clusters, std::uint32_t per_cluster,
                           std::uint32_t dim, std::vector<std::uint32_t> layers,
                           std::uint64_t seed);

/// Random alignment problem: up to `max_encoded` encoded concepts over up to
/// `max_occurrences` occurrences, some occurrences untagged and some tags
/// holding unclustered occurrences. The `*_sets` fields hold the same
/// concepts as sets of occurrence ids for the oracle.
struct AlignmentInstance {
  std::vector<EncodedConcept> encoded;
  Taxonomy taxonomy;
  std::vector<std::set<int>> encoded_sets;
  std::vector<std::set<int>> tag_sets;  // in lexicographic tag order
};
AlignmentInstance RandomAlignmentInstance(std::mt19937_64& rng, int max_encoded,
                                          int max_tags, int max_occurrences);

}  // namespace lca::testing
