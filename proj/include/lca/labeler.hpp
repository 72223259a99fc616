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
#include <unordered_map>
#include <string>
#include <vector>

#include "lca/clustering.hpp"
#include "lca/error.hpp"

namespace lca {

struct ConceptId {
  std::uint32_t layer = 0;
  std::uint32_t cluster = 0;

  bool operator==(const ConceptId&) const = default;
  auto operator<=>(const ConceptId&) const = default;
};

std::string ToString(const ConceptId& id);  // "L03/C141"

inline constexpr const char* kPromptPreamble =
    "Assistant is a large language model trained by OpenAI.";
inline constexpr const char* kPromptInstruction =
    "Instructions:\n"
    "Give a short and concise label that best describes the following list of "
    "words:";

struct LabelRequest {
  ConceptId concept_id;
  std::vector<std::string> words;  // unique, most frequent first
  std::size_t distinct_words = 0;  // before truncation
  std::string prompt;
  double temperature = 0.0;
  double top_p = 0.95;
};

struct LabelResult {
  ConceptId concept_id;
  std::string label;
  std::string model_name;
  std::string prompt_hash;
  std::string timestamp;  // UTC, ISO 8601
};

struct LabelerConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model_name = "gpt-3.5-turbo";
  std::string api_key_env = "LCA_API_KEY";
  std::size_t max_words = 40;
  unsigned concurrency = 4;
  unsigned max_attempts = 5;
  double backoff_base_seconds = 1.0;
  double backoff_factor = 2.0;
  double timeout_seconds = 60.0;
};

class LabelError : public ServiceError {
 public:
  enum class Kind { kAuth, kRateLimited, kTransient, kMalformed, kRejected };
  LabelError(Kind kind, const std::string& what)
      : ServiceError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// The bracketed word list: ["w1", "w2", ...] with JSON string escaping.
std::string RenderWordList(const std::vector<std::string>& words);

/// Full prompt text: preamble, instruction line and word list, one per line.
std::string RenderPrompt(const std::vector<std::string>& words);

/// Lowercase hex SHA-256 of the prompt bytes.
std::string PromptHash(const std::string& prompt);

/// Unique member surfaces ordered by descending frequency (ties
/// lexicographic), truncated to `max_words`.
LabelRequest BuildLabelRequest(const EncodedConcept& concept_,
                               std::size_t max_words);

/// The chat-completion request body for one label request.
std::string ChatCompletionBody(const LabelRequest& request,
                               const std::string& model_name);

/// Sends one chat completion, retrying transient failures and rate limits.
/// `attempts`, when given, receives the number of HTTP attempts made.
LabelResult LabelConcept(const LabelRequest& request,
                         const LabelerConfig& config,
                         const std::string& api_key,
                         unsigned* attempts = nullptr);

/// JSON-lines cache of LabelResult keyed by prompt hash. Later lines win.
class LabelCache {
 public:
  explicit LabelCache(std::filesystem::path path);

  const LabelResult* Find(const std::string& prompt_hash) const;
  /// Appends and flushes one line. Not thread-safe; callers serialize.
  void Append(const LabelResult& result);
  std::size_t size() const { return entries_.size(); }

 private:
  std::filesystem::path path_;
  std::vector<LabelResult> entries_;
  std::unordered_map<std::string, std::size_t> by_hash_;
};

struct LabelFailure {
  ConceptId concept_id;
  std::string message;
};

struct LabelRunStats {
  std::vector<LabelResult> results;  // request order, cached and fresh
  std::vector<LabelFailure> failures;
  std::size_t network_requests = 0;  // distinct prompts sent
  std::size_t cache_hits = 0;
};

/// Labels every request whose prompt hash is not cached, with at most
/// `config.concurrency` requests in flight. Each fresh result is appended to
/// the cache as soon as it arrives, so an interrupted run resumes where it
/// stopped. Individual failures are collected rather than thrown. Throws
/// UserError when a request needs the network and `api_key` is empty.
LabelRunStats LabelAll(const std::vector<LabelRequest>& requests,
                       const LabelerConfig& config, const std::string& api_key,
                       LabelCache& cache);

}  // namespace lca
