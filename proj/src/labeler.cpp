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

#include "lca/labeler.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace lca {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string ToString(const ConceptId& id) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "L%02u/C%u", id.layer, id.cluster);
  return buf;
}

std::string RenderWordList(const std::vector<std::string>& words) {
  std::string out = "[";
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ", ";
    out += json(words[i]).dump(-1, ' ', false,
                               json::error_handler_t::replace);
  }
  out += "]";
  return out;
}

std::string RenderPrompt(const std::vector<std::string>& words) {
  return std::string(kPromptPreamble) + "\n" + kPromptInstruction + "\n" +
         RenderWordList(words);
}

std::string PromptHash(const std::string& prompt) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(prompt.data(), prompt.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorClass::kData, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xf];
  }
  return hex;
}

LabelRequest BuildLabelRequest(const EncodedConcept& concept_,
                               std::size_t max_words) {
  std::map<std::string, std::size_t> freq;
  for (const auto& occ : concept_.members) ++freq[occ.surface];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(),
                                                          freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  LabelRequest req;
  req.concept_id = {concept_.layer, concept_.cluster_id};
  req.distinct_words = ranked.size();
  const std::size_t keep =
      max_words == 0 ? ranked.size() : std::min(max_words, ranked.size());
  for (std::size_t i = 0; i < keep; ++i) req.words.push_back(ranked[i].first);
  if (req.words.empty()) {
    throw DataError("concept " + ToString(req.concept_id) + " has no words");
  }
  req.prompt = RenderPrompt(req.words);
  return req;
}

std::string ChatCompletionBody(const LabelRequest& request,
                               const std::string& model_name) {
  json body;
  body["model"] = model_name;
  body["messages"] = json::array(
      {{{"role", "system"}, {"content", kPromptPreamble}},
       {{"role", "user"},
        {"content", std::string(kPromptInstruction) + "\n" +
                        RenderWordList(request.words)}}});
  body["temperature"] = request.temperature;
  body["top_p"] = request.top_p;
  return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

namespace {

std::string UtcTimestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string Excerpt(const std::string& body) {
  constexpr std::size_t kMax = 200;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

std::string Trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

// First non-blank line of the completion, trimmed.
std::string ExtractLabel(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
      j["choices"].empty()) {
    throw LabelError(LabelError::Kind::kMalformed,
                     "malformed completion response: " + Excerpt(body));
  }
  const json& msg = j["choices"][0].value("message", json::object());
  if (!msg.contains("content") || !msg["content"].is_string()) {
    throw LabelError(LabelError::Kind::kMalformed,
                     "completion response has no message content: " +
                         Excerpt(body));
  }
  const std::string content = msg["content"].get<std::string>();
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t nl = content.find('\n', start);
    if (nl == std::string::npos) nl = content.size();
    std::string line = Trim(std::string_view(content).substr(start, nl - start));
    if (!line.empty()) return line;
    start = nl + 1;
  }
  throw LabelError(LabelError::Kind::kMalformed,
                   "completion response has an empty label: " + Excerpt(body));
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix + /chat/completions
};

Endpoint ParseEndpoint(const std::string& base_url) {
  const auto scheme = base_url.find("://");
  if (base_url.empty() || scheme == std::string::npos) {
    throw UserError("labeler base_url must look like https://host/v1, got '" +
                    base_url + "'");
  }
  const auto slash = base_url.find('/', scheme + 3);
  Endpoint ep;
  ep.origin = base_url.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : base_url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  ep.path = prefix + "/chat/completions";
  return ep;
}

std::optional<double> RetryAfterSeconds(const httplib::Result& res) {
  if (!res || !res->has_header("Retry-After")) return std::nullopt;
  const std::string v = res->get_header_value("Retry-After");
  char* end = nullptr;
  const double s = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || !std::isfinite(s) || s < 0) return std::nullopt;
  return s;
}

}  // namespace

LabelResult LabelConcept(const LabelRequest& request,
                         const LabelerConfig& config,
                         const std::string& api_key, unsigned* attempts) {
  if (api_key.empty()) {
    throw UserError("no API credential: set " + config.api_key_env);
  }
  const Endpoint ep = ParseEndpoint(config.base_url);
  const std::string body = ChatCompletionBody(request, config.model_name);
  httplib::Headers headers = {{"Authorization", "Bearer " + api_key}};

  httplib::Client client(ep.origin);
  const auto timeout = std::chrono::duration<double>(config.timeout_seconds);
  client.set_connection_timeout(
      std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(
      std::chrono::duration_cast<std::chrono::microseconds>(timeout));

  const unsigned max_attempts = std::max(1u, config.max_attempts);
  double backoff = config.backoff_base_seconds;
  std::string last_error;
  for (unsigned attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempts) *attempts = attempt;
    auto res = client.Post(ep.path, headers, body, "application/json");
    std::optional<double> wait;
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      LabelResult out;
      out.concept_id = request.concept_id;
      out.label = ExtractLabel(res->body);
      out.model_name = config.model_name;
      out.prompt_hash = PromptHash(request.prompt);
      out.timestamp = UtcTimestamp();
      return out;
    } else if (res->status == 401 || res->status == 403) {
      throw LabelError(LabelError::Kind::kAuth,
                       "credential rejected (HTTP " +
                           std::to_string(res->status) + "): " +
                           Excerpt(res->body));
    } else if (res->status == 429) {
      last_error = "rate limited (HTTP 429)";
      wait = RetryAfterSeconds(res);
    } else if (res->status >= 500) {
      last_error = "server error (HTTP " + std::to_string(res->status) + ")";
    } else {
      throw LabelError(LabelError::Kind::kRejected,
                       "request rejected (HTTP " + std::to_string(res->status) +
                           "): " + Excerpt(res->body));
    }
    if (attempt == max_attempts) break;
    std::this_thread::sleep_for(
        std::chrono::duration<double>(wait.value_or(backoff)));
    backoff *= config.backoff_factor;
  }
  const bool limited = last_error.starts_with("rate limited");
  throw LabelError(
      limited ? LabelError::Kind::kRateLimited : LabelError::Kind::kTransient,
      "giving up after " + std::to_string(max_attempts) +
          " attempts: " + last_error);
}

LabelCache::LabelCache(fs::path path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    // A torn final line from an interrupted run is ignored.
    if (j.is_discarded() || !j.is_object()) continue;
    try {
      LabelResult r;
      r.concept_id.layer = j.at("concept_id").at("layer").get<std::uint32_t>();
      r.concept_id.cluster =
          j.at("concept_id").at("cluster").get<std::uint32_t>();
      r.label = j.at("label").get<std::string>();
      r.model_name = j.at("model_name").get<std::string>();
      r.prompt_hash = j.at("prompt_hash").get<std::string>();
      r.timestamp = j.value("timestamp", "");
      auto [it, fresh] = by_hash_.emplace(r.prompt_hash, entries_.size());
      if (fresh) {
        entries_.push_back(std::move(r));
      } else {
        entries_[it->second] = std::move(r);
      }
    } catch (const json::exception&) {
      continue;
    }
  }
}

const LabelResult* LabelCache::Find(const std::string& prompt_hash) const {
  auto it = by_hash_.find(prompt_hash);
  return it == by_hash_.end() ? nullptr : &entries_[it->second];
}

void LabelCache::Append(const LabelResult& r) {
  json j;
  j["concept_id"] = {{"layer", r.concept_id.layer},
                     {"cluster", r.concept_id.cluster}};
  j["label"] = r.label;
  j["model_name"] = r.model_name;
  j["prompt_hash"] = r.prompt_hash;
  j["timestamp"] = r.timestamp;
  if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw UserError("cannot append to label cache " + path_.string());
  out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  out.flush();
  auto [it, fresh] = by_hash_.emplace(r.prompt_hash, entries_.size());
  if (fresh) {
    entries_.push_back(r);
  } else {
    entries_[it->second] = r;
  }
}

LabelRunStats LabelAll(const std::vector<LabelRequest>& requests,
                       const LabelerConfig& config, const std::string& api_key,
                       LabelCache& cache) {
  LabelRunStats stats;
  std::vector<std::string> hashes;
  hashes.reserve(requests.size());
  // prompt hash -> request positions waiting on it
  std::map<std::string, std::vector<std::size_t>> pending;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    hashes.push_back(PromptHash(requests[i].prompt));
    if (!cache.Find(hashes.back())) pending[hashes.back()].push_back(i);
  }
  std::vector<std::string> work;
  for (const auto& [hash, positions] : pending) work.push_back(hash);
  std::sort(work.begin(), work.end(), [&](const auto& a, const auto& b) {
    return pending[a].front() < pending[b].front();
  });

  std::map<std::string, std::string> failed;
  if (!work.empty()) {
    if (api_key.empty()) {
      throw UserError(std::to_string(work.size()) +
                      " concept(s) need labels but no API credential is set; "
                      "export " + config.api_key_env +
                      " and point the labeler at an OpenAI-compatible base URL");
    }
    ParseEndpoint(config.base_url);  // reject a bad URL before any worker starts
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t w = next++; w < work.size(); w = next++) {
        const LabelRequest& req = requests[pending[work[w]].front()];
        try {
          LabelResult r = LabelConcept(req, config, api_key);
          std::lock_guard<std::mutex> lock(mu);
          cache.Append(r);
        } catch (const Error& e) {
          std::lock_guard<std::mutex> lock(mu);
          failed[work[w]] = e.what();
        }
      }
    };
    const unsigned n =
        std::min<std::size_t>(std::max(1u, config.concurrency), work.size());
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    stats.network_requests = work.size();
  }

  for (std::size_t i = 0; i < requests.size(); ++i) {
    const bool fresh = pending.contains(hashes[i]);
    if (auto it = failed.find(hashes[i]); it != failed.end()) {
      stats.failures.push_back({requests[i].concept_id, it->second});
      continue;
    }
    const LabelResult* cached = cache.Find(hashes[i]);
    if (!cached) continue;
    LabelResult r = *cached;
    r.concept_id = requests[i].concept_id;
    stats.results.push_back(std::move(r));
    if (!fresh) ++stats.cache_hits;
  }
  return stats;
}

}  // namespace lca
