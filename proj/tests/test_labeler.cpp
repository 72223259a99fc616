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

#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "lca/error.hpp"
#include "lca/labeler.hpp"
#include "support.hpp"

using namespace lca;
using lca::testing::MockChatServer;
using lca::testing::MockReply;
using lca::testing::TempDir;

namespace {

LabelerConfig FastConfig(const MockChatServer& server) {
  LabelerConfig c;
  c.base_url = server.base_url();
  c.backoff_base_seconds = 0.01;
  c.timeout_seconds = 10;
  return c;
}

LabelRequest RequestFor(std::vector<std::string> words, std::uint32_t cluster = 0) {
  LabelRequest r;
  r.concept_id = {1, cluster};
  r.words = std::move(words);
  r.distinct_words = r.words.size();
  r.prompt = RenderPrompt(r.words);
  return r;
}

std::vector<LabelRequest> ManyRequests(int n) {
  std::vector<LabelRequest> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(RequestFor({"w" + std::to_string(i), "x"}, static_cast<std::uint32_t>(i)));
  }
  return out;
}

MockReply Ok(std::size_t, const std::string&) { return {}; }

}  // namespace

TEST_CASE("prompt matches the golden file byte for byte") {
  const std::string golden =
      lca::testing::ReadText(std::filesystem::path(LCA_TEST_DATA_DIR) / "prompt_good_great.txt");
  REQUIRE_FALSE(golden.empty());
  CHECK(RenderPrompt({"good", "great"}) == golden);
}

TEST_CASE("word list rendering") {
  CHECK(RenderWordList({"only"}) == "[\"only\"]");
  CHECK(RenderWordList({"good", "great"}) == "[\"good\", \"great\"]");
  const std::string quoted = RenderWordList({"say \"hi\"", "back\\slash"});
  CHECK(quoted == R"(["say \"hi\"", "back\\slash"])");
  CHECK(nlohmann::json::parse(quoted) ==
        nlohmann::json::array({"say \"hi\"", "back\\slash"}));
}

TEST_CASE("prompt hash is a stable SHA-256") {
  CHECK(PromptHash("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(PromptHash(RenderPrompt({"a"})) == PromptHash(RenderPrompt({"a"})));
}

TEST_CASE("label requests list unique words by frequency") {
  EncodedConcept c;
  c.layer = 3;
  c.cluster_id = 141;
  for (const char* w : {"b", "a", "c", "a", "b", "a", "d"}) {
    c.members.push_back({"s", c.members.size(), w, c.members.size()});
  }
  const LabelRequest r = BuildLabelRequest(c, 3);
  CHECK(r.words == std::vector<std::string>{"a", "b", "c"});
  CHECK(r.distinct_words == 4);
  CHECK(ToString(r.concept_id) == "L03/C141");
  CHECK(r.prompt == RenderPrompt(r.words));
}

TEST_CASE("chat body carries the published settings") {
  const auto body = nlohmann::json::parse(
      ChatCompletionBody(RequestFor({"good", "great"}), "gpt-test"));
  CHECK(body["model"] == "gpt-test");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["top_p"] == 0.95);
  REQUIRE(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][0]["content"] == kPromptPreamble);
  CHECK(body["messages"][1]["content"] ==
        std::string(kPromptInstruction) + "\n[\"good\", \"great\"]");
}

TEST_CASE("label_concept passes the label through") {
  MockChatServer server([](std::size_t, const std::string&) {
    MockReply r;
    r.label = "  Colors \nsecond line";
    return r;
  });
  unsigned attempts = 0;
  const LabelResult r =
      LabelConcept(RequestFor({"red", "blue"}), FastConfig(server), "k-123", &attempts);
  CHECK(r.label == "Colors");
  CHECK(attempts == 1);
  CHECK(r.prompt_hash == PromptHash(RenderPrompt({"red", "blue"})));
  CHECK(server.auth_headers().at(0) == "Bearer k-123");
}

TEST_CASE("429 twice then success takes 3 attempts") {
  MockChatServer server([](std::size_t call, const std::string&) {
    MockReply r;
    if (call <= 2) {
      r.status = 429;
      r.body = "{\"error\":\"slow down\"}";
      r.retry_after = "0";
    }
    return r;
  });
  unsigned attempts = 0;
  const LabelResult r =
      LabelConcept(RequestFor({"a"}), FastConfig(server), "key", &attempts);
  CHECK(attempts == 3);
  CHECK(server.calls() == 3);
  CHECK(r.label == "Mock label");
}

TEST_CASE("401 fails at once") {
  MockChatServer server([](std::size_t, const std::string&) {
    return MockReply{401, "{\"error\":\"bad key\"}", "Mock label", ""};
  });
  unsigned attempts = 0;
  try {
    LabelConcept(RequestFor({"a"}), FastConfig(server), "key", &attempts);
    FAIL("expected an auth error");
  } catch (const LabelError& e) {
    CHECK(e.kind() == LabelError::Kind::kAuth);
  }
  CHECK(attempts == 1);
  CHECK(server.calls() == 1);
}

TEST_CASE("server errors are retried up to the attempt limit") {
  MockChatServer server([](std::size_t, const std::string&) { return MockReply{503, "busy", "Mock label", ""}; });
  LabelerConfig c = FastConfig(server);
  c.backoff_base_seconds = 0.001;
  try {
    LabelConcept(RequestFor({"a"}), c, "key");
    FAIL("expected failure");
  } catch (const LabelError& e) {
    CHECK(e.kind() == LabelError::Kind::kTransient);
  }
  CHECK(server.calls() == 5);
}

TEST_CASE("malformed responses are reported with the body") {
  MockChatServer server([](std::size_t, const std::string&) { return MockReply{200, "not json", "Mock label", ""}; });
  try {
    LabelConcept(RequestFor({"a"}), FastConfig(server), "key");
    FAIL("expected failure");
  } catch (const LabelError& e) {
    CHECK(e.kind() == LabelError::Kind::kMalformed);
    CHECK(std::string(e.what()).find("not json") != std::string::npos);
  }
}

TEST_CASE("label_all: cold cache, warm cache and concurrency bound") {
  TempDir dir;
  MockChatServer server(Ok, 0.002);
  LabelerConfig c = FastConfig(server);
  c.concurrency = 4;
  const auto requests = ManyRequests(600);
  {
    LabelCache cache(dir / "cache.jsonl");
    const LabelRunStats s = LabelAll(requests, c, "key", cache);
    CHECK(s.results.size() == 600);
    CHECK(s.failures.empty());
    CHECK(s.network_requests == 600);
  }
  CHECK(server.calls() == 600);
  CHECK(server.max_in_flight() <= 4);
  CHECK(server.max_in_flight() >= 1);
  {
    LabelCache cache(dir / "cache.jsonl");
    CHECK(cache.size() == 600);
    const LabelRunStats s = LabelAll(requests, c, "", cache);
    CHECK(s.results.size() == 600);
    CHECK(s.cache_hits == 600);
    CHECK(s.network_requests == 0);
  }
  CHECK(server.calls() == 600);
}

TEST_CASE("label_all resumes after an interruption") {
  TempDir dir;
  std::atomic<int> ok{0};
  MockChatServer server([&](std::size_t, const std::string&) {
    // The "process" dies after 100 successful labels.
    return ++ok <= 100 ? MockReply{} : MockReply{503, "gone", "Mock label", ""};
  });
  LabelerConfig c = FastConfig(server);
  c.max_attempts = 1;
  c.concurrency = 1;
  const auto requests = ManyRequests(600);
  {
    LabelCache cache(dir / "cache.jsonl");
    const LabelRunStats s = LabelAll(requests, c, "key", cache);
    CHECK(s.results.size() == 100);
    CHECK(s.failures.size() == 500);
  }
  // A torn final line, as left by a killed process.
  std::ofstream(dir / "cache.jsonl", std::ios::app) << "{\"concept_id\":{\"lay";

  MockChatServer second(Ok);
  c.base_url = second.base_url();
  LabelCache cache(dir / "cache.jsonl");
  const LabelRunStats s = LabelAll(requests, c, "key", cache);
  CHECK(second.calls() == 500);
  CHECK(s.results.size() == 600);
  CHECK(s.cache_hits == 100);
}

TEST_CASE("identical prompts are sent once") {
  TempDir dir;
  MockChatServer server(Ok);
  std::vector<LabelRequest> requests = {RequestFor({"a"}, 0), RequestFor({"a"}, 1)};
  LabelCache cache(dir / "cache.jsonl");
  const LabelRunStats s = LabelAll(requests, FastConfig(server), "key", cache);
  CHECK(server.calls() == 1);
  REQUIRE(s.results.size() == 2);
  CHECK(s.results[1].concept_id.cluster == 1);
}

TEST_CASE("missing credential is a user error only when calls are needed") {
  TempDir dir;
  LabelerConfig c;
  c.base_url = "http://127.0.0.1:9/v1";
  LabelCache cache(dir / "cache.jsonl");
  CHECK_THROWS_AS(LabelAll(ManyRequests(2), c, "", cache), UserError);
  CHECK_NOTHROW(LabelAll({}, c, "", cache));
}

TEST_CASE("bad base URL is a user error") {
  TempDir dir;
  LabelerConfig c;
  LabelCache cache(dir / "cache.jsonl");
  CHECK_THROWS_AS(LabelAll(ManyRequests(1), c, "key", cache), UserError);
}
