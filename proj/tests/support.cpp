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

#include "support.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace lca::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "lca-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void WriteText(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string CompletionJson(const std::string& content) {
  nlohmann::json j;
  j["id"] = "chatcmpl-mock";
  j["object"] = "chat.completion";
  j["choices"] = {{{"index", 0},
                   {"message", {{"role", "assistant"}, {"content", content}}},
                   {"finish_reason", "stop"}}};
  return j.dump();
}

MockChatServer::MockChatServer(Script script, double delay_seconds)
    : script_(std::move(script)),
      delay_seconds_(delay_seconds),
      server_(std::make_unique<httplib::Server>()) {
  server_->new_task_queue = [] { return new httplib::ThreadPool(16); };
  server_->Post(R"(.*/chat/completions)", [this](const httplib::Request& req,
                                                 httplib::Response& res) {
    const std::size_t now = ++in_flight_;
    std::size_t seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    const std::size_t call = ++calls_;
    {
      std::lock_guard<std::mutex> lock(mu_);
      bodies_.push_back(req.body);
      auth_.push_back(req.get_header_value("Authorization"));
    }
    if (delay_seconds_ > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(delay_seconds_));
    }
    MockReply reply = script_(call, req.body);
    res.status = reply.status;
    if (!reply.retry_after.empty()) res.set_header("Retry-After", reply.retry_after);
    std::string body = reply.body;
    if (body.empty() && reply.status == 200) body = CompletionJson(reply.label);
    res.set_content(body, "application/json");
    --in_flight_;
  });
  port_ = server_->bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockChatServer::~MockChatServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockChatServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
}

std::vector<std::string> MockChatServer::bodies() const {
  std::lock_guard<std::mutex> lock(mu_);
  return bodies_;
}

std::vector<std::string> MockChatServer::auth_headers() const {
  std::lock_guard<std::mutex> lock(mu_);
  return auth_;
}

EmbeddingMatrix RandomMatrix(std::mt19937_64& rng, std::uint64_t n,
                             std::uint32_t dim) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  EmbeddingMatrix m;
  m.dim = dim;
  m.count = n;
  m.level = Level::kWord;
  m.values.resize(n * dim);
  for (auto& v : m.values) v = u(rng);
  return m;
}

std::pair<EmbeddingMatrix, TokenIndex> RandomLayer(std::mt19937_64& rng,
                                                   std::uint32_t max_rows,
                                                   std::uint32_t max_dim) {
  std::uniform_int_distribution<std::uint32_t> rows(1, max_rows);
  std::uniform_int_distribution<std::uint32_t> dims(1, max_dim);
  std::uniform_int_distribution<std::uint32_t> layer(0, 48);
  std::uniform_int_distribution<int> letter('a', 'z');
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_real_distribution<float> wide(-1e6f, 1e6f);
  const std::uint32_t n = rows(rng);
  EmbeddingMatrix m = RandomMatrix(rng, n, dims(rng));
  m.layer = layer(rng);
  for (std::size_t i = 0; i < m.values.size(); i += 3) m.values[i] = wide(rng);
  m.model_id = "model-" + std::to_string(rng() % 1000);
  TokenIndex index;
  for (std::uint32_t r = 0; r < n; ++r) {
    TokenOccurrence occ;
    occ.sentence_id = "s" + std::to_string(r / 4);
    occ.position = r % 4;
    const int l = len(rng);
    for (int c = 0; c < l; ++c) occ.surface += static_cast<char>(letter(rng));
    if (rng() % 5 == 0) occ.surface += "\xc3\xa9";  // a UTF-8 character
    occ.row = r;
    index.entries.push_back(std::move(occ));
  }
  return {std::move(m), std::move(index)};
}

PlantedRun WritePlantedRun(const fs::path& run_dir, std::uint32_t clusters,
                           std::uint32_t per_cluster, std::uint32_t dim,
                           std::vector<std::uint32_t> layers,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  const std::uint64_t n = std::uint64_t{clusters} * per_cluster;

  // Centres on a lattice with spacing 100: at least 100 sigma apart.
  std::vector<std::vector<float>> centres(clusters, std::vector<float>(dim, 0.0f));
  for (std::uint32_t c = 0; c < clusters; ++c) {
    std::uint32_t code = c;
    for (std::uint32_t d = 0; d < dim && code > 0; ++d) {
      centres[c][d] = 100.0f * static_cast<float>(code % 5);
      code /= 5;
    }
  }

  // Occurrences are shuffled so rows do not follow cluster order.
  std::vector<std::uint32_t> cluster_of(n);
  for (std::uint64_t i = 0; i < n; ++i) cluster_of[i] = static_cast<std::uint32_t>(i / per_cluster);
  std::shuffle(cluster_of.begin(), cluster_of.end(), rng);

  TokenIndex index;
  std::ostringstream tags;
  for (std::uint64_t r = 0; r < n; ++r) {
    TokenOccurrence occ;
    occ.sentence_id = "utt" + std::to_string(r / 10);
    occ.position = r % 10;
    occ.surface = "w" + std::to_string(cluster_of[r]);
    occ.row = r;
    tags << occ.sentence_id << '\t' << occ.position << '\t' << occ.surface
         << "\tT" << cluster_of[r] << '\n';
    index.entries.push_back(std::move(occ));
  }

  fs::create_directories(run_dir / "embeddings");
  for (std::uint32_t layer : layers) {
    EmbeddingMatrix m;
    m.layer = layer;
    m.dim = dim;
    m.count = n;
    m.level = Level::kWord;
    m.model_id = "planted";
    m.values.resize(n * dim);
    for (std::uint64_t r = 0; r < n; ++r) {
      for (std::uint32_t d = 0; d < dim; ++d) {
        m.values[r * dim + d] = centres[cluster_of[r]][d] + noise(rng);
      }
    }
    WriteLayer(m, index, LayerStem(run_dir / "embeddings", layer));
  }
  PlantedRun planted;
  planted.run_dir = run_dir;
  planted.tag_file = run_dir / "planted_tags.tsv";
  WriteText(planted.tag_file, tags.str());
  planted.clusters = clusters;
  planted.points = n;
  planted.layers = std::move(layers);
  return planted;
}

AlignmentInstance RandomAlignmentInstance(std::mt19937_64& rng, int max_encoded,
                                          int max_tags, int max_occurrences) {
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  const int n = pick(1, max_occurrences);
  const int num_encoded = pick(1, std::min(max_encoded, n));
  const int num_tags = pick(1, max_tags);
  const int tagged_percent = pick(50, 100);
  const int clustered_percent = pick(60, 100);

  std::vector<TokenOccurrence> occ(n);
  for (int i = 0; i < n; ++i) {
    occ[i] = {"s" + std::to_string(i / 5), static_cast<std::uint64_t>(i % 5),
              "w" + std::to_string(i % 7), static_cast<std::uint64_t>(i)};
  }

  AlignmentInstance inst;
  inst.taxonomy.name = "random";
  std::map<std::string, std::set<int>> tags;
  for (int i = 0; i < n; ++i) {
    if (pick(1, 100) > tagged_percent) continue;
    const std::string tag = "T" + std::to_string(pick(0, num_tags - 1));
    inst.taxonomy.concepts[tag].push_back(occ[i]);
    tags[tag].insert(i);
  }
  if (tags.empty()) {
    inst.taxonomy.concepts["T0"].push_back(occ[0]);
    tags["T0"].insert(0);
  }
  for (auto& [tag, members] : tags) inst.tag_sets.push_back(members);

  // Every encoded concept gets one seed occurrence so none is empty.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> members(num_encoded);
  for (int c = 0; c < num_encoded; ++c) members[c].push_back(order[c]);
  for (int i = num_encoded; i < n; ++i) {
    if (pick(1, 100) > clustered_percent) continue;
    members[pick(0, num_encoded - 1)].push_back(order[i]);
  }
  for (int c = 0; c < num_encoded; ++c) {
    std::sort(members[c].begin(), members[c].end());
    EncodedConcept e;
    e.layer = 0;
    e.cluster_id = static_cast<std::uint32_t>(c);
    for (int i : members[c]) e.members.push_back(occ[i]);
    inst.encoded.push_back(std::move(e));
    inst.encoded_sets.emplace_back(members[c].begin(), members[c].end());
  }
  return inst;
}

}  // namespace lca::testing
