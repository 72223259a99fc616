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

#include "lca/run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lca {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string ConfigToJson(const RunConfig& c) {
  ojson j;
  j["run_dir"] = c.run_dir.string();
  j["model_id"] = c.model_id;
  if (c.layers.empty()) {
    j["layers"] = "all";
  } else {
    j["layers"] = c.layers;
  }
  j["K"] = c.k;
  j["theta"] = c.theta;
  j["min_count"] = c.min_count;
  j["max_per_type"] = c.max_per_type;
  j["seed"] = c.seed;
  j["algorithm"] = AlgorithmName(c.algorithm);
  j["max_iter"] = c.max_iter;
  j["rel_tol"] = c.rel_tol;
  j["n_init"] = c.n_init;
  j["normalize"] = c.normalize;
  j["ward_max_points"] = c.ward_max_points;
  j["coverage_denominator"] = CoverageDenominatorName(c.coverage_denominator);
  j["boundaries"] = c.boundaries.string();
  j["taxonomies"] = ojson::array();
  for (const auto& t : c.taxonomies) {
    j["taxonomies"].push_back({{"name", t.name}, {"path", t.path.string()}});
  }
  j["polarity_labels"] = c.polarity_labels.string();
  j["report_top_n"] = c.report_top_n;
  const auto& l = c.labeler;
  j["labeler"] = {{"base_url", l.base_url},
                  {"model_name", l.model_name},
                  {"api_key_env", l.api_key_env},
                  {"max_words", l.max_words},
                  {"concurrency", l.concurrency},
                  {"max_attempts", l.max_attempts},
                  {"backoff_base_seconds", l.backoff_base_seconds},
                  {"backoff_factor", l.backoff_factor},
                  {"timeout_seconds", l.timeout_seconds}};
  return j.dump(2) + "\n";
}

namespace {

template <typename T>
void Take(const ojson& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void TakePath(const ojson& j, const char* key, fs::path& out) {
  if (j.contains(key)) out = j.at(key).get<std::string>();
}

}  // namespace

RunConfig ConfigFromJson(const std::string& text, RunConfig c) {
  ojson j = ojson::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw UserError("config is not a JSON object");
  }
  try {
    TakePath(j, "run_dir", c.run_dir);
    Take(j, "model_id", c.model_id);
    if (j.contains("layers")) {
      const auto& layers = j["layers"];
      if (layers.is_string()) {
        if (layers.get<std::string>() != "all") {
          throw UserError("config 'layers' must be \"all\" or a list");
        }
        c.layers.clear();
      } else {
        c.layers = layers.get<std::vector<std::uint32_t>>();
      }
    }
    Take(j, "K", c.k);
    Take(j, "theta", c.theta);
    Take(j, "min_count", c.min_count);
    Take(j, "max_per_type", c.max_per_type);
    Take(j, "seed", c.seed);
    if (j.contains("algorithm")) {
      c.algorithm = ParseAlgorithm(j["algorithm"].get<std::string>());
    }
    Take(j, "max_iter", c.max_iter);
    Take(j, "rel_tol", c.rel_tol);
    Take(j, "n_init", c.n_init);
    Take(j, "normalize", c.normalize);
    Take(j, "ward_max_points", c.ward_max_points);
    if (j.contains("coverage_denominator")) {
      c.coverage_denominator =
          ParseCoverageDenominator(j["coverage_denominator"].get<std::string>());
    }
    TakePath(j, "boundaries", c.boundaries);
    if (j.contains("taxonomies")) {
      c.taxonomies.clear();
      for (const auto& t : j["taxonomies"]) {
        c.taxonomies.push_back(
            {t.at("name").get<std::string>(), t.at("path").get<std::string>()});
      }
    }
    TakePath(j, "polarity_labels", c.polarity_labels);
    Take(j, "report_top_n", c.report_top_n);
    if (j.contains("labeler")) {
      const auto& l = j["labeler"];
      Take(l, "base_url", c.labeler.base_url);
      Take(l, "model_name", c.labeler.model_name);
      Take(l, "api_key_env", c.labeler.api_key_env);
      Take(l, "max_words", c.labeler.max_words);
      Take(l, "concurrency", c.labeler.concurrency);
      Take(l, "max_attempts", c.labeler.max_attempts);
      Take(l, "backoff_base_seconds", c.labeler.backoff_base_seconds);
      Take(l, "backoff_factor", c.labeler.backoff_factor);
      Take(l, "timeout_seconds", c.labeler.timeout_seconds);
    }
  } catch (const ojson::exception& e) {
    throw UserError(std::string("invalid config: ") + e.what());
  }
  return c;
}

RunConfig LoadConfig(const fs::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ConfigFromJson(ss.str(), std::move(base));
}

bool SameConfig(const RunConfig& a, const RunConfig& b) {
  return ConfigToJson(a) == ConfigToJson(b);
}

}  // namespace lca
