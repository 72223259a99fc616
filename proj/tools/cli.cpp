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

#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "lca/aggregation.hpp"
#include "lca/alignment.hpp"
#include "lca/clustering.hpp"
#include "lca/corpus.hpp"
#include "lca/embedding_store.hpp"
#include "lca/labeler.hpp"
#include "lca/report.hpp"
#include "lca/run_config.hpp"

namespace lca::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> run_dir;
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> layers;
  std::optional<std::string> model_id;

  std::optional<std::string> frames_dir;
  std::optional<std::string> boundaries;

  std::optional<std::uint32_t> k;
  std::optional<std::string> algorithm;
  std::optional<std::uint64_t> min_count;
  std::optional<std::uint64_t> max_per_type;
  std::optional<std::uint32_t> max_iter;
  std::optional<double> rel_tol;
  std::optional<std::uint32_t> n_init;
  bool normalize = false;

  std::optional<double> theta;
  std::optional<std::string> coverage_denominator;
  std::vector<std::string> taxonomies;  // name=path
  std::optional<std::string> polarity_labels;

  std::optional<std::string> base_url;
  std::optional<std::string> model_name;
  std::optional<unsigned> concurrency;
  std::optional<std::size_t> max_words;

  std::optional<std::size_t> top_n;
};

std::vector<std::uint32_t> ParseLayers(const std::string& spec) {
  std::vector<std::uint32_t> layers;
  if (spec == "all") return layers;
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find(',', start);
    if (comma == std::string::npos) comma = spec.size();
    const std::string item = spec.substr(start, comma - start);
    const auto dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        layers.push_back(static_cast<std::uint32_t>(std::stoul(item)));
      } else {
        const auto lo = std::stoul(item.substr(0, dash));
        const auto hi = std::stoul(item.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument("range");
        for (auto l = lo; l <= hi; ++l) layers.push_back(static_cast<std::uint32_t>(l));
      }
    } catch (const std::exception&) {
      throw UserError("bad --layers value '" + spec +
                      "' (use all, 3, 0,4,8 or 0-12)");
    }
    start = comma + 1;
  }
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  return layers;
}

RunConfig Effective(const Overrides& o) {
  RunConfig c;
  if (o.config) c = LoadConfig(*o.config, c);
  if (o.run_dir) c.run_dir = *o.run_dir;
  if (o.seed) c.seed = *o.seed;
  if (o.layers) c.layers = ParseLayers(*o.layers);
  if (o.model_id) c.model_id = *o.model_id;
  if (o.boundaries) c.boundaries = *o.boundaries;
  if (o.k) c.k = *o.k;
  if (o.algorithm) c.algorithm = ParseAlgorithm(*o.algorithm);
  if (o.min_count) c.min_count = *o.min_count;
  if (o.max_per_type) c.max_per_type = *o.max_per_type;
  if (o.max_iter) c.max_iter = *o.max_iter;
  if (o.rel_tol) c.rel_tol = *o.rel_tol;
  if (o.n_init) c.n_init = *o.n_init;
  if (o.normalize) c.normalize = true;
  if (o.theta) c.theta = *o.theta;
  if (o.coverage_denominator) {
    c.coverage_denominator = ParseCoverageDenominator(*o.coverage_denominator);
  }
  for (const auto& t : o.taxonomies) {
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == t.size()) {
      throw UserError("--taxonomy expects name=path, got '" + t + "'");
    }
    const std::string name = t.substr(0, eq);
    std::erase_if(c.taxonomies,
                  [&](const TaxonomySource& s) { return s.name == name; });
    c.taxonomies.push_back({name, t.substr(eq + 1)});
  }
  if (o.polarity_labels) c.polarity_labels = *o.polarity_labels;
  if (o.base_url) c.labeler.base_url = *o.base_url;
  if (o.model_name) c.labeler.model_name = *o.model_name;
  if (o.concurrency) c.labeler.concurrency = *o.concurrency;
  if (o.max_words) c.labeler.max_words = *o.max_words;
  if (o.top_n) c.report_top_n = *o.top_n;
  return c;
}

void RefuseOverwrite(const std::vector<fs::path>& targets, bool force) {
  if (force) return;
  for (const auto& t : targets) {
    if (fs::exists(t)) {
      throw UserError(t.string() + " already exists; pass --force to overwrite");
    }
  }
}

fs::path WithExt(fs::path stem, const char* ext) {
  stem += ext;
  return stem;
}

// Word-level layers present in the embeddings directory, from headers only.
std::vector<std::uint32_t> WordLayers(const fs::path& emb_dir) {
  std::set<std::uint32_t> layers;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(emb_dir, ec)) {
    if (entry.path().extension() != ".emb") continue;
    EmbeddingMatrix h = ReadLayerHeader(entry.path());
    if (h.level == Level::kWord) layers.insert(h.layer);
  }
  return {layers.begin(), layers.end()};
}

std::vector<std::uint32_t> SelectLayers(const RunConfig& c,
                                        const std::vector<std::uint32_t>& found) {
  if (c.layers.empty()) return found;
  for (auto l : c.layers) {
    if (!std::binary_search(found.begin(), found.end(), l)) {
      throw UserError("requested layer " + std::to_string(l) +
                      " has no word-level embeddings");
    }
  }
  return c.layers;
}

std::string DescribeViolations(const StoreReport& report) {
  std::string msg;
  for (const auto& v : report.violations) msg += "\n  " + v;
  for (const auto& l : report.layers) {
    for (const auto& v : l.violations) {
      msg += "\n  " + l.stem.filename().string() + ": " + v;
    }
  }
  return msg;
}

void WriteProvenance(const RunConfig& c) {
  std::ofstream out(c.run_dir / "config.json", std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write " + (c.run_dir / "config.json").string());
  out << ConfigToJson(c);
}

int CmdAggregate(const RunConfig& c, const Overrides& o, std::ostream& out) {
  const fs::path frames = o.frames_dir ? fs::path(*o.frames_dir)
                                       : c.run_dir / "embeddings" / "frames";
  const fs::path boundaries =
      c.boundaries.empty() ? c.run_dir / "boundaries.tsv" : c.boundaries;
  if (!fs::exists(boundaries)) {
    throw UserError("missing boundaries file " + boundaries.string());
  }
  if (!fs::is_directory(frames)) {
    throw UserError("missing frame directory " + frames.string());
  }
  const fs::path emb = c.run_dir / "embeddings";
  if (!o.force && fs::exists(emb)) {
    for (const auto& entry : fs::directory_iterator(emb)) {
      if (entry.path().extension() == ".emb") {
        throw UserError(emb.string() +
                        " already holds word-level layers; pass --force to "
                        "overwrite");
      }
    }
  }
  const auto words = ParseBoundaries(boundaries);
  const AggregateSummary summary = AggregateRun(frames, words, emb, c.layers);
  const StoreReport report = ValidateStore(emb);
  if (!report.clean()) {
    throw DataError("aggregated store failed validation:" +
                    DescribeViolations(report));
  }
  out << "aggregated " << summary.words << " words into "
      << summary.layers.size() << " layer file(s) under " << emb.string() << "\n";
  return 0;
}

int CmdCluster(RunConfig c, const Overrides& o, std::ostream& out) {
  const fs::path emb = c.run_dir / "embeddings";
  const StoreReport report = ValidateStore(emb);
  if (!report.clean()) {
    throw DataError("embedding store " + emb.string() + " has violations:" +
                    DescribeViolations(report));
  }
  std::vector<std::uint32_t> found;
  for (const auto& l : report.layers) {
    if (l.level == Level::kWord) found.push_back(l.layer);
  }
  if (found.empty()) throw UserError("no word-level layers in " + emb.string());
  const auto layers = SelectLayers(c, found);

  const fs::path clusters = c.run_dir / "clusters";
  std::vector<fs::path> targets;
  for (auto l : layers) {
    targets.push_back(WithExt(LayerStem(clusters, l), ".clusters"));
    targets.push_back(WithExt(LayerStem(clusters, l), ".meta.json"));
  }
  RefuseOverwrite(targets, o.force);
  fs::create_directories(clusters);

  const TokenIndex index = ReadIndex(WithExt(LayerStem(emb, layers.front()), ".idx"));
  const TokenIndex filtered =
      FrequencyFilter(index, c.min_count, c.max_per_type, c.seed);
  out << "frequency filter kept " << filtered.size() << " of " << index.size()
      << " occurrences (min_count=" << c.min_count << ")\n";

  for (auto layer : layers) {
    auto [matrix, layer_index] = ReadLayer(LayerStem(emb, layer));
    if (c.model_id.empty()) c.model_id = matrix.model_id;
    const EmbeddingMatrix selected = SelectRows(matrix, filtered);
    ClusterAssignment a;
    if (c.algorithm == ClusterAlgorithm::kKMeans) {
      KMeansOptions opt;
      opt.k = c.k;
      opt.seed = c.seed;
      opt.max_iter = c.max_iter;
      opt.rel_tol = c.rel_tol;
      opt.n_init = c.n_init;
      opt.normalize = c.normalize;
      a = KMeans(selected, opt);
    } else {
      a = WardAgglomerative(selected, {c.k, c.ward_max_points});
    }
    const auto concepts = ClustersToConcepts(a, filtered, layer);
    WriteClusterFile(WithExt(LayerStem(clusters, layer), ".clusters"), concepts);
    WriteClusterMetadata(WithExt(LayerStem(clusters, layer), ".meta.json"),
                         {layer, c.algorithm, c.seed, selected.count, c.k}, a);
    out << "layer " << layer << ": " << concepts.size() << " concepts, "
        << a.iterations << " iterations, objective "
        << FormatDouble(a.objective) << "\n";
  }
  return 0;
}

std::vector<Taxonomy> LoadTaxonomies(const RunConfig& c, const TokenIndex& index) {
  std::vector<Taxonomy> out;
  for (const auto& t : c.taxonomies) {
    if (!fs::exists(t.path)) {
      throw UserError("missing tag file for taxonomy " + t.name + ": " +
                      t.path.string());
    }
    out.push_back(ParseTaxonomy(t.path, t.name, index));
  }
  if (!c.polarity_labels.empty()) {
    if (!fs::exists(c.polarity_labels)) {
      throw UserError("missing label file " + c.polarity_labels.string());
    }
    out.push_back(BuildPolarityConcepts(ParseLabels(c.polarity_labels), index));
  }
  if (out.empty()) {
    throw UserError("no taxonomies given; use --taxonomy name=path or "
                    "--polarity-labels");
  }
  return out;
}

int CmdAlign(const RunConfig& c, const Overrides& o, std::ostream& out,
             std::ostream& err) {
  CheckTheta(c.theta);
  const fs::path emb = c.run_dir / "embeddings";
  const auto found = WordLayers(emb);
  if (found.empty()) throw UserError("no word-level layers in " + emb.string());
  const auto layers = SelectLayers(c, found);
  const fs::path dir = c.run_dir / "alignment";
  RefuseOverwrite({dir / "alignment.csv", dir / "per_concept.jsonl",
                   dir / "records.json"},
                  o.force);

  const TokenIndex index = ReadIndex(WithExt(LayerStem(emb, layers.front()), ".idx"));
  const auto taxonomies = LoadTaxonomies(c, index);
  LayerwiseResult result = LayerwiseAlignment(
      c.run_dir, taxonomies, {c.theta, c.coverage_denominator}, layers);
  if (!c.model_id.empty()) {
    for (auto& r : result.records) r.model_id = c.model_id;
  }
  if (result.records.empty()) {
    throw DataError("no layer could be aligned; run cluster first");
  }
  fs::create_directories(dir);
  WriteAlignmentCsv(dir / "alignment.csv", result.records);
  WriteConceptDiagnostics(dir / "per_concept.jsonl", result.records);
  WriteAlignmentRecords(dir / "records.json", result.records);
  {
    std::ofstream gaps(dir / "gaps.txt", std::ios::binary | std::ios::trunc);
    for (const auto& g : result.gaps) gaps << g << "\n";
  }
  for (const auto& g : result.gaps) err << "gap: " << g << "\n";
  for (const auto& r : result.records) {
    out << "layer " << r.layer << " " << r.taxonomy << ": lambda "
        << FormatDouble(r.lambda) << " (alignment " << FormatDouble(r.alignment_term)
        << ", coverage " << FormatDouble(r.coverage_term) << ")\n";
  }
  return 0;
}

std::vector<EncodedConcept> LoadConcepts(const RunConfig& c,
                                         const std::vector<std::uint32_t>& layers) {
  std::vector<EncodedConcept> all;
  for (auto layer : layers) {
    const fs::path file = WithExt(LayerStem(c.run_dir / "clusters", layer), ".clusters");
    if (!fs::exists(file)) continue;
    const TokenIndex index =
        ReadIndex(WithExt(LayerStem(c.run_dir / "embeddings", layer), ".idx"));
    auto concepts = ReadClusterFile(file, index, layer);
    std::move(concepts.begin(), concepts.end(), std::back_inserter(all));
  }
  return all;
}

int CmdLabel(const RunConfig& c, const Overrides& o, std::ostream& out,
             std::ostream& err) {
  const auto layers = SelectLayers(c, WordLayers(c.run_dir / "embeddings"));
  const auto concepts = LoadConcepts(c, layers);
  if (concepts.empty()) throw UserError("no clusters to label; run cluster first");

  const fs::path cache_path = c.run_dir / "labels" / "cache.jsonl";
  if (o.force && fs::exists(cache_path)) {
    fs::rename(cache_path, WithExt(cache_path, ".bak"));
  }
  LabelCache cache(cache_path);
  std::vector<LabelRequest> requests;
  std::size_t truncated = 0;
  for (const auto& concept_ : concepts) {
    requests.push_back(BuildLabelRequest(concept_, c.labeler.max_words));
    truncated += requests.back().distinct_words > requests.back().words.size();
  }
  if (truncated > 0) {
    out << truncated << " word list(s) truncated to " << c.labeler.max_words
        << " words\n";
  }
  const char* key = std::getenv(c.labeler.api_key_env.c_str());
  const LabelRunStats stats =
      LabelAll(requests, c.labeler, key ? std::string(key) : std::string(), cache);
  out << "labeled " << stats.results.size() << " of " << requests.size()
      << " concepts (" << stats.network_requests << " requests, "
      << stats.cache_hits << " cache hits)\n";
  for (const auto& f : stats.failures) {
    err << "label failed for " << ToString(f.concept_id) << ": " << f.message << "\n";
  }
  return stats.failures.empty() ? 0 : static_cast<int>(ErrorClass::kService);
}

int CmdReport(const RunConfig& c, const Overrides& o, std::ostream& out,
              std::ostream& err) {
  const fs::path records_path = c.run_dir / "alignment" / "records.json";
  if (!fs::exists(records_path)) {
    throw UserError("nothing to report: " + records_path.string() +
                    " not found (run align first)");
  }
  const auto records = ReadAlignmentRecords(records_path);
  if (records.empty()) throw DataError("alignment records are empty");
  const fs::path dir = c.run_dir / "reports";
  RefuseOverwrite({dir / "alignment.csv", dir / "concepts.md", dir / "curves"},
                  o.force);
  if (o.force) fs::remove_all(dir / "curves");

  const ReportFiles files = EmitAlignmentReport(records, dir);

  std::set<std::uint32_t> layer_set;
  for (const auto& r : records) layer_set.insert(r.layer);
  const std::vector<std::uint32_t> layers(layer_set.begin(), layer_set.end());
  const auto concepts = LoadConcepts(c, layers);
  std::map<ConceptId, std::string> labels;
  const fs::path cache_path = c.run_dir / "labels" / "cache.jsonl";
  if (fs::exists(cache_path)) {
    LabelCache cache(cache_path);
    for (const auto& concept_ : concepts) {
      const auto req = BuildLabelRequest(concept_, c.labeler.max_words);
      if (const LabelResult* hit = cache.Find(PromptHash(req.prompt))) {
        labels[req.concept_id] = hit->label;
      }
    }
  }
  EmitConceptReport(concepts, labels, records, c.report_top_n, dir / "concepts.md");

  std::vector<std::string> gaps;
  {
    std::ifstream in(c.run_dir / "alignment" / "gaps.txt");
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) gaps.push_back(line);
    }
  }
  std::error_code ec;
  if (fs::is_directory(c.run_dir / "embeddings", ec)) {
    for (auto l : WordLayers(c.run_dir / "embeddings")) {
      if (!layer_set.contains(l)) {
        gaps.push_back("layer " + std::to_string(l) + ": no alignment records");
      }
    }
  }
  {
    std::ofstream g(dir / "gaps.txt", std::ios::binary | std::ios::trunc);
    for (const auto& line : gaps) g << line << "\n";
  }
  for (const auto& line : gaps) err << "gap: " << line << "\n";
  out << "wrote " << files.csv.string() << ", " << files.curves.size()
      << " curve file(s), " << (dir / "concepts.md").string() << " ("
      << labels.size() << " labeled concepts)\n";
  return 0;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Latent concept discovery and taxonomy alignment", "lca"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "JSON run configuration");
  app.add_option("--run-dir", o.run_dir, "Run directory");
  app.add_flag("--force", o.force, "Overwrite existing outputs");
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--layers", o.layers, "all, or a list such as 0,4,8 or 0-12");
  app.add_option("--model-id", o.model_id, "Model identifier for reports");

  auto* aggregate = app.add_subcommand(
      "aggregate", "Average frame vectors inside word boundaries");
  aggregate->add_option("--frames-dir", o.frames_dir,
                        "Frame layers (<dir>/<utterance>/layer_NN.emb)");
  aggregate->add_option("--boundaries", o.boundaries, "Word boundary TSV");

  auto* cluster = app.add_subcommand("cluster", "Cluster each word-level layer");
  cluster->add_option("-k,--clusters", o.k, "Number of clusters (default 600)");
  cluster->add_option("--algorithm", o.algorithm, "kmeans or ward");
  cluster->add_option("--min-count", o.min_count, "Minimum surface frequency");
  cluster->add_option("--max-per-type", o.max_per_type,
                      "Cap on occurrences per surface form (0 = none)");
  cluster->add_option("--max-iter", o.max_iter, "K-means iteration limit");
  cluster->add_option("--rel-tol", o.rel_tol, "K-means relative tolerance");
  cluster->add_option("--n-init", o.n_init, "K-means seedings to try; the lowest objective wins");
  cluster->add_flag("--normalize", o.normalize, "Cluster unit-length vectors");

  auto* align = app.add_subcommand("align", "Score concepts against taxonomies");
  align->add_option("--theta", o.theta, "Purity threshold in (0, 1]");
  align->add_option("--coverage-denominator", o.coverage_denominator,
                    "encoded (default) or linguistic");
  align->add_option("--taxonomy", o.taxonomies, "name=path of a tag TSV");
  align->add_option("--polarity-labels", o.polarity_labels,
                    "Sentence label TSV for polarity concepts");

  auto* label = app.add_subcommand("label", "Label concepts with a chat model");
  label->add_option("--base-url", o.base_url, "OpenAI-compatible API base URL");
  label->add_option("--model-name", o.model_name, "Chat model name");
  label->add_option("--concurrency", o.concurrency, "Requests in flight");
  label->add_option("--max-words", o.max_words, "Words per prompt");

  auto* report = app.add_subcommand("report", "Write tables, curves and concept report");
  report->add_option("--top-n", o.top_n, "Words shown per concept");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorClass::kUser);
  }

  try {
    const RunConfig config = Effective(o);
    if (!fs::is_directory(config.run_dir)) {
      throw UserError("run directory " + config.run_dir.string() +
                      " does not exist");
    }
    WriteProvenance(config);
    if (aggregate->parsed()) return CmdAggregate(config, o, out);
    if (cluster->parsed()) return CmdCluster(config, o, out);
    if (align->parsed()) return CmdAlign(config, o, out, err);
    if (label->parsed()) return CmdLabel(config, o, out, err);
    if (report->parsed()) return CmdReport(config, o, out, err);
  } catch (const Error& e) {
    err << "lca: error: " << e.what() << "\n";
    return static_cast<int>(e.error_class());
  } catch (const fs::filesystem_error& e) {
    err << "lca: error: " << e.what() << "\n";
    return static_cast<int>(ErrorClass::kUser);
  }
  return static_cast<int>(ErrorClass::kUser);
}

}  // namespace lca::cli
