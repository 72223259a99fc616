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

#include "lca/clustering.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "tsv.hpp"

namespace lca {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kChunkRows = 256;

double SquaredDistance(std::span<const float> x, const double* c) {
  double sum = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = static_cast<double>(x[d]) - c[d];
    sum += diff * diff;
  }
  return sum;
}

// Runs fn(begin, end) over fixed row chunks. Chunk boundaries do not depend
// on the thread count, and fn only writes per-row outputs.
template <typename Fn>
void ForEachChunk(std::size_t rows, unsigned threads, Fn&& fn) {
  const std::size_t chunks = (rows + kChunkRows - 1) / kChunkRows;
  if (threads <= 1 || chunks <= 1) {
    fn(std::size_t{0}, rows);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      fn(c * kChunkRows, std::min(rows, (c + 1) * kChunkRows));
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::min<std::size_t>(threads, chunks);
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

void CheckFinite(const EmbeddingMatrix& m) {
  for (float v : m.values) {
    if (!std::isfinite(v)) throw DataError("matrix contains a non-finite value");
  }
}

EmbeddingMatrix Normalized(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (std::size_t i = 0; i < out.count; ++i) {
    auto row = out.Row(i);
    double norm = 0.0;
    for (float v : row) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (float& v : row) v = static_cast<float>(v / norm);
    }
  }
  return out;
}

// Draws a row with probability proportional to its weight.
std::size_t SampleWeighted(const std::vector<double>& w, double total,
                           std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, total);
  double target = u(rng);
  std::size_t chosen = w.size() - 1;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    if (target < w[i]) {
      chosen = i;
      break;
    }
    target -= w[i];
  }
  // Rounding can walk past the last positive weight.
  while (w[chosen] <= 0.0 && chosen > 0) --chosen;
  return chosen;
}

// Greedy k-means++: each step draws 2 + floor(ln k) candidates by D^2
// weighting and keeps the one giving the lowest potential.
std::vector<double> KMeansPlusPlus(const EmbeddingMatrix& m, std::uint32_t k,
                                   std::mt19937_64& rng) {
  const std::size_t n = m.count;
  const std::size_t dim = m.dim;
  const std::size_t trials =
      2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  std::vector<double> centers(static_cast<std::size_t>(k) * dim);
  auto set_center = [&](std::size_t c, std::size_t row) {
    auto x = m.Row(row);
    std::copy(x.begin(), x.end(), centers.begin() + c * dim);
  };

  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  set_center(0, first(rng));
  std::vector<double> min_d(n);
  for (std::size_t i = 0; i < n; ++i) min_d[i] = SquaredDistance(m.Row(i), centers.data());

  std::vector<double> candidate_d(n), best_d(n);
  for (std::uint32_t c = 1; c < k; ++c) {
    const double total = std::accumulate(min_d.begin(), min_d.end(), 0.0);
    if (!(total > 0.0)) {
      // Every row coincides with a chosen center.
      set_center(c, first(rng));
      continue;
    }
    std::size_t best_row = 0;
    double best_potential = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t row = SampleWeighted(min_d, total, rng);
      const auto x = m.Row(row);
      std::vector<double> xd(x.begin(), x.end());
      double potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        candidate_d[i] = std::min(min_d[i], SquaredDistance(m.Row(i), xd.data()));
        potential += candidate_d[i];
      }
      if (potential < best_potential) {
        best_potential = potential;
        best_row = row;
        best_d.swap(candidate_d);
      }
    }
    set_center(c, best_row);
    min_d.swap(best_d);
  }
  return centers;
}

}  // namespace

const char* AlgorithmName(ClusterAlgorithm algorithm) {
  return algorithm == ClusterAlgorithm::kWard ? "ward" : "kmeans";
}

ClusterAlgorithm ParseAlgorithm(const std::string& name) {
  if (name == "kmeans") return ClusterAlgorithm::kKMeans;
  if (name == "ward") return ClusterAlgorithm::kWard;
  throw UserError("unknown clustering algorithm '" + name +
                  "' (expected kmeans or ward)");
}

std::vector<std::uint64_t> ClusterAssignment::ClusterSizes() const {
  std::vector<std::uint64_t> sizes(k, 0);
  for (auto l : labels) ++sizes[l];
  return sizes;
}

namespace {

ClusterAssignment KMeansOnce(const EmbeddingMatrix& m, const KMeansOptions& options,
                             std::uint64_t seed, unsigned threads) {
  const std::size_t n = m.count;
  const std::size_t dim = m.dim;
  const std::uint32_t k = options.k;

  std::mt19937_64 rng(seed);
  ClusterAssignment out;
  out.k = k;
  out.dim = m.dim;
  out.centroids = KMeansPlusPlus(m, k, rng);

  constexpr std::uint32_t kUnassigned = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t>& labels = out.labels;
  labels.assign(n, kUnassigned);
  std::vector<double> dist(n, 0.0);
  std::vector<std::uint64_t> sizes(k, 0);
  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<unsigned char> moved(n, 0);

  for (std::uint32_t iter = 1; iter <= options.max_iter; ++iter) {
    out.iterations = iter;

    // Assignment.
    const double* centers = out.centroids.data();
    ForEachChunk(n, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        auto x = m.Row(i);
        std::uint32_t best = labels[i];
        double best_d = best == kUnassigned
                            ? std::numeric_limits<double>::infinity()
                            : SquaredDistance(x, centers + best * dim);
        for (std::uint32_t c = 0; c < k; ++c) {
          const double d = SquaredDistance(x, centers + c * dim);
          if (d < best_d || (d == best_d && best == kUnassigned)) {
            best_d = d;
            best = c;
          }
        }
        moved[i] = best != labels[i];
        labels[i] = best;
        dist[i] = best_d;
      }
    });
    bool changed = std::any_of(moved.begin(), moved.end(),
                               [](unsigned char b) { return b != 0; });

    std::fill(sizes.begin(), sizes.end(), 0);
    for (auto l : labels) ++sizes[l];

    if (options.repair_empty) {
      for (std::uint32_t c = 0; c < k; ++c) {
        if (sizes[c] != 0) continue;
        std::size_t far = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (sizes[labels[i]] < 2) continue;
          if (far == n || dist[i] > dist[far]) far = i;
        }
        --sizes[labels[far]];
        labels[far] = c;
        sizes[c] = 1;
        dist[far] = 0.0;
        auto x = m.Row(far);
        std::copy(x.begin(), x.end(), out.centroids.begin() + c * dim);
        ++out.repairs;
        changed = true;
      }
    }

    double assigned_objective = 0.0;
    for (double d : dist) assigned_objective += d;

    // Update.
    std::vector<double> previous = out.centroids;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto x = m.Row(i);
      double* s = sums.data() + labels[i] * dim;
      for (std::size_t d = 0; d < dim; ++d) s[d] += x[d];
    }
    for (std::uint32_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        out.centroids[c * dim + d] =
            sums[c * dim + d] / static_cast<double>(sizes[c]);
      }
    }
    std::vector<double> updated(n);
    ForEachChunk(n, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        updated[i] = SquaredDistance(m.Row(i), out.centroids.data() + labels[i] * dim);
      }
    });
    double objective = 0.0;
    for (double d : updated) objective += d;

    if (objective > assigned_objective) {
      out.centroids = std::move(previous);
      out.objective = assigned_objective;
      out.objective_history.push_back(assigned_objective);
      out.converged = true;
      break;
    }
    dist = std::move(updated);
    const double before = out.objective_history.empty()
                              ? std::numeric_limits<double>::infinity()
                              : out.objective_history.back();
    out.objective = objective;
    out.objective_history.push_back(objective);

    if (!changed || objective == 0.0 ||
        (std::isfinite(before) && before - objective <= options.rel_tol * before)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace

ClusterAssignment KMeans(const EmbeddingMatrix& input,
                         const KMeansOptions& options) {
  if (options.k == 0) throw UserError("K must be positive");
  if (options.n_init == 0) throw UserError("n_init must be positive");
  if (input.count < options.k) {
    throw UserError("cannot form " + std::to_string(options.k) +
                    " clusters from " + std::to_string(input.count) + " points");
  }
  CheckFinite(input);
  const EmbeddingMatrix normalized =
      options.normalize ? Normalized(input) : EmbeddingMatrix{};
  const EmbeddingMatrix& m = options.normalize ? normalized : input;
  const unsigned threads = options.threads != 0
                               ? options.threads
                               : std::max(1u, std::thread::hardware_concurrency());

  // Restart r seeds from seed + r * golden-ratio constant; the first restart
  // uses the seed unchanged. Ties keep the earlier restart.
  ClusterAssignment best;
  for (std::uint32_t r = 0; r < options.n_init; ++r) {
    const std::uint64_t seed = options.seed + r * 0x9E3779B97F4A7C15ull;
    ClusterAssignment run = KMeansOnce(m, options, seed, threads);
    if (r == 0 || run.objective < best.objective) best = std::move(run);
  }
  return best;
}

ClusterAssignment WardAgglomerative(const EmbeddingMatrix& m,
                                    const WardOptions& options) {
  const std::size_t n = m.count;
  if (options.k == 0) throw UserError("K must be positive");
  if (n < options.k) {
    throw UserError("cannot form " + std::to_string(options.k) +
                    " clusters from " + std::to_string(n) + " points");
  }
  if (n > options.max_points) {
    throw UserError("ward clustering is limited to " +
                    std::to_string(options.max_points) + " points (got " +
                    std::to_string(n) + "); use kmeans for larger layers");
  }
  CheckFinite(m);

  // Condensed upper triangle, pair (i < j).
  auto at = [n](std::size_t i, std::size_t j) {
    return i * n - i * (i + 1) / 2 + (j - i - 1);
  };
  std::vector<double> cost(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = m.Row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      auto xj = m.Row(j);
      double sq = 0.0;
      for (std::size_t d = 0; d < m.dim; ++d) {
        const double diff = static_cast<double>(xi[d]) - xj[d];
        sq += diff * diff;
      }
      // Merging two singletons raises the sum of squares by half their
      // squared distance.
      cost[at(i, j)] = 0.5 * sq;
    }
  }

  std::vector<double> size(n, 1.0);
  std::vector<unsigned char> active(n, 1);
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<double> nn_cost(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> nn(n, kNone);
  auto rescan = [&](std::size_t i) {
    nn_cost[i] = std::numeric_limits<double>::infinity();
    nn[i] = kNone;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (active[j] && cost[at(i, j)] < nn_cost[i]) {
        nn_cost[i] = cost[at(i, j)];
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) rescan(i);

  for (std::size_t merges = 0; merges + options.k < n; ++merges) {
    std::size_t a = kNone;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && nn[i] != kNone && (a == kNone || nn_cost[i] < nn_cost[a])) {
        a = i;
      }
    }
    const std::size_t b = nn[a];
    const double ab = nn_cost[a];
    const double na = size[a];
    const double nb = size[b];

    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || x == a || x == b) continue;
      const double nx = size[x];
      const double ax = cost[x < a ? at(x, a) : at(a, x)];
      const double bx = cost[x < b ? at(x, b) : at(b, x)];
      cost[x < a ? at(x, a) : at(a, x)] =
          ((na + nx) * ax + (nb + nx) * bx - nx * ab) / (na + nb + nx);
    }
    size[a] = na + nb;
    active[b] = 0;
    parent[b] = a;

    rescan(a);
    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || x == a) continue;
      if (nn[x] == a || nn[x] == b) {
        rescan(x);
      } else if (x < a) {
        const double c = cost[at(x, a)];
        if (c < nn_cost[x] || (c == nn_cost[x] && a < nn[x])) {
          nn_cost[x] = c;
          nn[x] = a;
        }
      }
    }
  }

  ClusterAssignment out;
  out.k = options.k;
  out.dim = m.dim;
  out.converged = true;
  out.iterations = static_cast<std::uint32_t>(n - options.k);
  std::vector<std::uint32_t> slot_label(n, 0);
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (active[i]) slot_label[i] = next++;
  }
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = i;
    while (parent[r] != r) r = parent[r];
    out.labels[i] = slot_label[r];
  }

  out.centroids.assign(static_cast<std::size_t>(out.k) * m.dim, 0.0);
  std::vector<std::uint64_t> counts = out.ClusterSizes();
  for (std::size_t i = 0; i < n; ++i) {
    auto x = m.Row(i);
    double* c = out.centroids.data() + out.labels[i] * m.dim;
    for (std::size_t d = 0; d < m.dim; ++d) c[d] += x[d];
  }
  for (std::uint32_t c = 0; c < out.k; ++c) {
    for (std::size_t d = 0; d < m.dim; ++d) {
      out.centroids[c * m.dim + d] /= static_cast<double>(counts[c]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.objective +=
        SquaredDistance(m.Row(i), out.centroids.data() + out.labels[i] * m.dim);
  }
  out.objective_history.push_back(out.objective);
  return out;
}

std::vector<EncodedConcept> ClustersToConcepts(
    const ClusterAssignment& assignment, const TokenIndex& index,
    std::uint32_t layer) {
  if (assignment.labels.size() != index.size()) {
    throw DataError("cluster assignment has " +
                    std::to_string(assignment.labels.size()) +
                    " labels but the token index has " +
                    std::to_string(index.size()) + " occurrences");
  }
  std::vector<EncodedConcept> by_id(assignment.k);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto label = assignment.labels[i];
    if (label >= assignment.k) throw DataError("cluster label out of range");
    by_id[label].members.push_back(index.entries[i]);
  }
  std::vector<EncodedConcept> out;
  for (std::uint32_t c = 0; c < assignment.k; ++c) {
    if (by_id[c].members.empty()) continue;
    by_id[c].layer = layer;
    by_id[c].cluster_id = c;
    out.push_back(std::move(by_id[c]));
  }
  return out;
}

EmbeddingMatrix SelectRows(const EmbeddingMatrix& matrix,
                           const TokenIndex& index) {
  EmbeddingMatrix out;
  out.layer = matrix.layer;
  out.dim = matrix.dim;
  out.level = matrix.level;
  out.model_id = matrix.model_id;
  out.stride_seconds = matrix.stride_seconds;
  out.values.reserve(index.size() * matrix.dim);
  for (const auto& occ : index.entries) {
    if (occ.row >= matrix.count) {
      throw DataError("occurrence row " + std::to_string(occ.row) +
                      " outside the matrix");
    }
    auto row = matrix.Row(occ.row);
    out.values.insert(out.values.end(), row.begin(), row.end());
  }
  out.count = index.size();
  return out;
}

void WriteClusterFile(const fs::path& path,
                      const std::vector<EncodedConcept>& concepts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write " + path.string());
  for (const auto& c : concepts) {
    std::vector<std::uint64_t> rows;
    rows.reserve(c.members.size());
    for (const auto& occ : c.members) rows.push_back(occ.row);
    std::sort(rows.begin(), rows.end());
    out << c.cluster_id << '\t';
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) out << ',';
      out << rows[i];
    }
    out << '\n';
  }
  if (!out) throw UserError("write failed: " + path.string());
}

std::vector<EncodedConcept> ReadClusterFile(const fs::path& path,
                                            const TokenIndex& index,
                                            std::uint32_t layer) {
  std::unordered_map<std::uint64_t, std::size_t> by_row;
  by_row.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) by_row[index.entries[i].row] = i;

  std::vector<EncodedConcept> out;
  std::unordered_map<std::uint64_t, std::uint32_t> owner;
  bool opened = tsv::ForEachLine(path.string(), [&](std::size_t lineno,
                                                    std::string_view line) {
    auto f = tsv::Split(line);
    EncodedConcept c;
    c.layer = layer;
    if (f.size() != 2 || !tsv::ParseNumber(f[0], c.cluster_id)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected cluster_id<TAB>row,row,...");
    }
    for (auto field : tsv::Split(f[1], ',')) {
      std::uint64_t row = 0;
      if (!tsv::ParseNumber(field, row)) {
        throw DataError(path.string() + ":" + std::to_string(lineno) +
                        ": bad row '" + std::string(field) + "'");
      }
      auto it = by_row.find(row);
      if (it == by_row.end()) {
        throw DataError(path.string() + ": row " + std::to_string(row) +
                        " is not in the token index");
      }
      if (!owner.emplace(row, c.cluster_id).second) {
        throw DataError(path.string() + ": row " + std::to_string(row) +
                        " appears in two clusters");
      }
      c.members.push_back(index.entries[it->second]);
    }
    if (c.members.empty()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": empty cluster");
    }
    out.push_back(std::move(c));
  });
  if (!opened) throw UserError("cannot open cluster file " + path.string());
  return out;
}

void WriteClusterMetadata(const fs::path& path, const ClusterRunInfo& info,
                          const ClusterAssignment& assignment) {
  std::uint32_t non_empty = 0;
  for (auto s : assignment.ClusterSizes()) non_empty += s > 0;
  nlohmann::ordered_json j;
  j["layer"] = info.layer;
  j["algorithm"] = AlgorithmName(info.algorithm);
  j["K"] = info.requested_k;
  j["non_empty_clusters"] = non_empty;
  j["seed"] = info.seed;
  j["num_points"] = info.num_points;
  j["iterations"] = assignment.iterations;
  j["converged"] = assignment.converged;
  j["objective"] = assignment.objective;
  j["repairs"] = assignment.repairs;
  j["objective_history"] = assignment.objective_history;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace lca
