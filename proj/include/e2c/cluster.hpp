#pragma once

/**
 * Spherical k-means over plan embeddings with cosine distance. Produces
 * cluster sizes (vote weights) and a representative plan per cluster.
 *
 * Deterministic: k-means++ initialization with an explicit seeded RNG, a
 * fixed number of seeded restarts, and index-order tie-breaking throughout.
 */

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "e2c/error.hpp"
#include "e2c/rng.hpp"

namespace e2c::cluster {

struct EmbeddingMatrix {
  std::vector<std::vector<double>> rows;  // unit L2 norm each
  std::vector<int> source_indices;        // plan indices, 1-based
};

struct ClusterResult {
  int num_clusters = 0;
  std::map<int, int> assignment;              // plan_index -> cluster_id (0-based)
  std::vector<int> sizes;                     // per-cluster counts
  std::vector<std::vector<double>> centroids; // unit norm
  std::vector<int> representatives;           // plan_index per cluster
  double objective = 0.0;                     // sum of within-cluster cosine distances
  std::vector<double> objective_trace;        // per Lloyd iteration, winning restart
  std::vector<std::string> warnings;
};

inline EmbeddingMatrix normalize_rows(const std::vector<std::vector<double>>& raw,
                                      std::vector<int> source_indices = {}) {
  if (raw.empty()) fail("InvalidParams", "no rows to normalize");
  std::size_t dim = raw[0].size();
  EmbeddingMatrix m;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].size() != dim) fail("DimensionMismatch", "ragged embedding rows");
    double norm_sq = 0.0;
    for (double x : raw[i]) {
      if (!std::isfinite(x)) fail("InvalidParams", "non-finite embedding component");
      norm_sq += x * x;
    }
    if (norm_sq <= 0.0) fail("ZeroVector", "row " + std::to_string(i) + " is all-zero");
    double inv = 1.0 / std::sqrt(norm_sq);
    std::vector<double> row(raw[i]);
    for (double& x : row) x *= inv;
    m.rows.push_back(std::move(row));
  }
  if (source_indices.empty()) {
    for (std::size_t i = 0; i < raw.size(); ++i)
      m.source_indices.push_back(static_cast<int>(i) + 1);
  } else {
    if (source_indices.size() != raw.size())
      fail("InvalidParams", "source_indices size mismatch");
    m.source_indices = std::move(source_indices);
  }
  return m;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// 1 - a.b for unit vectors; range [0, 2].
inline double cosine_distance(const std::vector<double>& a,
                              const std::vector<double>& b) {
  if (a.size() != b.size()) fail("DimensionMismatch", "cosine_distance");
  return 1.0 - dot(a, b);
}

namespace detail_km {

struct RunResult {
  std::vector<int> assignment;  // row -> cluster
  std::vector<std::vector<double>> centroids;
  double objective = 0.0;
  std::vector<double> objective_trace;
};

inline RunResult lloyd(const std::vector<std::vector<double>>& rows, int m,
                       std::uint64_t seed) {
  const int k = static_cast<int>(rows.size());
  Rng rng(seed);
  RunResult run;

  // k-means++ seeding on squared cosine distance
  std::vector<int> centers;
  centers.push_back(static_cast<int>(rng.next_below(k)));
  std::vector<double> dist(k);
  while (static_cast<int>(centers.size()) < m) {
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c : centers) best = std::min(best, cosine_distance(rows[i], rows[c]));
      dist[i] = best * best;
      total += dist[i];
    }
    int chosen;
    if (total <= 0.0) {
      chosen = static_cast<int>(rng.next_below(k));
    } else {
      double r = rng.next_double() * total;
      chosen = k - 1;
      double acc = 0.0;
      for (int i = 0; i < k; ++i) {
        acc += dist[i];
        if (r < acc) {
          chosen = i;
          break;
        }
      }
    }
    centers.push_back(chosen);
  }
  run.centroids.clear();
  for (int c : centers) run.centroids.push_back(rows[c]);

  run.assignment.assign(k, -1);
  for (int iter = 0; iter < 100; ++iter) {
    // assignment: nearest centroid, lowest cluster id on ties
    bool changed = false;
    for (int i = 0; i < k; ++i) {
      int best_c = 0;
      double best_d = cosine_distance(rows[i], run.centroids[0]);
      for (int c = 1; c < m; ++c) {
        double d = cosine_distance(rows[i], run.centroids[c]);
        if (d < best_d - 1e-15) {
          best_d = d;
          best_c = c;
        }
      }
      if (run.assignment[i] != best_c) {
        run.assignment[i] = best_c;
        changed = true;
      }
    }

    // empty-cluster repair: steal the globally farthest point
    for (int c = 0; c < m; ++c) {
      bool empty = true;
      for (int i = 0; i < k; ++i)
        if (run.assignment[i] == c) {
          empty = false;
          break;
        }
      if (!empty) continue;
      int worst = -1;
      double worst_d = -1.0;
      for (int i = 0; i < k; ++i) {
        // only steal from clusters with >1 member
        int owner = run.assignment[i];
        int owner_size = 0;
        for (int j = 0; j < k; ++j) owner_size += run.assignment[j] == owner;
        if (owner_size < 2) continue;
        double d = cosine_distance(rows[i], run.centroids[owner]);
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      if (worst >= 0) {
        run.assignment[worst] = c;
        run.centroids[c] = rows[worst];
        changed = true;
      }
    }

    // centroid update: renormalized mean
    std::size_t dim = rows[0].size();
    for (int c = 0; c < m; ++c) {
      std::vector<double> mean(dim, 0.0);
      int count = 0;
      for (int i = 0; i < k; ++i) {
        if (run.assignment[i] != c) continue;
        for (std::size_t d = 0; d < dim; ++d) mean[d] += rows[i][d];
        ++count;
      }
      double n = std::sqrt(dot(mean, mean));
      if (count > 0 && n > 1e-12) {  // degenerate mean keeps previous centroid
        for (double& x : mean) x /= n;
        run.centroids[c] = mean;
      }
    }

    double obj = 0.0;
    for (int i = 0; i < k; ++i)
      obj += cosine_distance(rows[i], run.centroids[run.assignment[i]]);
    run.objective_trace.push_back(obj);
    if (!changed) break;
  }
  run.objective = run.objective_trace.back();
  return run;
}

}  // namespace detail_km

// Spherical k-means with seeded k-means++ restarts; best objective wins,
// ties by restart order. M is clamped to the number of distinct rows.
inline ClusterResult kmeans(const EmbeddingMatrix& matrix, int m,
                            std::uint64_t seed, int restarts = 16) {
  const int k = static_cast<int>(matrix.rows.size());
  if (k == 0) fail("InvalidParams", "empty matrix");
  if (m < 1) fail("InvalidParams", "M must be >= 1");

  ClusterResult result;

  // count distinct rows (exact within 1e-12)
  int distinct = 0;
  for (int i = 0; i < k; ++i) {
    bool dup = false;
    for (int j = 0; j < i && !dup; ++j) {
      double max_diff = 0.0;
      for (std::size_t d = 0; d < matrix.rows[i].size(); ++d)
        max_diff = std::max(max_diff,
                            std::abs(matrix.rows[i][d] - matrix.rows[j][d]));
      dup = max_diff < 1e-12;
    }
    if (!dup) ++distinct;
  }
  if (m > distinct) {
    result.warnings.push_back("TooManyClusters: M=" + std::to_string(m) +
                              " clamped to " + std::to_string(distinct) +
                              " distinct rows");
    m = distinct;
  }

  detail_km::RunResult best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    auto run = detail_km::lloyd(matrix.rows, m, hash_combine(seed, r));
    if (!have || run.objective < best.objective - 1e-12) {
      best = std::move(run);
      have = true;
    }
  }

  result.num_clusters = m;
  result.centroids = best.centroids;
  result.objective = best.objective;
  result.objective_trace = best.objective_trace;
  result.sizes.assign(m, 0);
  result.representatives.assign(m, -1);
  std::vector<double> rep_dist(m, std::numeric_limits<double>::infinity());
  for (int i = 0; i < k; ++i) {
    int c = best.assignment[i];
    int plan_index = matrix.source_indices[i];
    result.assignment[plan_index] = c;
    result.sizes[c]++;
    double d = cosine_distance(matrix.rows[i], best.centroids[c]);
    if (d < rep_dist[c] - 1e-15 ||
        (std::abs(d - rep_dist[c]) <= 1e-15 &&
         plan_index < result.representatives[c])) {
      rep_dist[c] = d;
      result.representatives[c] = plan_index;
    }
  }
  return result;
}

}  // namespace e2c::cluster
