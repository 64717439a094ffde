#pragma once

// Lloyd's k-means with k-means++ seeding. Used only for initialising the
// influential regions.

#include "irml/core.hpp"

#include <limits>
#include <random>
#include <vector>

namespace irml {

struct KMeansResult {
  RowMatrix centroids;
  std::vector<int> assignment;
  std::vector<std::ptrdiff_t> cluster_sizes;
  int iterations = 0;
  bool has_empty_cluster = false;
};

// Indices of k seed rows chosen by D^2 sampling.
inline std::vector<std::ptrdiff_t> kmeanspp_seeds(const RowMatrix& points, int k,
                                                  std::mt19937_64& rng) {
  const auto n = points.rows();
  std::vector<std::ptrdiff_t> seeds;
  if (k <= 0 || n == 0) return seeds;
  std::uniform_int_distribution<std::ptrdiff_t> first(0, n - 1);
  seeds.push_back(first(rng));
  std::vector<double> mind(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  while (static_cast<int>(seeds.size()) < k) {
    const auto last = points.row(seeds.back());
    double total = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      auto& m = mind[static_cast<std::size_t>(i)];
      m = std::min(m, (points.row(i) - last).squaredNorm());
      total += m;
    }
    if (total > 0.0) {
      std::discrete_distribution<std::ptrdiff_t> pick(mind.begin(), mind.end());
      seeds.push_back(pick(rng));
    } else {
      // Every point coincides with a seed already.
      seeds.push_back(first(rng));
    }
  }
  return seeds;
}

inline KMeansResult kmeans(const RowMatrix& points, int k, std::mt19937_64& rng,
                           int max_iter = 100, double tol = 1e-6) {
  if (k < 1 || k > points.rows()) throw UsageError("kmeans: need 1 <= k <= number of points");
  const auto n = points.rows();
  const auto dim = points.cols();
  KMeansResult res;
  res.centroids.resize(k, dim);
  const auto seeds = kmeanspp_seeds(points, k, rng);
  for (int c = 0; c < k; ++c) res.centroids.row(c) = points.row(seeds[static_cast<std::size_t>(c)]);
  res.assignment.assign(static_cast<std::size_t>(n), 0);

  for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(i) - res.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      res.assignment[static_cast<std::size_t>(i)] = best;
    }
    RowMatrix next = RowMatrix::Zero(k, dim);
    res.cluster_sizes.assign(static_cast<std::size_t>(k), 0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const int c = res.assignment[static_cast<std::size_t>(i)];
      next.row(c) += points.row(i);
      ++res.cluster_sizes[static_cast<std::size_t>(c)];
    }
    res.has_empty_cluster = false;
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      const auto size = res.cluster_sizes[static_cast<std::size_t>(c)];
      if (size == 0) {
        res.has_empty_cluster = true;
        next.row(c) = res.centroids.row(c);
        continue;
      }
      next.row(c) /= static_cast<double>(size);
      shift = std::max(shift, (next.row(c) - res.centroids.row(c)).norm());
    }
    res.centroids = std::move(next);
    if (res.has_empty_cluster || shift < tol) break;
  }
  res.iterations = std::min(res.iterations, max_iter);
  return res;
}

}  // namespace irml
