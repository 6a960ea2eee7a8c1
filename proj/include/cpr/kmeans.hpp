#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <vector>

#include "cpr/error.hpp"
#include "cpr/rng.hpp"

namespace cpr {

struct KMeansResult {
  std::vector<std::size_t> assignment;
  Eigen::MatrixXd centroids;  // k x d
  std::vector<double> objective_history;  // within-cluster SSE per Lloyd round
  std::size_t iterations = 0;

  double objective() const {
    return objective_history.empty() ? 0.0 : objective_history.back();
  }
};

inline constexpr std::size_t kKMeansMaxIter = 300;

namespace detail {

inline double sq_dist(const Eigen::MatrixXd& points, Eigen::Index i,
                      const Eigen::MatrixXd& centroids, Eigen::Index c) {
  return (points.row(i) - centroids.row(c)).squaredNorm();
}

inline double kmeans_objective(const Eigen::MatrixXd& points,
                               const std::vector<std::size_t>& assign,
                               const Eigen::MatrixXd& centroids) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    total += sq_dist(points, i, centroids, static_cast<Eigen::Index>(assign[static_cast<std::size_t>(i)]));
  return total;
}

}  // namespace detail

/// k-means on the rows of `points`: deterministic k-means++ seeding, then
/// Lloyd iterations until the assignment is a fixpoint or 300 rounds.
/// Empty clusters take the point farthest from its own centroid.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k,
                           std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k < 1 || k > n)
    throw ValidationError("invalid k: " + std::to_string(k) + " clusters for " +
                          std::to_string(n) + " points");
  const auto d = points.cols();
  const auto K = static_cast<Eigen::Index>(k);
  Rng rng(seed);

  // k-means++ seeding
  Eigen::MatrixXd centroids(K, d);
  std::vector<bool> chosen(n, false);
  auto first = static_cast<std::size_t>(rng.below(n));
  chosen[first] = true;
  centroids.row(0) = points.row(static_cast<Eigen::Index>(first));
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  for (Eigen::Index c = 1; c < K; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], detail::sq_dist(points, static_cast<Eigen::Index>(i),
                                                  centroids, c - 1));
      total += dist[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist[i];
        if (dist[i] > 0.0 && r < acc) {
          pick = i;
          break;
        }
      }
      if (pick == n)  // rounding at the tail
        for (std::size_t i = n; i-- > 0;)
          if (dist[i] > 0.0) {
            pick = i;
            break;
          }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
    }
    chosen[pick] = true;
    centroids.row(c) = points.row(static_cast<Eigen::Index>(pick));
  }

  KMeansResult res;
  std::vector<std::size_t> assign(n, 0);
  auto assign_points = [&] {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = detail::sq_dist(points, static_cast<Eigen::Index>(i), centroids,
                                          static_cast<Eigen::Index>(c));
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
    }
    return changed;
  };
  auto refill_empty = [&] {
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assign) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[assign[i]] < 2) continue;
        const double dd = detail::sq_dist(points, static_cast<Eigen::Index>(i), centroids,
                                          static_cast<Eigen::Index>(assign[i]));
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      --sizes[assign[far]];
      assign[far] = c;
      sizes[c] = 1;
      centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
    }
  };
  auto update_centroids = [&] {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, d);
    std::vector<double> counts(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(assign[i])) += points.row(static_cast<Eigen::Index>(i));
      counts[assign[i]] += 1.0;
    }
    for (std::size_t c = 0; c < k; ++c)
      centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / counts[c];
  };

  assign_points();
  for (res.iterations = 1;; ++res.iterations) {
    refill_empty();
    update_centroids();
    res.objective_history.push_back(detail::kmeans_objective(points, assign, centroids));
    if (res.iterations >= kKMeansMaxIter) break;
    if (!assign_points()) break;
  }
  res.assignment = std::move(assign);
  res.centroids = std::move(centroids);
  return res;
}

}  // namespace cpr
