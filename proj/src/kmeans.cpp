#include "propseg/kmeans.hpp"

#include <limits>
#include <stdexcept>

namespace propseg {

namespace {

constexpr int kEmptyClusterRetries = 8;

int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const int n = static_cast<int>(points.rows());
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(rng.uniform_int(n));

  Eigen::VectorXd dist2(n);
  for (int i = 0; i < n; ++i) dist2[i] = (points.row(i) - centroids.row(0)).squaredNorm();

  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    int pick;
    if (total <= 0.0) {
      // all remaining points coincide with chosen centroids
      pick = rng.uniform_int(n);
    } else {
      double r = rng.uniform() * total;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        r -= dist2[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = points.row(pick);
    for (int i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], (points.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int max_iters, double tol, Rng& rng) {
  const int n = static_cast<int>(points.rows());
  if (k < 1) throw std::invalid_argument("kmeans: k must be at least 1");
  if (n < k) throw std::invalid_argument("kmeans: fewer points than clusters");

  KMeansResult res;
  res.centroids = seed_plus_plus(points, k, rng);
  res.assignment.assign(static_cast<std::size_t>(n), 0);

  int reseeds = 0;
  for (res.iterations = 1; res.iterations <= max_iters; ++res.iterations) {
    for (int i = 0; i < n; ++i) {
      res.assignment[static_cast<std::size_t>(i)] = nearest_centroid(res.centroids, points.row(i));
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (int i = 0; i < n; ++i) {
      sums.row(res.assignment[static_cast<std::size_t>(i)]) += points.row(i);
      counts[res.assignment[static_cast<std::size_t>(i)]] += 1;
    }

    bool had_empty = false;
    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        had_empty = true;
        // reseed to the point farthest from its current centroid
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d =
              (points.row(i) - res.centroids.row(res.assignment[static_cast<std::size_t>(i)]))
                  .squaredNorm();
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        res.centroids.row(c) = points.row(far_i);
        continue;
      }
      const Eigen::RowVectorXd updated = sums.row(c) / counts[c];
      movement = std::max(movement, (updated - res.centroids.row(c)).norm());
      res.centroids.row(c) = updated;
    }

    if (had_empty) {
      if (++reseeds > kEmptyClusterRetries) {
        throw std::runtime_error(
            "kmeans: empty cluster persisted after reseeding; "
            "fewer distinct points than clusters?");
      }
      continue;
    }
    if (movement <= tol) {
      res.converged = true;
      break;
    }
  }

  // final assignment against the converged centroids; keep the in-loop
  // assignment if the refresh would strand a cluster
  std::vector<int> refreshed(static_cast<std::size_t>(n));
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
  for (int i = 0; i < n; ++i) {
    refreshed[static_cast<std::size_t>(i)] = nearest_centroid(res.centroids, points.row(i));
    counts[refreshed[static_cast<std::size_t>(i)]] += 1;
  }
  if ((counts.array() > 0).all()) res.assignment = std::move(refreshed);
  return res;
}

}  // namespace propseg
