#pragma once

#include <Eigen/Dense>

#include <vector>

#include "propseg/rng.hpp"

namespace propseg {

struct KMeansResult {
  Eigen::MatrixXd centroids;    // k x d
  std::vector<int> assignment;  // size n, values in [0, k)
  int iterations = 0;
  bool converged = false;
};

/// Lloyd's algorithm with k-means++ seeding and Euclidean distance.
/// Deterministic given the generator state. Points are rows of `points`.
/// Ties in the nearest-centroid assignment break toward the lower index.
/// A cluster left empty at convergence is reseeded to the point farthest
/// from its centroid (a bounded number of times) before giving up.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int max_iters, double tol, Rng& rng);

}  // namespace propseg
