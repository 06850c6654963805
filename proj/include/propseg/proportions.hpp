#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "propseg/types.hpp"

namespace propseg {

/// Pixel-count class proportions of a mask: value j = |{maps[j] == 1}| / (M*H).
/// For one-hot multiclass masks the result lies on the simplex.
ProportionVector extract_sp(const MaskStack& mask);

/// How a noised proportion vector is pushed back into the valid range.
/// softmax_always applies softmax unconditionally (distorts even sigma = 0);
/// softmax_if_noisy returns the input untouched at sigma = 0 and applies
/// softmax otherwise; clip_and_rescale clamps to [0,1] then renormalises.
/// Binary-mode vectors are clamped to [0,1] with no renormalisation.
enum class RenormMode { softmax_always, softmax_if_noisy, clip_and_rescale };

struct NoiseSpec {
  double sigma = 0.0;
  RenormMode renorm = RenormMode::softmax_if_noisy;
  std::uint64_t seed = 0;
};

ProportionVector degrade_sp_noise(const ProportionVector& sp, const NoiseSpec& spec);

/// Applies per-image noise across a whole annotation set; each image draws
/// from an independent stream derived from (spec.seed, position in id order).
std::map<std::string, ProportionVector> degrade_sp_noise_all(
    const std::map<std::string, ProportionVector>& sp, const NoiseSpec& spec);

struct ClusterDegradeSpec {
  int k = 1;
  int max_iters = 300;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct ClusterDegradeResult {
  std::map<std::string, ProportionVector> sp;
  std::map<std::string, int> cluster;
};

/// Clusters the SP set with k-means, then elects one member's SP per cluster
/// uniformly at random and assigns it to every image in that cluster. At most
/// k distinct SP vectors remain; every assigned SP is a member of the input
/// set and each cluster keeps at least one image's original SP.
ClusterDegradeResult degrade_sp_clustering(
    const std::vector<std::pair<std::string, ProportionVector>>& sp_set,
    const ClusterDegradeSpec& spec);

const char* to_string(RenormMode mode);
RenormMode renorm_mode_from_string(const std::string& s);

}  // namespace propseg
