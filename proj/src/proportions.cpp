#include "propseg/proportions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "propseg/kmeans.hpp"
#include "propseg/rng.hpp"

namespace propseg {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  const Eigen::VectorXd shifted = (v.array() - v.maxCoeff()).exp();
  return shifted / shifted.sum();
}

}  // namespace

const char* to_string(RenormMode mode) {
  switch (mode) {
    case RenormMode::softmax_always: return "softmax_always";
    case RenormMode::softmax_if_noisy: return "softmax_if_noisy";
    case RenormMode::clip_and_rescale: return "clip_and_rescale";
  }
  return "?";
}

RenormMode renorm_mode_from_string(const std::string& s) {
  if (s == "softmax_always") return RenormMode::softmax_always;
  if (s == "softmax_if_noisy") return RenormMode::softmax_if_noisy;
  if (s == "clip_and_rescale") return RenormMode::clip_and_rescale;
  throw std::invalid_argument("unknown renorm mode: " + s);
}

ProportionVector extract_sp(const MaskStack& mask) {
  const double total = static_cast<double>(mask.rows()) * static_cast<double>(mask.cols());
  if (total <= 0.0) throw std::invalid_argument("extract_sp: empty mask");
  Eigen::VectorXd values(mask.class_count());
  for (int j = 0; j < mask.class_count(); ++j) {
    values[j] = mask.maps[static_cast<std::size_t>(j)].cast<double>().sum() / total;
  }
  return ProportionVector{std::move(values), mask.mode};
}

ProportionVector degrade_sp_noise(const ProportionVector& sp, const NoiseSpec& spec) {
  if (spec.sigma < 0.0 || spec.sigma > 1.0) {
    throw std::invalid_argument("degrade_sp_noise: sigma must lie in [0,1]");
  }
  Rng rng(spec.seed);
  Eigen::VectorXd noised = sp.values;
  for (Eigen::Index j = 0; j < noised.size(); ++j) noised[j] += rng.normal(spec.sigma);

  if (sp.mode == SegMode::binary) {
    noised = noised.cwiseMax(0.0).cwiseMin(1.0);
    return ProportionVector{std::move(noised), sp.mode};
  }

  switch (spec.renorm) {
    case RenormMode::softmax_always:
      noised = softmax(noised);
      break;
    case RenormMode::softmax_if_noisy:
      if (spec.sigma == 0.0) return sp;
      noised = softmax(noised);
      break;
    case RenormMode::clip_and_rescale: {
      noised = noised.cwiseMax(0.0).cwiseMin(1.0);
      const double sum = noised.sum();
      if (sum <= 0.0) {
        noised.setConstant(1.0 / static_cast<double>(noised.size()));
      } else {
        noised /= sum;
      }
      break;
    }
  }
  return ProportionVector{std::move(noised), sp.mode};
}

std::map<std::string, ProportionVector> degrade_sp_noise_all(
    const std::map<std::string, ProportionVector>& sp, const NoiseSpec& spec) {
  std::map<std::string, ProportionVector> out;
  std::uint64_t index = 0;
  for (const auto& [id, pv] : sp) {    // std::map iterates in sorted id order
    NoiseSpec per_image = spec;
    per_image.seed = Rng::derive(spec.seed, index++);
    out[id] = degrade_sp_noise(pv, per_image);
  }
  return out;
}

ClusterDegradeResult degrade_sp_clustering(
    const std::vector<std::pair<std::string, ProportionVector>>& sp_set,
    const ClusterDegradeSpec& spec) {
  const int n = static_cast<int>(sp_set.size());
  if (spec.k < 1) throw std::invalid_argument("degrade_sp_clustering: k must be at least 1");
  if (n < spec.k) {
    throw std::invalid_argument("degrade_sp_clustering: k exceeds the number of images (" +
                                std::to_string(spec.k) + " > " + std::to_string(n) + ")");
  }

  const int dim = sp_set.front().second.class_count();
  Eigen::MatrixXd points(n, dim);
  for (int i = 0; i < n; ++i) {
    if (sp_set[static_cast<std::size_t>(i)].second.class_count() != dim) {
      throw std::invalid_argument("degrade_sp_clustering: inconsistent SP dimensions");
    }
    points.row(i) = sp_set[static_cast<std::size_t>(i)].second.values.transpose();
  }

  Rng rng(spec.seed);
  const KMeansResult km = kmeans(points, spec.k, spec.max_iters, spec.tol, rng);

  std::vector<std::vector<int>> members(static_cast<std::size_t>(spec.k));
  for (int i = 0; i < n; ++i) {
    members[static_cast<std::size_t>(km.assignment[static_cast<std::size_t>(i)])].push_back(i);
  }

  // one representative SP per cluster, chosen uniformly among its members
  std::vector<int> representative(static_cast<std::size_t>(spec.k), -1);
  for (int c = 0; c < spec.k; ++c) {
    auto& m = members[static_cast<std::size_t>(c)];
    if (m.empty()) {
      throw std::runtime_error("degrade_sp_clustering: cluster " + std::to_string(c) +
                               " is empty after convergence");
    }
    representative[static_cast<std::size_t>(c)] = m[static_cast<std::size_t>(rng.uniform_int(
        static_cast<int>(m.size())))];
  }

  ClusterDegradeResult res;
  for (int i = 0; i < n; ++i) {
    const int c = km.assignment[static_cast<std::size_t>(i)];
    const int rep = representative[static_cast<std::size_t>(c)];
    res.sp[sp_set[static_cast<std::size_t>(i)].first] =
        sp_set[static_cast<std::size_t>(rep)].second;
    res.cluster[sp_set[static_cast<std::size_t>(i)].first] = c;
  }
  return res;
}

}  // namespace propseg
