#include "propseg/keypoints.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "propseg/rng.hpp"

namespace propseg {

std::vector<std::pair<int, int>> dilate_points(const std::vector<std::pair<int, int>>& points,
                                               int radius, int rows, int cols) {
  if (radius < 0) throw std::invalid_argument("dilate_points: radius must be non-negative");
  std::set<std::pair<int, int>> out;
  for (const auto& [r, c] : points) {
    if (r < 0 || r >= rows || c < 0 || c >= cols) {
      throw std::invalid_argument("dilate_points: point out of bounds");
    }
    for (int dr = -radius; dr <= radius; ++dr) {
      for (int dc = -radius; dc <= radius; ++dc) {
        const int rr = r + dr;
        const int cc = c + dc;
        if (rr >= 0 && rr < rows && cc >= 0 && cc < cols) out.emplace(rr, cc);
      }
    }
  }
  return {out.begin(), out.end()};
}

std::vector<KeypointAnnotation> sample_keypoints(const std::string& image_id,
                                                 const MaskStack& mask,
                                                 const std::vector<int>& class_indices,
                                                 int n_seeds, int dilation_radius,
                                                 std::uint64_t seed) {
  if (n_seeds < 1) throw std::invalid_argument("sample_keypoints: n_seeds must be positive");
  const int rows = static_cast<int>(mask.rows());
  const int cols = static_cast<int>(mask.cols());

  std::vector<KeypointAnnotation> out;
  std::uint64_t stream = 0;
  for (const int cls : class_indices) {
    if (cls < 0 || cls >= mask.class_count()) {
      throw std::invalid_argument("sample_keypoints: class index " + std::to_string(cls) +
                                  " out of range");
    }
    const MaskPlane& plane = mask.maps[static_cast<std::size_t>(cls)];

    std::vector<std::pair<int, int>> positives;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (plane(r, c)) positives.emplace_back(r, c);
      }
    }
    if (static_cast<int>(positives.size()) < n_seeds) {
      throw std::runtime_error("sample_keypoints: class " + std::to_string(cls) + " of '" +
                               image_id + "' has " + std::to_string(positives.size()) +
                               " positive pixels, need " + std::to_string(n_seeds));
    }

    Rng rng(Rng::derive(seed, stream++));
    const auto picks =
        rng.sample_without_replacement(static_cast<int>(positives.size()), n_seeds);
    std::vector<std::pair<int, int>> seeds_px;
    seeds_px.reserve(picks.size());
    for (const int i : picks) seeds_px.push_back(positives[static_cast<std::size_t>(i)]);

    std::vector<Keypoint> pts;
    for (const auto& [r, c] : dilate_points(seeds_px, dilation_radius, rows, cols)) {
      if (plane(r, c)) pts.push_back(Keypoint{r, c, 1});  // stay inside the class region
    }
    out.push_back(make_keypoint_annotation(image_id, cls, std::move(pts)));
  }
  return out;
}

}  // namespace propseg
