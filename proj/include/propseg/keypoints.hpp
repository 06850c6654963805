#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "propseg/types.hpp"

namespace propseg {

/// Union of L-infinity balls of the given radius around each point, clipped
/// to [0, rows) x [0, cols). Radius 0 is the identity. Output is sorted and
/// duplicate-free.
std::vector<std::pair<int, int>> dilate_points(const std::vector<std::pair<int, int>>& points,
                                               int radius, int rows, int cols);

/// Draws n_seeds pixels uniformly from each requested class's positive region
/// of the mask, dilates them, and intersects the dilation with the positive
/// region so emitted points never contradict the mask. All points carry
/// value 1. One annotation per class, deterministic given the seed.
/// Throws if a requested class has fewer than n_seeds positive pixels.
std::vector<KeypointAnnotation> sample_keypoints(const std::string& image_id,
                                                 const MaskStack& mask,
                                                 const std::vector<int>& class_indices,
                                                 int n_seeds, int dilation_radius,
                                                 std::uint64_t seed);

}  // namespace propseg
