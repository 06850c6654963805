#include "propseg/tiling.hpp"

#include <cmath>
#include <stdexcept>

namespace propseg {

namespace {

void check_spec(const TilingSpec& spec) {
  if (spec.patch_m < kMinPatchDim || spec.patch_h < kMinPatchDim) {
    throw std::invalid_argument("tiling: patch sizes must be at least 8");
  }
  if (spec.stride_m < 1 || spec.stride_h < 1) {
    throw std::invalid_argument("tiling: strides must be at least 1");
  }
}

int tiles_along(int extent, int patch, int stride, EdgePolicy policy) {
  if (policy == EdgePolicy::drop_partial) {
    if (extent < patch) return 0;
    return (extent - patch) / stride + 1;
  }
  // pad_reflect: enough tiles that the last one reaches or passes the border
  if (extent <= patch) return 1;
  return static_cast<int>(std::ceil(static_cast<double>(extent - patch) / stride)) + 1;
}

// reflect-101 index: ...2,1 | 0,1,...,n-1 | n-2,n-3,...
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
  if (i < n) return i;
  const Eigen::Index r = 2 * (n - 1) - i;
  if (r < 0) {
    throw std::invalid_argument("tiling: image too small to reflect-pad this patch size");
  }
  return r;
}

template <class Plane>
Plane crop_reflect(const Plane& src, int r0, int c0, int rows, int cols) {
  Plane out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const Eigen::Index sr = reflect_index(r0 + r, src.rows());
    for (int c = 0; c < cols; ++c) {
      out(r, c) = src(sr, reflect_index(c0 + c, src.cols()));
    }
  }
  return out;
}

}  // namespace

std::vector<TiledPatch> tile_image(const std::vector<PixelPlane>& image,
                                   const std::optional<MaskStack>& mask, const TilingSpec& spec,
                                   const std::string& base_id) {
  check_spec(spec);
  if (image.empty()) throw std::invalid_argument("tiling: image has no channels");
  const auto rows = image.front().rows();
  const auto cols = image.front().cols();
  for (const auto& ch : image) {
    if (ch.rows() != rows || ch.cols() != cols) {
      throw std::invalid_argument("tiling: image channel shapes differ");
    }
  }
  if (mask && (mask->rows() != rows || mask->cols() != cols)) {
    throw std::invalid_argument("tiling: mask dimensions differ from image");
  }
  if (spec.edge_policy == EdgePolicy::drop_partial &&
      (rows < spec.patch_m || cols < spec.patch_h)) {
    throw std::invalid_argument("tiling: image " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " smaller than patch " +
                                std::to_string(spec.patch_m) + "x" + std::to_string(spec.patch_h));
  }

  const int n_rows = tiles_along(static_cast<int>(rows), spec.patch_m, spec.stride_m, spec.edge_policy);
  const int n_cols = tiles_along(static_cast<int>(cols), spec.patch_h, spec.stride_h, spec.edge_policy);

  std::vector<TiledPatch> out;
  out.reserve(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols));
  for (int tr = 0; tr < n_rows; ++tr) {
    for (int tc = 0; tc < n_cols; ++tc) {
      const int r0 = tr * spec.stride_m;
      const int c0 = tc * spec.stride_h;

      std::vector<PixelPlane> channels;
      channels.reserve(image.size());
      for (const auto& ch : image) {
        channels.push_back(crop_reflect(ch, r0, c0, spec.patch_m, spec.patch_h));
      }
      const std::string id = base_id + "_r" + std::to_string(tr) + "_c" + std::to_string(tc);

      std::optional<MaskStack> mask_patch;
      if (mask) {
        std::vector<MaskPlane> maps;
        maps.reserve(mask->maps.size());
        for (const auto& m : mask->maps) {
          maps.push_back(crop_reflect(m, r0, c0, spec.patch_m, spec.patch_h));
        }
        mask_patch = MaskStack{std::move(maps), mask->mode};
      }
      out.push_back(TiledPatch{ImagePatch{id, std::move(channels)}, std::move(mask_patch), tr, tc});
    }
  }
  return out;
}

}  // namespace propseg
