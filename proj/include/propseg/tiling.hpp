#pragma once

#include <optional>
#include <string>
#include <vector>

#include "propseg/types.hpp"

namespace propseg {

enum class EdgePolicy { drop_partial, pad_reflect };

struct TilingSpec {
  int patch_m = 224;
  int patch_h = 224;
  int stride_m = 224;
  int stride_h = 224;
  EdgePolicy edge_policy = EdgePolicy::drop_partial;
};

struct TiledPatch {
  ImagePatch patch;
  std::optional<MaskStack> mask;
  int tile_row = 0;
  int tile_col = 0;
};

/// Cuts an image (and its co-located mask, when present) into patches laid on
/// the stride grid, row-major. drop_partial keeps only fully covered tiles;
/// pad_reflect mirror-extends the bottom/right border so every pixel is
/// covered. Patch ids are "<base_id>_r<row>_c<col>".
std::vector<TiledPatch> tile_image(const std::vector<PixelPlane>& image,
                                   const std::optional<MaskStack>& mask, const TilingSpec& spec,
                                   const std::string& base_id);

}  // namespace propseg
