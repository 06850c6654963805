#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace propseg {

/// Minimal NumPy .npy container (version 1.0, C order). Used for lossless
/// on-disk storage of patch pixels and mask label grids.
struct NpyArray {
  std::string dtype;                  // "<f4", "<f8", "|u1", "<i4", "<i8"
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> data;     // raw little-endian bytes

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }
};

void save_npy(const std::filesystem::path& path, const NpyArray& array);
NpyArray load_npy(const std::filesystem::path& path);

}  // namespace propseg
