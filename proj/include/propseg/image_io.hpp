#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace propseg {

/// Decoded 8-bit image, row-major, channels interleaved (1 = gray, 3 = RGB).
struct ImageU8 {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int r, int c, int ch) const {
    return data[static_cast<std::size_t>((r * cols + c) * channels + ch)];
  }
};

/// Reads PNG or JPEG, dispatching on file magic. 16-bit PNGs are reduced to
/// 8 bits; palette and alpha variants are expanded/stripped.
ImageU8 read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const ImageU8& image);

}  // namespace propseg
