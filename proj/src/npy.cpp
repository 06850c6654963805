#include "propseg/npy.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace propseg {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "<f4" || dtype == "<i4") return 4;
  if (dtype == "<f8" || dtype == "<i8") return 8;
  if (dtype == "|u1") return 1;
  throw std::invalid_argument("npy: unsupported dtype " + dtype);
}

}  // namespace

void save_npy(const std::filesystem::path& path, const NpyArray& array) {
  const std::size_t expected = array.element_count() * dtype_size(array.dtype);
  if (array.data.size() != expected) {
    throw std::invalid_argument("npy: data size does not match shape for " + path.string());
  }

  std::ostringstream dict;
  dict << "{'descr': '" << array.dtype << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < array.shape.size(); ++i) {
    dict << array.shape[i];
    if (array.shape.size() == 1 || i + 1 < array.shape.size()) dict << ",";
    if (i + 1 < array.shape.size()) dict << " ";
  }
  dict << "), }";
  std::string header = dict.str();
  // pad with spaces so that magic(6)+version(2)+len(2)+header is a multiple of 64
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("npy: cannot open for writing: " + path.string());
  out.write(kMagic, 6);
  out.put(1).put(0);
  const auto len = static_cast<std::uint16_t>(header.size());
  out.put(static_cast<char>(len & 0xff)).put(static_cast<char>(len >> 8));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(array.data.data()),
            static_cast<std::streamsize>(array.data.size()));
  if (!out) throw std::runtime_error("npy: write failed: " + path.string());
}

NpyArray load_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("npy: cannot open: " + path.string());

  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) {
    throw std::runtime_error("npy: bad magic in " + path.string());
  }
  char major = 0, minor = 0;
  in.get(major).get(minor);
  std::uint16_t header_len = 0;
  if (major == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    header_len = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  } else {
    throw std::runtime_error("npy: unsupported version in " + path.string());
  }
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw std::runtime_error("npy: truncated header in " + path.string());

  NpyArray array;
  const auto descr_pos = header.find("'descr':");
  const auto shape_pos = header.find("'shape':");
  const auto order_pos = header.find("'fortran_order':");
  if (descr_pos == std::string::npos || shape_pos == std::string::npos) {
    throw std::runtime_error("npy: malformed header in " + path.string());
  }
  if (order_pos != std::string::npos && header.find("True", order_pos) < header.find(",", order_pos)) {
    throw std::runtime_error("npy: fortran order unsupported: " + path.string());
  }
  {
    const auto q0 = header.find('\'', descr_pos + 8);
    const auto q1 = header.find('\'', q0 + 1);
    array.dtype = header.substr(q0 + 1, q1 - q0 - 1);
  }
  {
    const auto p0 = header.find('(', shape_pos);
    const auto p1 = header.find(')', p0);
    std::stringstream ss(header.substr(p0 + 1, p1 - p0 - 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.find_first_of("0123456789") == std::string::npos) continue;
      array.shape.push_back(static_cast<std::size_t>(std::stoull(tok)));
    }
  }

  array.data.resize(array.element_count() * dtype_size(array.dtype));
  in.read(reinterpret_cast<char*>(array.data.data()),
          static_cast<std::streamsize>(array.data.size()));
  if (!in) throw std::runtime_error("npy: truncated data in " + path.string());
  return array;
}

}  // namespace propseg
