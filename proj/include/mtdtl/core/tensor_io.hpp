#pragma once

// Binary tensor format: "MRT1", u8 rank, rank x u32 LE dims, f32 LE values row-major.
// Several records may be concatenated in one stream.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <vector>

#include "mtdtl/core/error.hpp"
#include "mtdtl/core/tensor.hpp"

namespace mtdtl::io {

static_assert(std::endian::native == std::endian::little, "binary tensor IO assumes a little-endian host");

inline constexpr std::array<char, 4> kTensorMagic{'M', 'R', 'T', '1'};

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  os.write(kTensorMagic.data(), 4);
  const auto rank = static_cast<std::uint8_t>(t.rank());
  os.write(reinterpret_cast<const char*>(&rank), 1);
  for (std::size_t d : t.shape()) {
    require(d <= std::numeric_limits<std::uint32_t>::max(), "tensor dimension exceeds u32");
    const auto dim = static_cast<std::uint32_t>(d);
    os.write(reinterpret_cast<const char*>(&dim), 4);
  }
  std::vector<float> buf(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(t[i]);
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw IoError("failed writing tensor");
}

template <typename T = float>
Tensor<T> read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), 4);
  if (!is || magic != kTensorMagic) throw IoError("bad tensor magic (expected MRT1)");
  std::uint8_t rank = 0;
  is.read(reinterpret_cast<char*>(&rank), 1);
  if (!is || rank > 4) throw IoError("bad tensor rank");
  Shape shape(rank);
  for (auto& d : shape) {
    std::uint32_t dim = 0;
    is.read(reinterpret_cast<char*>(&dim), 4);
    d = dim;
  }
  if (!is) throw IoError("truncated tensor header");
  std::vector<float> buf(shape_size(shape));
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is) throw IoError("truncated tensor payload");
  return Tensor<T>(std::move(shape), std::vector<T>(buf.begin(), buf.end()));
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  write_tensor(os, t);
}

template <typename T = float>
Tensor<T> load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("missing file: " + path.string());
  return read_tensor<T>(is);
}

template <typename T>
void save_tensors(const std::filesystem::path& path, const std::vector<Tensor<T>>& ts) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  for (const auto& t : ts) write_tensor(os, t);
}

template <typename T = float>
std::vector<Tensor<T>> load_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("missing file: " + path.string());
  std::vector<Tensor<T>> out;
  while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_tensor<T>(is));
  return out;
}

} // namespace mtdtl::io
