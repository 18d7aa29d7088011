#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "mtdtl/core/error.hpp"

namespace mtdtl {

/// 64-bit FNV-1a, used for content hashes of corpora, configs and manifests.
class Fnv1a {
public:
  void update(const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return state_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string hash_string(std::string_view s) {
  Fnv1a h;
  h.update(s);
  return h.hex();
}

inline void hash_file_into(Fnv1a& h, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("missing file: " + path.string());
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(is.gcount()));
  }
}

} // namespace mtdtl
