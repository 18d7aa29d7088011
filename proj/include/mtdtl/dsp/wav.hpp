#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mtdtl/core/error.hpp"

namespace mtdtl::dsp {

struct AudioClip {
  std::vector<std::vector<double>> channels;  // samples in [-1, 1]
  double sample_rate = 22050.0;

  std::size_t channel_count() const { return channels.size(); }
  std::size_t length() const { return channels.empty() ? 0 : channels[0].size(); }

  void validate() const {
    require(!channels.empty() && channels.size() <= 2, "audio clip must have 1 or 2 channels");
    require(sample_rate > 0, "sample rate must be positive");
    for (const auto& c : channels) {
      require(c.size() == channels[0].size(), "audio channels have different lengths");
      for (double v : c) require(std::isfinite(v), "audio clip contains non-finite samples");
    }
  }

  std::vector<double> mono() const {
    std::vector<double> m(length(), 0.0);
    for (const auto& c : channels)
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += c[i];
    for (auto& v : m) v /= static_cast<double>(channels.size());
    return m;
  }
};

enum class WavEncoding { pcm16, float32 };

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

inline void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

/// Little-endian RIFF/WAVE with 16-bit PCM or 32-bit float samples, mono or stereo.
inline AudioClip parse_wav(const std::string& bytes, const std::string& origin = "<wav>") {
  using detail::le16;
  using detail::le32;
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(b, "RIFF", 4) != 0 || std::memcmp(b + 8, "WAVE", 4) != 0)
    throw IoError(origin + ": not a RIFF/WAVE file");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  for (std::size_t pos = 12; pos + 8 <= bytes.size();) {
    const std::uint32_t size = le32(b + pos + 4);
    const unsigned char* body = b + pos + 8;
    if (pos + 8 + size > bytes.size()) throw IoError(origin + ": truncated chunk");
    if (std::memcmp(b + pos, "fmt ", 4) == 0) {
      if (size < 16) throw IoError(origin + ": short fmt chunk");
      format = le16(body);
      channels = le16(body + 2);
      rate = le32(body + 4);
      bits = le16(body + 14);
      if (format == 0xFFFE && size >= 26) format = le16(body + 24);  // extensible: sub-format GUID prefix
    } else if (std::memcmp(b + pos, "data", 4) == 0) {
      data = body;
      data_size = size;
    }
    pos += 8 + size + (size & 1);
  }
  if (!data || channels == 0) throw IoError(origin + ": missing fmt or data chunk");
  if (channels > 2) throw IoError(origin + ": only mono or stereo audio is supported");
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32) throw IoError(origin + ": unsupported sample format (need 16-bit PCM or 32-bit float)");
  const std::size_t width = bits / 8, frames = data_size / (width * channels);
  AudioClip clip;
  clip.sample_rate = rate;
  clip.channels.assign(channels, std::vector<double>(frames));
  for (std::size_t i = 0; i < frames; ++i)
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * width;
      if (pcm16) {
        clip.channels[c][i] = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        const std::uint32_t u = le32(p);
        float f;
        std::memcpy(&f, &u, 4);
        clip.channels[c][i] = f;
      }
    }
  clip.validate();
  return clip;
}

inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("missing file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_wav(bytes, path.string());
}

inline std::string encode_wav(const AudioClip& clip, WavEncoding enc) {
  clip.validate();
  const std::uint16_t ch = static_cast<std::uint16_t>(clip.channel_count());
  const std::uint16_t bits = enc == WavEncoding::pcm16 ? 16 : 32;
  const std::uint32_t data_size = static_cast<std::uint32_t>(clip.length() * ch * bits / 8);
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  std::string s = "RIFF";
  detail::put32(s, 36 + data_size);
  s += "WAVEfmt ";
  detail::put32(s, 16);
  detail::put16(s, enc == WavEncoding::pcm16 ? 1 : 3);
  detail::put16(s, ch);
  detail::put32(s, rate);
  detail::put32(s, rate * ch * bits / 8);
  detail::put16(s, static_cast<std::uint16_t>(ch * bits / 8));
  detail::put16(s, bits);
  s += "data";
  detail::put32(s, data_size);
  for (std::size_t i = 0; i < clip.length(); ++i)
    for (std::size_t c = 0; c < ch; ++c) {
      const double v = std::clamp(clip.channels[c][i], -1.0, 1.0);
      if (enc == WavEncoding::pcm16) {
        const auto q = static_cast<std::int16_t>(std::lround(std::clamp(v * 32768.0, -32768.0, 32767.0)));
        detail::put16(s, static_cast<std::uint16_t>(q));
      } else {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        detail::put32(s, u);
      }
    }
  return s;
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding enc = WavEncoding::pcm16) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << encode_wav(clip, enc);
}

} // namespace mtdtl::dsp
