#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "mtdtl/dsp/spectrogram.hpp"

namespace mtdtl::dsp {

inline constexpr std::size_t kMfccCoefficients = 20;
inline constexpr std::size_t kMfccDim = 6 * kMfccCoefficients;

/// Rows 0..rows-1 of the orthonormal DCT-II of size n.
inline std::vector<std::vector<double>> dct2_matrix(std::size_t rows, std::size_t n) {
  std::vector<std::vector<double>> d(rows, std::vector<double>(n));
  for (std::size_t k = 0; k < rows; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      d[k][i] = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                                 (2.0 * static_cast<double>(n)));
  }
  return d;
}

/// Central differences along time with replicated edges.
inline std::vector<std::vector<double>> delta(const std::vector<std::vector<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n ? x[0].size() : 0));
  for (std::size_t t = 0; t < n; ++t) {
    const auto& prev = x[t == 0 ? 0 : t - 1];
    const auto& next = x[t + 1 == n ? n - 1 : t + 1];
    for (std::size_t j = 0; j < d[t].size(); ++j) d[t][j] = 0.5 * (next[j] - prev[j]);
  }
  return d;
}

/// 120-dim summary from a frames x bands dB mel spectrum: [means(60), sds(60)] of
/// (20 cepstra, deltas, delta-deltas).
inline std::vector<double> mfcc_from_mel_db(const std::vector<std::vector<double>>& mel) {
  require(mel.size() >= 3, "clip too short for mfcc: need at least 3 frames");
  const std::size_t B = mel[0].size();
  require(B >= kMfccCoefficients, "mfcc needs at least 20 mel bands");
  const auto D = dct2_matrix(kMfccCoefficients, B);
  std::vector<std::vector<double>> c(mel.size(), std::vector<double>(kMfccCoefficients, 0.0));
  for (std::size_t t = 0; t < mel.size(); ++t)
    for (std::size_t k = 0; k < kMfccCoefficients; ++k)
      for (std::size_t b = 0; b < B; ++b) c[t][k] += D[k][b] * mel[t][b];
  const auto d1 = delta(c);
  const auto d2 = delta(d1);
  std::vector<double> out(kMfccDim, 0.0);
  const double n = static_cast<double>(mel.size());
  const std::vector<const std::vector<std::vector<double>>*> parts{&c, &d1, &d2};
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t k = 0; k < kMfccCoefficients; ++k) {
      double m = 0.0, ss = 0.0;
      for (const auto& row : *parts[p]) m += row[k];
      m /= n;
      for (const auto& row : *parts[p]) ss += (row[k] - m) * (row[k] - m);
      out[p * kMfccCoefficients + k] = m;
      out[3 * kMfccCoefficients + p * kMfccCoefficients + k] = std::sqrt(ss / n);
    }
  return out;
}

inline std::vector<double> mfcc_feature(const AudioClip& clip, const StftConfig& cfg = {}) {
  clip.validate();
  if (clip.length() < cfg.window) throw InvalidArgument("clip too short");
  return mfcc_from_mel_db(mel_db(clip.mono(), clip.sample_rate, cfg));
}

/// MFCC summary of a stored c x frames x bands dB spectrogram (channels averaged in dB).
inline std::vector<double> mfcc_from_spectrogram(const Tensor<float>& s) {
  require(s.rank() == 3, "mfcc expects a channels x frames x bands tensor");
  std::vector<std::vector<double>> mel(s.dim(1), std::vector<double>(s.dim(2), 0.0));
  for (std::size_t c = 0; c < s.dim(0); ++c)
    for (std::size_t t = 0; t < s.dim(1); ++t)
      for (std::size_t b = 0; b < s.dim(2); ++b) mel[t][b] += s.at(c, t, b) / static_cast<double>(s.dim(0));
  return mfcc_from_mel_db(mel);
}

} // namespace mtdtl::dsp
