#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "mtdtl/core/tensor.hpp"
#include "mtdtl/dsp/wav.hpp"

namespace mtdtl::dsp {

struct StftConfig {
  std::size_t window = 1024;
  std::size_t hop = 256;
  std::size_t bands = 128;
  double fmin = 0.0;
  double fmax = 11025.0;
  // Zero-pad window/2 on both sides so frame t is centred on sample t*hop.
  bool center = true;
};

inline constexpr double kMagnitudeFloor = 1e-10;

struct Spectrogram {
  Tensor<float> data;  // channels x frames x bands
  std::size_t window = 1024, hop = 256;

  std::size_t channels() const { return data.dim(0); }
  std::size_t frames() const { return data.dim(1); }
  std::size_t bands() const { return data.dim(2); }
};

inline std::size_t frame_count(std::size_t length, std::size_t window, std::size_t hop, bool center) {
  require(window > 0 && hop > 0, "window and hop must be positive");
  require(length >= window, "clip too short");
  return center ? 1 + length / hop : 1 + (length - window) / hop;
}

inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

namespace detail {

// FFTW planning is not thread-safe; execution with new-array functions is.
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace detail

/// Magnitude STFT of one channel: frames x (window/2 + 1).
inline std::vector<std::vector<double>> stft_magnitude(const std::vector<double>& x, std::size_t window,
                                                       std::size_t hop, bool center) {
  const std::size_t n = frame_count(x.size(), window, hop, center);
  const std::size_t bins = window / 2 + 1;
  const auto win = hann_window(window);
  const std::ptrdiff_t offset = center ? -static_cast<std::ptrdiff_t>(window / 2) : 0;

  double* in = fftw_alloc_real(window);
  fftw_complex* out = fftw_alloc_complex(bins);
  std::unique_ptr<fftw_plan_s, detail::PlanDeleter> plan;
  {
    std::lock_guard lock(detail::fftw_plan_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(window), in, out, FFTW_ESTIMATE));
  }
  std::vector<std::vector<double>> mag(n, std::vector<double>(bins));
  for (std::size_t t = 0; t < n; ++t) {
    const std::ptrdiff_t start = offset + static_cast<std::ptrdiff_t>(t * hop);
    for (std::size_t i = 0; i < window; ++i) {
      const std::ptrdiff_t j = start + static_cast<std::ptrdiff_t>(i);
      in[i] = (j >= 0 && j < static_cast<std::ptrdiff_t>(x.size())) ? x[static_cast<std::size_t>(j)] * win[i] : 0.0;
    }
    fftw_execute_dft_r2c(plan.get(), in, out);
    for (std::size_t k = 0; k < bins; ++k) mag[t][k] = std::hypot(out[k][0], out[k][1]);
  }
  fftw_free(in);
  fftw_free(out);
  return mag;
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Triangular HTK-mel filters: bands x (window/2 + 1), unnormalised peaks of 1.
inline std::vector<std::vector<double>> mel_filterbank(std::size_t bands, std::size_t window, double sample_rate,
                                                       double fmin, double fmax) {
  require(bands >= 1, "mel band count must be positive");
  require(fmax > fmin && fmax <= sample_rate / 2 + 1e-9, "mel range must lie within [0, sample_rate/2]");
  const std::size_t bins = window / 2 + 1;
  const double lo = hz_to_mel(fmin), hi = hz_to_mel(fmax);
  std::vector<double> edges(bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bands + 1));
  std::vector<std::vector<double>> fb(bands, std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < bands; ++m)
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(window);
      const double up = (f - edges[m]) / (edges[m + 1] - edges[m]);
      const double down = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
      fb[m][k] = std::max(0.0, std::min(up, down));
    }
  return fb;
}

/// frames x bands dB mel spectrum of one channel.
inline std::vector<std::vector<double>> mel_db(const std::vector<double>& x, double sample_rate,
                                               const StftConfig& cfg) {
  const auto mag = stft_magnitude(x, cfg.window, cfg.hop, cfg.center);
  const auto fb = mel_filterbank(cfg.bands, cfg.window, sample_rate, cfg.fmin, std::min(cfg.fmax, sample_rate / 2));
  std::vector<std::vector<double>> out(mag.size(), std::vector<double>(cfg.bands));
  for (std::size_t t = 0; t < mag.size(); ++t)
    for (std::size_t m = 0; m < cfg.bands; ++m) {
      double s = 0.0;
      for (std::size_t k = 0; k < mag[t].size(); ++k) s += fb[m][k] * mag[t][k];
      out[t][m] = 20.0 * std::log10(std::max(s, kMagnitudeFloor));
    }
  return out;
}

inline Spectrogram stft_mel_db(const AudioClip& clip, const StftConfig& cfg = {}) {
  clip.validate();
  if (clip.length() < cfg.window) throw InvalidArgument("clip too short");
  const std::size_t n = frame_count(clip.length(), cfg.window, cfg.hop, cfg.center);
  Spectrogram s;
  s.window = cfg.window;
  s.hop = cfg.hop;
  s.data = Tensor<float>({clip.channel_count(), n, cfg.bands});
  for (std::size_t c = 0; c < clip.channel_count(); ++c) {
    const auto m = mel_db(clip.channels[c], clip.sample_rate, cfg);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t b = 0; b < cfg.bands; ++b) s.data.at(c, t, b) = static_cast<float>(m[t][b]);
  }
  return s;
}

struct StandardizationStats {
  std::vector<double> mean, sd;
};

inline constexpr double kMinBandSd = 1e-8;

/// Per-band mean and population sd over every frame of every clip, channels pooled.
inline StandardizationStats fit_standardization(const std::vector<const Tensor<float>*>& corpus) {
  require(!corpus.empty(), "standardization needs a non-empty corpus");
  const std::size_t B = corpus.front()->dim(2);
  std::vector<double> sum(B, 0.0);
  double count = 0.0;
  for (const auto* s : corpus) {
    require(s->rank() == 3 && s->dim(2) == B, "spectrogram band counts differ within corpus");
    for (std::size_t i = 0; i < s->size(); ++i) sum[i % B] += (*s)[i];
    count += static_cast<double>(s->size() / B);
  }
  StandardizationStats st;
  st.mean.resize(B);
  st.sd.resize(B);
  for (std::size_t b = 0; b < B; ++b) st.mean[b] = sum[b] / count;
  std::vector<double> ss(B, 0.0);
  for (const auto* s : corpus)
    for (std::size_t i = 0; i < s->size(); ++i) {
      const double d = (*s)[i] - st.mean[i % B];
      ss[i % B] += d * d;
    }
  for (std::size_t b = 0; b < B; ++b) st.sd[b] = std::max(std::sqrt(ss[b] / count), kMinBandSd);
  return st;
}

inline StandardizationStats fit_standardization(const std::vector<Spectrogram>& corpus) {
  std::vector<const Tensor<float>*> ptrs;
  for (const auto& s : corpus) ptrs.push_back(&s.data);
  return fit_standardization(ptrs);
}

inline Tensor<float> apply_standardization(const Tensor<float>& s, const StandardizationStats& st) {
  require(s.rank() == 3 && s.dim(2) == st.mean.size(),
          "band count mismatch: spectrogram has " + std::to_string(s.rank() == 3 ? s.dim(2) : 0) +
              ", stats have " + std::to_string(st.mean.size()));
  const std::size_t B = st.mean.size();
  Tensor<float> out(s.shape());
  for (std::size_t i = 0; i < s.size(); ++i)
    out[i] = static_cast<float>((static_cast<double>(s[i]) - st.mean[i % B]) / st.sd[i % B]);
  return out;
}

inline Spectrogram apply_standardization(const Spectrogram& s, const StandardizationStats& st) {
  Spectrogram out = s;
  out.data = apply_standardization(s.data, st);
  return out;
}

} // namespace mtdtl::dsp
