#include <gtest/gtest.h>

#include <complex>
#include <numbers>

#include "mtdtl/core/random.hpp"
#include "mtdtl/dsp/mfcc.hpp"
#include "mtdtl/dsp/spectrogram.hpp"
#include "mtdtl/dsp/wav.hpp"

using namespace mtdtl;
using namespace mtdtl::dsp;

namespace {

AudioClip sine(double seconds, double hz, std::size_t channels = 1, double sr = 22050.0) {
  AudioClip c;
  c.sample_rate = sr;
  const auto n = static_cast<std::size_t>(seconds * sr);
  c.channels.assign(channels, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (auto& ch : c.channels) ch[i] = 0.5 * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / sr);
  return c;
}

AudioClip noise(std::size_t n, std::size_t channels, std::uint64_t seed) {
  AudioClip c;
  Rng rng(seed);
  c.channels.assign(channels, std::vector<double>(n));
  for (auto& ch : c.channels)
    for (auto& v : ch) v = 0.2 * normal01(rng);
  return c;
}

}  // namespace

TEST(Stft, PreviewCropShapeIs2x216x128) {
  const auto s = stft_mel_db(noise(static_cast<std::size_t>(2.5 * 22050), 2, 1));
  EXPECT_EQ(s.data.shape(), (Shape{2, 216, 128}));
}

TEST(Stft, FrameCountFormulas) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t window = 16 + uniform_index(rng, 64), hop = 1 + uniform_index(rng, 40);
    const std::size_t len = window + uniform_index(rng, 500);
    const auto x = noise(len, 1, static_cast<std::uint64_t>(trial)).channels[0];
    EXPECT_EQ(stft_magnitude(x, window, hop, false).size(), 1 + (len - window) / hop);
    EXPECT_EQ(stft_magnitude(x, window, hop, true).size(), 1 + len / hop);
  }
  StftConfig flat;
  flat.center = false;
  EXPECT_EQ(stft_mel_db(noise(55125, 1, 2), flat).frames(), 212u);
  EXPECT_THROW(stft_mel_db(noise(1000, 1, 2)), InvalidArgument);
  try {
    stft_mel_db(noise(1000, 1, 2));
  } catch (const std::exception& e) {
    EXPECT_STREQ(e.what(), "clip too short");
  }
}

TEST(Stft, SilenceIsAtTheFloor) {
  AudioClip c;
  c.channels.assign(2, std::vector<double>(22050, 0.0));
  const auto s = stft_mel_db(c);
  for (float v : s.data.storage()) EXPECT_FLOAT_EQ(v, -200.0f);
}

TEST(Stft, MatchesNaiveDftOnOneFrame) {
  const auto clip = sine(5.0, 1000.0);
  const auto mag = stft_magnitude(clip.channels[0], 1024, 256, false);
  const std::size_t frame = 40;
  const auto w = hann_window(1024);
  std::vector<double> oracle(513);
  for (std::size_t k = 0; k < 513; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < 1024; ++n)
      acc += clip.channels[0][frame * 256 + n] * w[n] *
             std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * n) / 1024.0);
    oracle[k] = std::abs(acc);
  }
  const std::size_t peak = static_cast<std::size_t>(std::max_element(oracle.begin(), oracle.end()) - oracle.begin());
  EXPECT_EQ(peak, static_cast<std::size_t>(std::lround(1000.0 * 1024 / 22050)));
  EXPECT_LT(std::abs(mag[frame][peak] - oracle[peak]) / oracle[peak], 1e-6);
  for (std::size_t k = 0; k < 513; ++k) EXPECT_NEAR(mag[frame][k], oracle[k], 1e-6 * oracle[peak]);
}

TEST(Stft, SineEnergyLandsInTheBandContaining1kHz) {
  const auto s = stft_mel_db(sine(5.0, 1000.0));
  const auto fb = mel_filterbank(128, 1024, 22050, 0, 11025);
  const std::size_t bin = 46;  // nearest FFT bin to 1 kHz
  std::size_t expected = 0;
  for (std::size_t m = 0; m < 128; ++m)
    if (fb[m][bin] > fb[expected][bin]) expected = m;
  for (std::size_t t = 10; t < s.frames() - 10; ++t) {
    std::size_t best = 0;
    for (std::size_t b = 0; b < 128; ++b)
      if (s.data.at(0, t, b) > s.data.at(0, t, best)) best = b;
    EXPECT_LE(best > expected ? best - expected : expected - best, 1u) << "frame " << t;
  }
}

TEST(Mel, FilterbankRowsAreContiguousNonNegativeAndPositive) {
  for (std::size_t bands : {32u, 64u, 128u}) {
    const auto fb = mel_filterbank(bands, 1024, 22050, 0, 11025);
    for (const auto& row : fb) {
      double sum = 0;
      int runs = 0;
      bool inside = false;
      for (double v : row) {
        EXPECT_GE(v, 0.0);
        sum += v;
        if (v > 0 && !inside) ++runs;
        inside = v > 0;
      }
      EXPECT_GT(sum, 0.0);
      EXPECT_EQ(runs, 1);
    }
  }
  EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(Standardization, ConstantCorpusClampsSd) {
  Tensor<float> s({1, 4, 3}, 7.0f);
  const auto st = fit_standardization(std::vector<const Tensor<float>*>{&s});
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_DOUBLE_EQ(st.mean[b], 7.0);
    EXPECT_DOUBLE_EQ(st.sd[b], kMinBandSd);
  }
  const auto z = apply_standardization(s, st);
  for (float v : z.storage()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(fit_standardization(std::vector<const Tensor<float>*>{}), InvalidArgument);
}

TEST(Standardization, TwoClipsHandComputed) {
  // band 0 values {1,3} and {5}; band 1 values {2,2} and {8}; pooled over channels and clips
  Tensor<float> a({1, 2, 2}, std::vector<float>{1, 2, 3, 2});
  Tensor<float> b({1, 1, 2}, std::vector<float>{5, 8});
  const auto st = fit_standardization(std::vector<const Tensor<float>*>{&a, &b});
  EXPECT_DOUBLE_EQ(st.mean[0], 3.0);
  EXPECT_DOUBLE_EQ(st.mean[1], 4.0);
  EXPECT_NEAR(st.sd[0], std::sqrt(8.0 / 3.0), 1e-12);
  EXPECT_NEAR(st.sd[1], std::sqrt(8.0), 1e-12);
}

TEST(Standardization, ApplyThenRefitIsIdentityStats) {
  Rng rng(2);
  std::vector<Tensor<float>> corpus;
  for (int i = 0; i < 4; ++i) {
    Tensor<float> s({2, 30 + static_cast<std::size_t>(i), 8});
    for (auto& v : s.storage()) v = static_cast<float>(10 * normal01(rng) - 40);
    corpus.push_back(s);
  }
  std::vector<const Tensor<float>*> ptrs;
  for (auto& s : corpus) ptrs.push_back(&s);
  const auto st = fit_standardization(ptrs);
  std::vector<Tensor<float>> standardized;
  for (auto& s : corpus) standardized.push_back(apply_standardization(s, st));
  std::vector<const Tensor<float>*> p2;
  for (auto& s : standardized) p2.push_back(&s);
  const auto st2 = fit_standardization(p2);
  for (std::size_t b = 0; b < 8; ++b) {
    EXPECT_LT(std::abs(st2.mean[b]), 1e-6);
    EXPECT_LT(std::abs(st2.sd[b] - 1.0), 1e-6);
  }
  // elementwise oracle
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 30; ++t)
      for (std::size_t f = 0; f < 8; ++f)
        EXPECT_FLOAT_EQ(standardized[0].at(c, t, f),
                        static_cast<float>((corpus[0].at(c, t, f) - st.mean[f]) / st.sd[f]));
  StandardizationStats unit{std::vector<double>(8, 0.0), std::vector<double>(8, 1.0)};
  EXPECT_EQ(apply_standardization(corpus[0], unit), corpus[0]);
  StandardizationStats wrong{std::vector<double>(4, 0.0), std::vector<double>(4, 1.0)};
  EXPECT_THROW(apply_standardization(corpus[0], wrong), InvalidArgument);
}

TEST(Mfcc, DctIsOrthonormal) {
  for (std::size_t n : {20u, 32u, 128u}) {
    const auto d = dct2_matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < n; ++k) s += d[i][k] * d[j][k];
        EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-10);
      }
  }
}

TEST(Mfcc, OutputLengthAndConstantInput) {
  EXPECT_EQ(mfcc_feature(noise(22050 * 3, 2, 5)).size(), 120u);
  std::vector<std::vector<double>> mel(10, std::vector<double>(32));
  for (auto& row : mel)
    for (std::size_t b = 0; b < 32; ++b) row[b] = -20.0 + static_cast<double>(b);
  const auto f = mfcc_from_mel_db(mel);
  for (std::size_t i = 20; i < 60; ++i) EXPECT_NEAR(f[i], 0.0, 1e-12);
  for (std::size_t i = 60; i < 120; ++i) EXPECT_NEAR(f[i], 0.0, 1e-12);
  EXPECT_THROW(mfcc_from_mel_db(std::vector<std::vector<double>>(2, std::vector<double>(32))), InvalidArgument);
  EXPECT_THROW(mfcc_feature(noise(500, 1, 1)), InvalidArgument);
}

TEST(Mfcc, DeltaOfRampIsConstantInside) {
  std::vector<std::vector<double>> x{{0}, {1}, {2}, {3}};
  const auto d = delta(x);
  EXPECT_DOUBLE_EQ(d[0][0], 0.5);
  EXPECT_DOUBLE_EQ(d[1][0], 1.0);
  EXPECT_DOUBLE_EQ(d[2][0], 1.0);
  EXPECT_DOUBLE_EQ(d[3][0], 0.5);
}

TEST(Wav, RoundTripsPcm16AndFloat) {
  auto clip = noise(1000, 2, 9);
  const auto f = parse_wav(encode_wav(clip, WavEncoding::float32));
  ASSERT_EQ(f.channel_count(), 2u);
  ASSERT_EQ(f.length(), 1000u);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(f.channels[1][i], static_cast<float>(clip.channels[1][i]));
  const auto p = parse_wav(encode_wav(clip, WavEncoding::pcm16));
  EXPECT_EQ(p.sample_rate, 22050.0);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_NEAR(p.channels[0][i], clip.channels[0][i], 1.0 / 32768);
  EXPECT_THROW(parse_wav("RIFF0000WAVX"), IoError);
  std::string bad = encode_wav(clip, WavEncoding::pcm16);
  bad[34] = 8;  // 8-bit samples are not supported
  EXPECT_THROW(parse_wav(bad), IoError);
}
