#pragma once

// Forward/backward kernels for each layer kind. Batched tensors are N x C x H x W
// (H = time, W = frequency) or N x F.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mtdtl/core/random.hpp"
#include "mtdtl/core/tensor.hpp"
#include "mtdtl/nn/layer_spec.hpp"

namespace mtdtl::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstRowMap = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
  std::size_t in_c, in_h, in_w, out_c, out_h, out_w;
  std::size_t kh, kw, sh, sw, pad_top, pad_left;

  static ConvGeometry make(const LayerSpec& s, const Shape& x) {
    ConvGeometry g{};
    g.in_c = x[1];
    g.in_h = x[2];
    g.in_w = x[3];
    g.out_c = s.out;
    g.kh = s.kernel_h;
    g.kw = s.kernel_w;
    g.sh = s.stride_h;
    g.sw = s.stride_w;
    g.out_h = (g.in_h + g.sh - 1) / g.sh;
    g.out_w = (g.in_w + g.sw - 1) / g.sw;
    const auto pad_h = std::max<long>(0, static_cast<long>((g.out_h - 1) * g.sh + g.kh) - static_cast<long>(g.in_h));
    const auto pad_w = std::max<long>(0, static_cast<long>((g.out_w - 1) * g.sw + g.kw) - static_cast<long>(g.in_w));
    g.pad_top = static_cast<std::size_t>(pad_h / 2);
    g.pad_left = static_cast<std::size_t>(pad_w / 2);
    return g;
  }
  std::size_t patch() const { return in_c * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t P = g.positions();
  for (std::size_t c = 0; c < g.in_c; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const long h = static_cast<long>(oh * g.sh + i) - static_cast<long>(g.pad_top);
          T* dst = row + oh * g.out_w;
          if (h < 0 || h >= static_cast<long>(g.in_h)) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = x + (c * g.in_h + static_cast<std::size_t>(h)) * g.in_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const long w = static_cast<long>(ow * g.sw + j) - static_cast<long>(g.pad_left);
            dst[ow] = (w < 0 || w >= static_cast<long>(g.in_w)) ? T{0} : src[w];
          }
        }
      }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx) {
  const std::size_t P = g.positions();
  for (std::size_t c = 0; c < g.in_c; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = col + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const long h = static_cast<long>(oh * g.sh + i) - static_cast<long>(g.pad_top);
          if (h < 0 || h >= static_cast<long>(g.in_h)) continue;
          T* dst = dx + (c * g.in_h + static_cast<std::size_t>(h)) * g.in_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const long w = static_cast<long>(ow * g.sw + j) - static_cast<long>(g.pad_left);
            if (w >= 0 && w < static_cast<long>(g.in_w)) dst[w] += row[oh * g.out_w + ow];
          }
        }
      }
}

/// weight: out_c x in_c x kh x kw; bias may be empty.
template <typename T>
Tensor<T> conv2d_forward(const LayerSpec& s, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  const auto g = ConvGeometry::make(s, x.shape());
  const std::size_t N = x.dim(0), K = g.patch(), P = g.positions();
  Tensor<T> y({N, g.out_c, g.out_h, g.out_w});
  std::vector<T> col(K * P);
  ConstRowMap<T> W(weight.data(), g.out_c, K);
  for (std::size_t n = 0; n < N; ++n) {
    im2col(x.data() + n * g.in_c * g.in_h * g.in_w, g, col.data());
    RowMap<T> out(y.data() + n * g.out_c * P, g.out_c, P);
    out.noalias() = W * ConstRowMap<T>(col.data(), K, P);
    if (!bias.empty())
      for (std::size_t o = 0; o < g.out_c; ++o) out.row(o).array() += bias[o];
  }
  return y;
}

template <typename T>
void conv2d_backward(const LayerSpec& s, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& gy,
                     Tensor<T>& gx, Tensor<T>& gweight, Tensor<T>& gbias) {
  const auto g = ConvGeometry::make(s, x.shape());
  const std::size_t N = x.dim(0), K = g.patch(), P = g.positions();
  gx = Tensor<T>(x.shape());
  gweight = Tensor<T>(weight.shape());
  if (s.bias) gbias = Tensor<T>({g.out_c});
  std::vector<T> col(K * P), gcol(K * P);
  ConstRowMap<T> W(weight.data(), g.out_c, K);
  RowMap<T> GW(gweight.data(), g.out_c, K);
  for (std::size_t n = 0; n < N; ++n) {
    im2col(x.data() + n * g.in_c * g.in_h * g.in_w, g, col.data());
    ConstRowMap<T> G(gy.data() + n * g.out_c * P, g.out_c, P);
    GW.noalias() += G * ConstRowMap<T>(col.data(), K, P).transpose();
    RowMap<T>(gcol.data(), K, P).noalias() = W.transpose() * G;
    col2im_add(gcol.data(), g, gx.data() + n * g.in_c * g.in_h * g.in_w);
    if (s.bias)
      for (std::size_t o = 0; o < g.out_c; ++o) gbias[o] += G.row(o).sum();
  }
}

/// Floor-mode max pooling; `argmax` receives the flat input index per output.
template <typename T>
Tensor<T> maxpool_forward(const LayerSpec& s, const Tensor<T>& x, std::vector<std::size_t>& argmax) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = H / s.stride_h, Wo = W / s.stride_w;
  Tensor<T> y({N, C, Ho, Wo});
  argmax.assign(y.size(), 0);
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const std::size_t base = nc * H * W;
    for (std::size_t oh = 0; oh < Ho; ++oh)
      for (std::size_t ow = 0; ow < Wo; ++ow, ++o) {
        std::size_t best = base + (oh * s.stride_h) * W + ow * s.stride_w;
        for (std::size_t i = 0; i < s.kernel_h; ++i)
          for (std::size_t j = 0; j < s.kernel_w; ++j) {
            const std::size_t idx = base + (oh * s.stride_h + i) * W + ow * s.stride_w + j;
            if (x[idx] > x[best]) best = idx;
          }
        y[o] = x[best];
        argmax[o] = best;
      }
  }
  return y;
}

template <typename T>
Tensor<T> maxpool_backward(const Shape& x_shape, const std::vector<std::size_t>& argmax, const Tensor<T>& gy) {
  Tensor<T> gx(x_shape);
  for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
  return gx;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& gy) {
  Tensor<T> gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > T{0} ? gy[i] : T{0};
  return gx;
}

template <typename T>
Tensor<T> gap_forward(const Tensor<T>& x) {
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor<T> y({N, C});
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    T acc{0};
    for (std::size_t i = 0; i < HW; ++i) acc += x[nc * HW + i];
    y[nc] = acc / static_cast<T>(HW);
  }
  return y;
}

template <typename T>
Tensor<T> gap_backward(const Shape& x_shape, const Tensor<T>& gy) {
  Tensor<T> gx(x_shape);
  const std::size_t HW = x_shape[2] * x_shape[3];
  for (std::size_t nc = 0; nc < gy.size(); ++nc) {
    const T v = gy[nc] / static_cast<T>(HW);
    std::fill(gx.data() + nc * HW, gx.data() + (nc + 1) * HW, v);
  }
  return gx;
}

/// weight: units x in; y = x W^T + b.
template <typename T>
Tensor<T> fc_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  const std::size_t N = x.dim(0), in = x.dim(1), out = weight.dim(0);
  Tensor<T> y({N, out});
  RowMap<T> Y(y.data(), N, out);
  Y.noalias() = ConstRowMap<T>(x.data(), N, in) * ConstRowMap<T>(weight.data(), out, in).transpose();
  if (!bias.empty())
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < out; ++o) Y(n, o) += bias[o];
  return y;
}

template <typename T>
void fc_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& gy, bool has_bias, Tensor<T>& gx,
                 Tensor<T>& gweight, Tensor<T>& gbias) {
  const std::size_t N = x.dim(0), in = x.dim(1), out = weight.dim(0);
  ConstRowMap<T> X(x.data(), N, in), Wt(weight.data(), out, in), G(gy.data(), N, out);
  gx = Tensor<T>({N, in});
  gweight = Tensor<T>({out, in});
  RowMap<T>(gx.data(), N, in).noalias() = G * Wt;
  RowMap<T>(gweight.data(), out, in).noalias() = G.transpose() * X;
  if (has_bias) {
    gbias = Tensor<T>({out});
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < out; ++o) gbias[o] += G(n, o);
  }
}

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Per-feature view of a batched tensor: count of values per feature and stride layout.
struct FeatureLayout {
  std::size_t N, F, inner;  // value (n, f, i) at (n * F + f) * inner + i
  static FeatureLayout of(const Shape& s) {
    return {s[0], s[1], s.size() == 4 ? s[2] * s[3] : 1};
  }
  std::size_t per_feature() const { return N * inner; }
};

struct BatchNormCache {
  std::vector<double> inv_std;
};

template <typename T>
Tensor<T> batchnorm_forward_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                  Tensor<T>& running_mean, Tensor<T>& running_var, Tensor<T>& xhat,
                                  BatchNormCache& cache) {
  const auto L = FeatureLayout::of(x.shape());
  const double m = static_cast<double>(L.per_feature());
  require(L.per_feature() > 1, "batchnorm in train mode needs more than one value per feature");
  Tensor<T> y(x.shape());
  xhat = Tensor<T>(x.shape());
  cache.inv_std.assign(L.F, 0.0);
  for (std::size_t f = 0; f < L.F; ++f) {
    double sum = 0.0;
    for (std::size_t n = 0; n < L.N; ++n)
      for (std::size_t i = 0; i < L.inner; ++i) sum += x[(n * L.F + f) * L.inner + i];
    const double mean = sum / m;
    double ss = 0.0;
    for (std::size_t n = 0; n < L.N; ++n)
      for (std::size_t i = 0; i < L.inner; ++i) {
        const double d = x[(n * L.F + f) * L.inner + i] - mean;
        ss += d * d;
      }
    const double var = ss / m;
    const double inv = 1.0 / std::sqrt(var + kBatchNormEps);
    cache.inv_std[f] = inv;
    for (std::size_t n = 0; n < L.N; ++n)
      for (std::size_t i = 0; i < L.inner; ++i) {
        const std::size_t idx = (n * L.F + f) * L.inner + i;
        const double h = (x[idx] - mean) * inv;
        xhat[idx] = static_cast<T>(h);
        y[idx] = static_cast<T>(gamma[f] * h + beta[f]);
      }
    running_mean[f] = static_cast<T>(kBatchNormMomentum * running_mean[f] + (1.0 - kBatchNormMomentum) * mean);
    running_var[f] =
        static_cast<T>(kBatchNormMomentum * running_var[f] + (1.0 - kBatchNormMomentum) * ss / (m - 1.0));
  }
  return y;
}

template <typename T>
Tensor<T> batchnorm_forward_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                 const Tensor<T>& running_mean, const Tensor<T>& running_var) {
  const auto L = FeatureLayout::of(x.shape());
  Tensor<T> y(x.shape());
  for (std::size_t n = 0; n < L.N; ++n)
    for (std::size_t f = 0; f < L.F; ++f) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(running_var[f]) + kBatchNormEps);
      for (std::size_t i = 0; i < L.inner; ++i) {
        const std::size_t idx = (n * L.F + f) * L.inner + i;
        y[idx] = static_cast<T>(gamma[f] * (x[idx] - running_mean[f]) * inv + beta[f]);
      }
    }
  return y;
}

template <typename T>
void batchnorm_backward(const Tensor<T>& xhat, const Tensor<T>& gamma, const BatchNormCache& cache,
                        const Tensor<T>& gy, Tensor<T>& gx, Tensor<T>& ggamma, Tensor<T>& gbeta) {
  const auto L = FeatureLayout::of(xhat.shape());
  const double m = static_cast<double>(L.per_feature());
  gx = Tensor<T>(xhat.shape());
  ggamma = Tensor<T>({L.F});
  gbeta = Tensor<T>({L.F});
  for (std::size_t f = 0; f < L.F; ++f) {
    double sg = 0.0, sgh = 0.0;
    for (std::size_t n = 0; n < L.N; ++n)
      for (std::size_t i = 0; i < L.inner; ++i) {
        const std::size_t idx = (n * L.F + f) * L.inner + i;
        sg += gy[idx];
        sgh += static_cast<double>(gy[idx]) * xhat[idx];
      }
    ggamma[f] = static_cast<T>(sgh);
    gbeta[f] = static_cast<T>(sg);
    const double k = gamma[f] * cache.inv_std[f] / m;
    for (std::size_t n = 0; n < L.N; ++n)
      for (std::size_t i = 0; i < L.inner; ++i) {
        const std::size_t idx = (n * L.F + f) * L.inner + i;
        gx[idx] = static_cast<T>(k * (m * gy[idx] - sg - xhat[idx] * sgh));
      }
  }
}

/// Inverted dropout: kept units are scaled by 1/(1-rate) so eval needs no rescale.
template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, double rate, Rng& rng, Tensor<T>& mask) {
  mask = Tensor<T>(x.shape());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = uniform01(rng) >= rate ? keep_scale : T{0};
    y[i] = x[i] * mask[i];
  }
  return y;
}

template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& x) {
  const std::size_t N = x.dim(0), K = x.dim(1);
  Tensor<T> y(x.shape());
  for (std::size_t n = 0; n < N; ++n) {
    const T* row = x.data() + n * K;
    const double mx = *std::max_element(row, row + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
    for (std::size_t k = 0; k < K; ++k) y[n * K + k] = static_cast<T>(std::exp(row[k] - mx) / z);
  }
  return y;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& gy) {
  const std::size_t N = y.dim(0), K = y.dim(1);
  Tensor<T> gx(y.shape());
  for (std::size_t n = 0; n < N; ++n) {
    double dot = 0.0;
    for (std::size_t k = 0; k < K; ++k) dot += static_cast<double>(gy[n * K + k]) * y[n * K + k];
    for (std::size_t k = 0; k < K; ++k) gx[n * K + k] = static_cast<T>(y[n * K + k] * (gy[n * K + k] - dot));
  }
  return gx;
}

} // namespace mtdtl::nn
