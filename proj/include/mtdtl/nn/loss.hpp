#pragma once

#include <cmath>

#include "mtdtl/core/tensor.hpp"
#include "mtdtl/nn/ops.hpp"

namespace mtdtl::nn {

/// KL(z || q) for one distribution pair, with 0 log 0 = 0.
inline double kl_divergence(std::span<const double> z, std::span<const double> q) {
  require(z.size() == q.size(), "kl: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z[i] > 0.0) kl += z[i] * std::log(z[i] / q[i]);
  return kl;
}

template <typename T>
struct LossResult {
  double loss = 0.0;          // batch mean
  Tensor<T> grad_logits;      // d loss / d logits
};

/// Batch-mean KL(z || q) where q = softmax(logits). The logit gradient per row is (q - z) / N.
template <typename T>
LossResult<T> kl_loss(const Tensor<T>& z, const Tensor<T>& q) {
  require(z.shape() == q.shape() && z.rank() == 2, "kl_loss: target " + shape_string(z.shape()) +
                                                       " does not match prediction " + shape_string(q.shape()));
  const std::size_t N = z.dim(0), K = z.dim(1);
  LossResult<T> r;
  r.grad_logits = Tensor<T>(q.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k) {
      const double zi = z[n * K + k];
      const double qi = std::max(static_cast<double>(q[n * K + k]), 1e-30);
      if (zi > 0.0) r.loss += zi * std::log(zi / qi);
      r.grad_logits[n * K + k] = static_cast<T>((q[n * K + k] - zi) / static_cast<double>(N));
    }
  r.loss /= static_cast<double>(N);
  return r;
}

template <typename T>
LossResult<T> kl_loss_from_logits(const Tensor<T>& z, const Tensor<T>& logits) {
  return kl_loss(z, softmax_forward(logits));
}

/// Batch-mean squared error 0.5 * (y - t)^2 summed over outputs.
template <typename T>
LossResult<T> squared_loss(const Tensor<T>& target, const Tensor<T>& pred) {
  require(target.shape() == pred.shape(), "squared_loss: shape mismatch");
  const double N = static_cast<double>(pred.dim(0));
  LossResult<T> r;
  r.grad_logits = Tensor<T>(pred.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += 0.5 * d * d;
    r.grad_logits[i] = static_cast<T>(d / N);
  }
  r.loss /= N;
  return r;
}

} // namespace mtdtl::nn
