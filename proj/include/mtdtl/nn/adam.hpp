#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mtdtl/nn/sequential.hpp"

namespace mtdtl::nn {

struct AdamConfig {
  double learning_rate = 0.00025;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 1e-6;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m, v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(const ParamSet<T>& params, AdamConfig cfg) : config(cfg) {
    for (const auto* t : params.trainable()) {
      m.emplace_back(t->size(), 0.0);
      v.emplace_back(t->size(), 0.0);
    }
  }
};

/// One Adam update with bias correction. The L2 term lambda * theta is added to every
/// trainable gradient before the moment update; running statistics are untouched.
template <typename T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state) {
  auto theta = params.trainable();
  require(theta.size() == state.m.size(), "adam: optimizer state does not match parameters");
  require(grads.layers.size() == params.layers.size(), "adam: gradient layout does not match parameters");
  // gradients in the same order as trainable(); missing entries are treated as zero
  std::vector<const Tensor<T>*> g;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& pl = params.layers[i];
    const auto& gl = grads.layers[i];
    const Tensor<T>* pairs[4][2] = {{&pl.weight, &gl.weight}, {&pl.bias, &gl.bias}, {&pl.gamma, &gl.gamma},
                                    {&pl.beta, &gl.beta}};
    for (auto& pr : pairs)
      if (!pr[0]->empty()) {
        require(pr[1]->empty() || pr[1]->size() == pr[0]->size(), "adam: gradient shape mismatch");
        g.push_back(pr[1]);
      }
  }
  for (const auto* gt : g)
    if (!gt->all_finite()) throw Error("adam: non-finite gradient");

  const auto& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < theta.size(); ++t) {
    auto& p = *theta[t];
    auto& m = state.m[t];
    auto& v = state.v[t];
    const bool has_grad = !g[t]->empty();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = (has_grad ? static_cast<double>((*g[t])[i]) : 0.0) + c.l2 * p[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      const double mhat = m[i] / bc1, vhat = v[i] / bc2;
      p[i] = static_cast<T>(p[i] - c.learning_rate * mhat / (std::sqrt(vhat) + c.eps));
    }
  }
  ++params.version;
}

} // namespace mtdtl::nn
