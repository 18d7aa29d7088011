#pragma once

// Central finite-difference oracle, independent of the analytic backward code.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mtdtl/core/random.hpp"
#include "mtdtl/core/tensor.hpp"
#include "mtdtl/nn/sequential.hpp"

namespace mtdtl::testing {

/// Numerical gradient of scalar f with respect to every entry of t (modified in place, restored).
inline std::vector<double> numeric_gradient(Tensor<double>& t, const std::function<double()>& f, double h = 1e-5) {
  std::vector<double> g(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double orig = t[i];
    t[i] = orig + h;
    const double fp = f();
    t[i] = orig - h;
    const double fm = f();
    t[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a|| + ||b||, tiny)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  return denom < 1e-30 ? 0.0 : std::sqrt(diff) / denom;
}

inline std::vector<double> values_of(const Tensor<double>& t) { return {t.storage().begin(), t.storage().end()}; }

inline constexpr double kChainStep = 1e-7;

struct ChainCheck {
  double error = 0.0;  // worst relative error over the probed tensors
  std::string worst;
};

/// Input and parameter gradients of a chain against finite differences of loss = sum(projection * output).
/// Only about `max_entries` entries per tensor are probed.
inline ChainCheck chain_gradient_error(const std::vector<nn::LayerSpec>& specs, Tensor<double> x, std::uint64_t seed,
                                       std::size_t max_entries = 1u << 30) {
  Rng init(seed);
  auto params = nn::init_params<double>(specs, init);
  for (auto& l : params.layers) {
    for (auto& v : l.bias.storage()) v = 0.1 * normal01(init);
    for (auto& v : l.beta.storage()) v = 0.1 * normal01(init);
    for (auto& v : l.gamma.storage()) v = 1.0 + 0.1 * normal01(init);
  }
  Tensor<double> proj(nn::infer_shapes(specs, x.shape()).back());
  for (auto& v : proj.storage()) v = normal01(init);
  const std::uint64_t dropout_seed = derive_seed(seed, 99);
  auto loss = [&] {
    Rng r(dropout_seed);
    auto [y, cache] = nn::forward(specs, params, x, nn::Mode::train, r);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
    return s;
  };
  Rng r(dropout_seed);
  auto [y, cache] = nn::forward(specs, params, x, nn::Mode::train, r);
  auto back = nn::backward(specs, params, cache, proj);

  ChainCheck out;
  auto probe = [&](Tensor<double>& t, const Tensor<double>& analytic, const std::string& what) {
    if (t.size() != analytic.size()) {
      out.error = 1e300;
      out.worst = what + " (size mismatch)";
      return;
    }
    std::vector<double> num, ana;
    const std::size_t stride = std::max<std::size_t>(1, t.size() / max_entries);
    for (std::size_t i = 0; i < t.size(); i += stride) {
      const double orig = t[i];
      t[i] = orig + kChainStep;
      const double fp = loss();
      t[i] = orig - kChainStep;
      const double fm = loss();
      t[i] = orig;
      num.push_back((fp - fm) / (2 * kChainStep));
      ana.push_back(analytic[i]);
    }
    const double e = relative_error(num, ana);
    if (e >= out.error) {
      out.error = e;
      out.worst = what;
    }
  };
  probe(x, back.grad_in, "input");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& p = params.layers[i];
    auto& g = back.grads.layers[i];
    if (!p.weight.empty()) probe(p.weight, g.weight, specs[i].name + ".weight");
    if (!p.bias.empty()) probe(p.bias, g.bias, specs[i].name + ".bias");
    if (!p.gamma.empty()) probe(p.gamma, g.gamma, specs[i].name + ".gamma");
    if (!p.beta.empty()) probe(p.beta, g.beta, specs[i].name + ".beta");
  }
  return out;
}

} // namespace mtdtl::testing
