#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mtdtl/core/random.hpp"
#include "mtdtl/core/tensor.hpp"
#include "mtdtl/nn/layer_spec.hpp"
#include "mtdtl/nn/ops.hpp"

namespace mtdtl::nn {

enum class Mode { train, eval };

template <typename T>
struct LayerParams {
  Tensor<T> weight, bias;
  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;  // not trainable
};

/// Parameters of one layer chain. `version` changes on every optimizer update.
template <typename T>
struct ParamSet {
  std::vector<LayerParams<T>> layers;
  std::uint64_t version = 0;

  /// Trainable tensors in a fixed order (used by the optimizer and serialization).
  std::vector<Tensor<T>*> trainable() {
    std::vector<Tensor<T>*> out;
    for (auto& l : layers)
      for (auto* t : {&l.weight, &l.bias, &l.gamma, &l.beta})
        if (!t->empty()) out.push_back(t);
    return out;
  }
  std::vector<const Tensor<T>*> trainable() const {
    std::vector<const Tensor<T>*> out;
    for (const auto& l : layers)
      for (const auto* t : {&l.weight, &l.bias, &l.gamma, &l.beta})
        if (!t->empty()) out.push_back(t);
    return out;
  }
  /// Every stored tensor including running statistics.
  std::vector<const Tensor<T>*> all() const {
    std::vector<const Tensor<T>*> out;
    for (const auto& l : layers)
      for (const auto* t : {&l.weight, &l.bias, &l.gamma, &l.beta, &l.running_mean, &l.running_var})
        if (!t->empty()) out.push_back(t);
    return out;
  }
  std::vector<Tensor<T>*> all() {
    std::vector<Tensor<T>*> out;
    for (auto& l : layers)
      for (auto* t : {&l.weight, &l.bias, &l.gamma, &l.beta, &l.running_mean, &l.running_var})
        if (!t->empty()) out.push_back(t);
    return out;
  }
  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto* t : trainable()) n += t->size();
    return n;
  }
};

template <typename T>
struct LayerCache {
  Shape in_shape;
  Tensor<T> input;  // kept for conv, fc, relu
  Tensor<T> aux;    // batchnorm xhat, dropout mask, softmax output
  std::vector<std::size_t> argmax;
  BatchNormCache bn;
};

template <typename T>
struct Cache {
  std::vector<LayerCache<T>> layers;
  std::uint64_t version = 0;
  Mode mode = Mode::eval;
};

/// Fan-in scaled normal (He) weights, zero biases, unit batchnorm scale.
template <typename T>
ParamSet<T> init_params(const std::vector<LayerSpec>& specs, Rng& rng) {
  ParamSet<T> p;
  p.layers.resize(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    s.validate();
    auto& l = p.layers[i];
    if (s.kind == LayerKind::conv2d || s.kind == LayerKind::fullyconnected) {
      const std::size_t fan_in = s.kind == LayerKind::conv2d ? s.in * s.kernel_h * s.kernel_w : s.in;
      l.weight = s.kind == LayerKind::conv2d ? Tensor<T>({s.out, s.in, s.kernel_h, s.kernel_w})
                                             : Tensor<T>({s.out, s.in});
      const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (auto& w : l.weight.storage()) w = static_cast<T>(sd * normal01(rng));
      if (s.bias) l.bias = Tensor<T>({s.out});
    } else if (s.kind == LayerKind::batchnorm) {
      l.gamma = Tensor<T>({s.in}, T{1});
      l.beta = Tensor<T>({s.in});
      l.running_mean = Tensor<T>({s.in});
      l.running_var = Tensor<T>({s.in}, T{1});
    }
  }
  return p;
}

/// Shape flow through a chain; throws naming the offending layer index.
inline std::vector<Shape> infer_shapes(const std::vector<LayerSpec>& specs, Shape x) {
  std::vector<Shape> shapes{x};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      x = specs[i].output_shape(x);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("layer " + std::to_string(i) + " (" + specs[i].name + "): " + e.what());
    }
    shapes.push_back(x);
  }
  return shapes;
}

template <typename T>
std::pair<Tensor<T>, Cache<T>> forward(const std::vector<LayerSpec>& specs, ParamSet<T>& params, Tensor<T> x,
                                       Mode mode, Rng& rng) {
  Cache<T> cache;
  cache.version = params.version;
  cache.mode = mode;
  cache.layers.resize(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    auto& c = cache.layers[i];
    auto& p = params.layers[i];
    try {
      s.output_shape(x.shape());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("layer " + std::to_string(i) + " (" + s.name + "): " + e.what());
    }
    c.in_shape = x.shape();
    switch (s.kind) {
      case LayerKind::conv2d: {
        auto y = conv2d_forward(s, x, p.weight, p.bias);
        c.input = std::move(x);
        x = std::move(y);
        break;
      }
      case LayerKind::maxpool2d: x = maxpool_forward(s, x, c.argmax); break;
      case LayerKind::batchnorm:
        if (mode == Mode::train)
          x = batchnorm_forward_train(x, p.gamma, p.beta, p.running_mean, p.running_var, c.aux, c.bn);
        else
          x = batchnorm_forward_eval(x, p.gamma, p.beta, p.running_mean, p.running_var);
        break;
      case LayerKind::relu: {
        auto y = relu_forward(x);
        c.input = std::move(x);
        x = std::move(y);
        break;
      }
      case LayerKind::gap: x = gap_forward(x); break;
      case LayerKind::fullyconnected: {
        auto y = fc_forward(x, p.weight, p.bias);
        c.input = std::move(x);
        x = std::move(y);
        break;
      }
      case LayerKind::dropout:
        if (mode == Mode::train && s.rate > 0.0) x = dropout_forward(x, s.rate, rng, c.aux);
        break;
      case LayerKind::softmax:
        x = softmax_forward(x);
        c.aux = x;
        break;
    }
  }
  return {std::move(x), std::move(cache)};
}

template <typename T>
Tensor<T> forward_eval(const std::vector<LayerSpec>& specs, const ParamSet<T>& params, Tensor<T> x) {
  Rng unused(0);
  // eval mode never mutates parameters
  auto [y, cache] = forward(specs, const_cast<ParamSet<T>&>(params), std::move(x), Mode::eval, unused);
  return y;
}

template <typename T>
struct BackwardResult {
  ParamSet<T> grads;  // same layout as the parameters; running stats left empty
  Tensor<T> grad_in;
};

template <typename T>
BackwardResult<T> backward(const std::vector<LayerSpec>& specs, const ParamSet<T>& params, const Cache<T>& cache,
                           Tensor<T> g) {
  if (cache.version != params.version) throw Error("stale forward cache: parameters were updated since forward");
  if (cache.mode != Mode::train) throw Error("backward requires a train-mode forward cache");
  BackwardResult<T> r;
  r.grads.layers.resize(specs.size());
  for (std::size_t ii = specs.size(); ii-- > 0;) {
    const auto& s = specs[ii];
    const auto& c = cache.layers[ii];
    const auto& p = params.layers[ii];
    auto& gp = r.grads.layers[ii];
    switch (s.kind) {
      case LayerKind::conv2d: {
        Tensor<T> gx;
        conv2d_backward(s, c.input, p.weight, g, gx, gp.weight, gp.bias);
        g = std::move(gx);
        break;
      }
      case LayerKind::maxpool2d: g = maxpool_backward(c.in_shape, c.argmax, g); break;
      case LayerKind::batchnorm: {
        Tensor<T> gx;
        batchnorm_backward(c.aux, p.gamma, c.bn, g, gx, gp.gamma, gp.beta);
        g = std::move(gx);
        break;
      }
      case LayerKind::relu: g = relu_backward(c.input, g); break;
      case LayerKind::gap: g = gap_backward(c.in_shape, g); break;
      case LayerKind::fullyconnected: {
        Tensor<T> gx;
        fc_backward(c.input, p.weight, g, s.bias, gx, gp.weight, gp.bias);
        g = std::move(gx);
        break;
      }
      case LayerKind::dropout:
        if (!c.aux.empty())
          for (std::size_t i = 0; i < g.size(); ++i) g[i] *= c.aux[i];
        break;
      case LayerKind::softmax: g = softmax_backward(c.aux, g); break;
    }
  }
  r.grad_in = std::move(g);
  return r;
}

/// A layer chain with its own parameters.
template <typename T>
struct Sequential {
  std::vector<LayerSpec> specs;
  ParamSet<T> params;

  Sequential() = default;
  Sequential(std::vector<LayerSpec> s, Rng& rng) : specs(std::move(s)), params(init_params<T>(specs, rng)) {}

  bool empty() const { return specs.empty(); }
  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& s : specs) n += s.trainable_count();
    return n;
  }
};

} // namespace mtdtl::nn
