#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtdtl/arch/strategy.hpp"
#include "mtdtl/core/hash.hpp"
#include "mtdtl/core/random.hpp"
#include "mtdtl/nn/loss.hpp"
#include "mtdtl/nn/sequential.hpp"

namespace mtdtl::arch {

using nn::LayerSpec;

/// The representation network (conv1 ... fc-feature + dropout) at width d.
inline std::vector<LayerSpec> base_chain(std::size_t in_channels, std::size_t d, double dropout) {
  const auto w = [d](std::size_t base) { return base * d / 256; };
  std::vector<LayerSpec> c;
  auto block = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t k, std::size_t sh,
                   bool pool) {
    c.push_back(LayerSpec::conv(name, in, out, k, k, sh, 1));
    c.push_back(LayerSpec::batchnorm(name + "_bn", out));
    c.push_back(LayerSpec::relu(name + "_relu"));
    if (pool) c.push_back(LayerSpec::maxpool("max-pool" + name.substr(4)));
  };
  block("conv1", in_channels, w(16), 5, 2, true);
  block("conv2", w(16), w(32), 3, 1, true);
  block("conv3", w(32), w(64), 3, 1, true);
  block("conv4", w(64), w(64), 3, 1, true);
  block("conv5", w(64), w(128), 3, 1, true);
  block("conv61", w(128), w(256), 3, 1, false);
  block("conv62", w(256), w(256), 1, 1, false);
  c.push_back(LayerSpec::gap("gap"));
  c.push_back(LayerSpec::fc("fc-feature", w(256), d, false));
  c.push_back(LayerSpec::batchnorm("fc-feature_bn", d));
  c.push_back(LayerSpec::relu("fc-feature_relu"));
  c.push_back(LayerSpec::dropout("dropout", dropout));
  return c;
}

/// Index into base_chain where per-source layers start.
inline std::size_t branch_index(Strategy s, const std::vector<LayerSpec>& chain) {
  const auto find = [&](const std::string& name) {
    for (std::size_t i = 0; i < chain.size(); ++i)
      if (chain[i].name == name) return i;
    throw Error("layer '" + name + "' not in base chain");
  };
  switch (s) {
    case Strategy::msscr:
    case Strategy::ssr: return 0;
    case Strategy::mscr2: return find("conv2");
    case Strategy::mscr4: return find("conv4");
    case Strategy::mscr6: return find("conv61");
    case Strategy::mssrfc: return chain.size();
  }
  return 0;
}

inline std::vector<LayerSpec> head_chain(const std::string& source, std::size_t d, std::size_t k) {
  if (source == "self")
    return {LayerSpec::fc("self-hidden", 2 * d, d / 2, true), LayerSpec::relu("self-hidden_relu"),
            LayerSpec::fc("self-out", d / 2, 2, true)};
  return {LayerSpec::fc("fc-output", d, k, true)};
}

inline std::uint64_t chain_seed(std::uint64_t seed, const std::string& role) {
  Fnv1a h;
  h.update(role);
  return derive_seed(seed, h.digest());
}

/// Shared trunk, one branch and one output head per source.
template <typename T>
struct BranchedNetwork {
  StrategySpec spec;
  nn::Sequential<T> trunk;
  std::vector<nn::Sequential<T>> branches;
  std::vector<nn::Sequential<T>> heads;

  std::size_t source_count() const { return spec.sources.size(); }

  std::size_t source_index(const std::string& name) const {
    for (std::size_t i = 0; i < spec.sources.size(); ++i)
      if (spec.sources[i] == name) return i;
    throw InvalidArgument("source '" + name + "' is not part of this network");
  }

  std::size_t trainable_count() const {
    std::size_t n = trunk.trainable_count();
    for (const auto& b : branches) n += b.trainable_count();
    for (const auto& h : heads) n += h.trainable_count();
    return n;
  }

  /// Chains in serialization order: trunk, branches, heads.
  std::vector<const nn::Sequential<T>*> chains() const {
    std::vector<const nn::Sequential<T>*> out{&trunk};
    for (const auto& b : branches) out.push_back(&b);
    for (const auto& h : heads) out.push_back(&h);
    return out;
  }
  std::vector<nn::Sequential<T>*> chains() {
    std::vector<nn::Sequential<T>*> out{&trunk};
    for (auto& b : branches) out.push_back(&b);
    for (auto& h : heads) out.push_back(&h);
    return out;
  }
};

struct NetworkLayout {
  std::vector<LayerSpec> trunk;
  std::vector<std::vector<LayerSpec>> branches;
  std::vector<std::vector<LayerSpec>> heads;
};

inline NetworkLayout layout(const StrategySpec& spec) {
  spec.validate();
  const auto chain = base_chain(spec.in_channels, spec.feature_dim, spec.dropout);
  const std::size_t bp = branch_index(spec.kind, chain);
  NetworkLayout l;
  l.trunk.assign(chain.begin(), chain.begin() + static_cast<long>(bp));
  for (const auto& s : spec.sources) {
    l.branches.emplace_back(chain.begin() + static_cast<long>(bp), chain.end());
    l.heads.push_back(head_chain(s, spec.feature_dim, spec.factor_dim));
  }
  return l;
}

/// Builds the network for a strategy. Per-chain seeds derive from (seed, role, source name)
/// so identically named sources get identical initial weights.
template <typename T>
BranchedNetwork<T> build(const StrategySpec& spec, std::uint64_t seed) {
  const auto l = layout(spec);
  BranchedNetwork<T> net;
  net.spec = spec;
  Rng trunk_rng(chain_seed(seed, "trunk"));
  net.trunk = nn::Sequential<T>(l.trunk, trunk_rng);
  for (std::size_t i = 0; i < spec.sources.size(); ++i) {
    Rng br(chain_seed(seed, "branch:" + spec.sources[i]));
    net.branches.emplace_back(l.branches[i], br);
    Rng hr(chain_seed(seed, "head:" + spec.sources[i]));
    net.heads.emplace_back(l.heads[i], hr);
  }
  return net;
}

/// Trainable parameters including batchnorm scale/shift, excluding running statistics.
inline std::size_t count_parameters(const StrategySpec& spec) {
  const auto l = layout(spec);
  std::size_t n = 0;
  for (const auto& s : l.trunk) n += s.trainable_count();
  for (const auto& b : l.branches)
    for (const auto& s : b) n += s.trainable_count();
  for (const auto& h : l.heads)
    for (const auto& s : h) n += s.trainable_count();
  return n;
}

/// fc-feature activations in eval mode: N x representation_dim, concatenated in source order.
template <typename T>
Tensor<T> extract_representation(const BranchedNetwork<T>& net, const Tensor<T>& x) {
  require(x.rank() == 4 && x.dim(1) == net.spec.in_channels,
          "representation input must be N x " + std::to_string(net.spec.in_channels) + " x T x B, got " +
              shape_string(x.shape()));
  Tensor<T> shared = net.trunk.empty() ? x : nn::forward_eval(net.trunk.specs, net.trunk.params, x);
  if (!concatenates(net.spec.kind)) {
    return net.branches[0].empty() ? shared
                                   : nn::forward_eval(net.branches[0].specs, net.branches[0].params, shared);
  }
  const std::size_t N = x.dim(0), d = net.spec.feature_dim, m = net.source_count();
  Tensor<T> out({N, d * m});
  for (std::size_t s = 0; s < m; ++s) {
    const auto r = nn::forward_eval(net.branches[s].specs, net.branches[s].params, shared);
    for (std::size_t n = 0; n < N; ++n)
      std::copy(r.data() + n * d, r.data() + (n + 1) * d, out.data() + n * d * m + s * d);
  }
  return out;
}

/// Combines independently trained single-source networks into an mss-cr network.
template <typename T>
BranchedNetwork<T> concatenate_single_source(const std::vector<const BranchedNetwork<T>*>& nets) {
  require(!nets.empty(), "concatenate: no networks");
  BranchedNetwork<T> out;
  out.spec = nets.front()->spec;
  out.spec.kind = nets.size() == 1 ? Strategy::ssr : Strategy::msscr;
  out.spec.sources.clear();
  for (const auto* n : nets) {
    require(n->spec.kind == Strategy::ssr, "concatenate expects ss-r networks");
    require(n->spec.feature_dim == out.spec.feature_dim && n->spec.in_channels == out.spec.in_channels,
            "concatenate: mismatched widths");
    out.spec.sources.push_back(n->spec.sources[0]);
    out.branches.push_back(n->branches[0]);
    out.heads.push_back(n->heads[0]);
  }
  return out;
}

template <typename T>
struct StepResult {
  double loss = 0.0;
  nn::ParamSet<T> trunk_grads, branch_grads, head_grads;
};

/// Forward + backward for one source on one batch.
/// For "self", x holds 2N crops (N left then N right) and target is N x 2 one-hot.
template <typename T>
StepResult<T> loss_and_gradients(BranchedNetwork<T>& net, std::size_t source, const Tensor<T>& x,
                                 const Tensor<T>& target, Rng& rng) {
  auto& trunk = net.trunk;
  auto& branch = net.branches.at(source);
  auto& head = net.heads.at(source);
  const bool siamese = net.spec.sources[source] == "self";

  nn::Cache<T> c_trunk, c_branch, c_head;
  Tensor<T> h = x;
  if (!trunk.empty()) std::tie(h, c_trunk) = nn::forward(trunk.specs, trunk.params, std::move(h), nn::Mode::train, rng);
  if (!branch.empty())
    std::tie(h, c_branch) = nn::forward(branch.specs, branch.params, std::move(h), nn::Mode::train, rng);

  const std::size_t d = h.dim(1);
  Tensor<T> head_in = h;
  if (siamese) {
    require(h.dim(0) % 2 == 0, "siamese batch must hold left and right crops");
    const std::size_t P = h.dim(0) / 2;
    head_in = Tensor<T>({P, 2 * d});
    for (std::size_t p = 0; p < P; ++p) {
      std::copy(h.data() + p * d, h.data() + (p + 1) * d, head_in.data() + p * 2 * d);
      std::copy(h.data() + (P + p) * d, h.data() + (P + p + 1) * d, head_in.data() + p * 2 * d + d);
    }
  }
  Tensor<T> logits;
  std::tie(logits, c_head) = nn::forward(head.specs, head.params, std::move(head_in), nn::Mode::train, rng);
  auto loss = nn::kl_loss_from_logits(target, logits);

  StepResult<T> r;
  r.loss = loss.loss;
  auto bh = nn::backward(head.specs, head.params, c_head, std::move(loss.grad_logits));
  r.head_grads = std::move(bh.grads);
  Tensor<T> g = std::move(bh.grad_in);
  if (siamese) {
    const std::size_t P = g.dim(0);
    Tensor<T> split({2 * P, d});
    for (std::size_t p = 0; p < P; ++p) {
      std::copy(g.data() + p * 2 * d, g.data() + p * 2 * d + d, split.data() + p * d);
      std::copy(g.data() + p * 2 * d + d, g.data() + (p + 1) * 2 * d, split.data() + (P + p) * d);
    }
    g = std::move(split);
  }
  if (!branch.empty()) {
    auto bb = nn::backward(branch.specs, branch.params, c_branch, std::move(g));
    r.branch_grads = std::move(bb.grads);
    g = std::move(bb.grad_in);
  }
  if (!trunk.empty()) {
    auto bt = nn::backward(trunk.specs, trunk.params, c_trunk, std::move(g));
    r.trunk_grads = std::move(bt.grads);
  }
  return r;
}

} // namespace mtdtl::arch
