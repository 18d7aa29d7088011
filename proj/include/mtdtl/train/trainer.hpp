#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mtdtl/arch/network.hpp"
#include "mtdtl/arch/network_io.hpp"
#include "mtdtl/nn/adam.hpp"
#include "mtdtl/train/corpus.hpp"

namespace mtdtl::train {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch = 128;
  double learning_rate = 0.00025;
  double l2 = 1e-6;
  std::size_t chunk = 216;
  std::uint64_t seed = 0;
  std::size_t validate_every = 1;  // epochs; 0 disables monitoring
  std::filesystem::path snapshot_dir;  // where a diverged run dumps its parameters

  void validate() const {
    require(epochs > 0 && batch > 0 && chunk > 0, "train: epochs, batch and chunk must be positive");
    require(learning_rate > 0 && l2 >= 0, "train: learning rate must be positive and l2 non-negative");
  }
};

/// Contiguous `chunk`-frame slice at a uniform offset.
inline Tensor<float> crop_at(const Tensor<float>& x, std::size_t chunk, std::size_t offset) {
  const std::size_t C = x.dim(0), B = x.dim(2);
  Tensor<float> out({C, chunk, B});
  for (std::size_t c = 0; c < C; ++c)
    std::copy(x.data() + (c * x.dim(1) + offset) * B, x.data() + (c * x.dim(1) + offset + chunk) * B,
              out.data() + c * chunk * B);
  return out;
}

inline std::size_t crop_offset(std::size_t frames, std::size_t chunk, Rng& rng) {
  require(frames >= chunk, "spectrogram has " + std::to_string(frames) + " frames, fewer than chunk " +
                               std::to_string(chunk));
  return static_cast<std::size_t>(uniform_index(rng, frames - chunk + 1));
}

inline Tensor<float> crop_chunk(const Tensor<float>& x, std::size_t chunk, Rng& rng) {
  require(x.rank() == 3, "crop_chunk expects channels x frames x bands");
  return crop_at(x, chunk, crop_offset(x.dim(1), chunk, rng));
}

namespace detail {

inline void place(Tensor<float>& batch, std::size_t slot, const Tensor<float>& crop) {
  std::copy(crop.data(), crop.data() + crop.size(), batch.data() + slot * crop.size());
}

}  // namespace detail

struct SelfBatch {
  Tensor<float> crops;   // 2b crops: lefts then rights
  Tensor<float> target;  // b x 2, column 1 = same track
  std::vector<std::pair<std::size_t, std::size_t>> tracks;
  std::vector<int> same;
};

/// b/2 positive pairs (two non-overlapping crops of one track) and b/2 negative pairs, in shuffled order.
inline SelfBatch sample_self_batch(const TrainingCorpus& c, const std::vector<std::size_t>& pool, std::size_t b,
                                   std::size_t chunk, Rng& rng) {
  require(b % 2 == 0, "self batch size must be even, got " + std::to_string(b));
  require(pool.size() >= 2, "self batches need at least two tracks");
  const auto& s0 = c.spectra[pool[0]];
  const std::size_t C = s0.dim(0), B = s0.dim(2);
  SelfBatch out;
  out.crops = Tensor<float>({2 * b, C, chunk, B});
  out.target = Tensor<float>({b, 2});
  std::vector<int> order(b);
  for (std::size_t i = 0; i < b; ++i) order[i] = i < b / 2 ? 1 : 0;
  shuffle_in_place(order, rng);
  for (std::size_t p = 0; p < b; ++p) {
    std::size_t a = pool[uniform_index(rng, pool.size())], bb = a;
    std::size_t oa, ob;
    if (order[p]) {
      const std::size_t T = c.spectra[a].dim(1);
      require(T >= 2 * chunk, "positive self pairs need tracks of at least two chunks");
      oa = uniform_index(rng, T - 2 * chunk + 1);
      ob = oa + chunk + uniform_index(rng, T - oa - 2 * chunk + 1);
      if (uniform01(rng) < 0.5) std::swap(oa, ob);
    } else {
      while (bb == a) bb = pool[uniform_index(rng, pool.size())];
      oa = crop_offset(c.spectra[a].dim(1), chunk, rng);
      ob = crop_offset(c.spectra[bb].dim(1), chunk, rng);
    }
    detail::place(out.crops, p, crop_at(c.spectra[a], chunk, oa));
    detail::place(out.crops, b + p, crop_at(c.spectra[bb], chunk, ob));
    out.target.at(p, order[p] ? 1 : 0) = 1.0f;
    out.tracks.emplace_back(a, bb);
    out.same.push_back(order[p]);
  }
  return out;
}

struct Batch {
  Tensor<float> x, target;
};

inline Batch sample_batch(const TrainingCorpus& c, const std::string& source, const std::vector<std::size_t>& pool,
                          std::size_t b, std::size_t chunk, Rng& rng) {
  if (source == "self") {
    auto s = sample_self_batch(c, pool, b, chunk, rng);
    return {std::move(s.crops), std::move(s.target)};
  }
  const auto& z = c.labels.at(source);
  const std::size_t C = c.spectra[pool[0]].dim(0), B = c.spectra[pool[0]].dim(2), k = z.dim(1);
  Batch batch{Tensor<float>({b, C, chunk, B}), Tensor<float>({b, k})};
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t t = pool[uniform_index(rng, pool.size())];
    detail::place(batch.x, i, crop_chunk(c.spectra[t], chunk, rng));
    std::copy(z.data() + t * k, z.data() + (t + 1) * k, batch.target.data() + i * k);
  }
  return batch;
}

struct LossRecord {
  std::size_t iteration, epoch;
  std::string source;
  double loss;
};

struct TrainResult {
  std::vector<LossRecord> log;
  std::vector<std::pair<std::size_t, std::map<std::string, double>>> validation;  // epoch -> per-source loss
  std::size_t iterations_per_epoch = 0;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Eval-mode loss (dropout off, running batchnorm statistics); never touches parameters.
inline double evaluate_loss(const arch::BranchedNetwork<float>& net, std::size_t source, const Tensor<float>& x,
                            const Tensor<float>& target) {
  Tensor<float> h = net.trunk.empty() ? x : nn::forward_eval(net.trunk.specs, net.trunk.params, x);
  const auto& br = net.branches[source];
  if (!br.empty()) h = nn::forward_eval(br.specs, br.params, std::move(h));
  if (net.spec.sources[source] == "self") {
    const std::size_t P = h.dim(0) / 2, d = h.dim(1);
    Tensor<float> joined({P, 2 * d});
    for (std::size_t p = 0; p < P; ++p) {
      std::copy(h.data() + p * d, h.data() + (p + 1) * d, joined.data() + p * 2 * d);
      std::copy(h.data() + (P + p) * d, h.data() + (P + p + 1) * d, joined.data() + p * 2 * d + d);
    }
    h = std::move(joined);
  }
  const auto& head = net.heads[source];
  const auto logits = nn::forward_eval(head.specs, head.params, std::move(h));
  return nn::kl_loss_from_logits(target, logits).loss;
}

inline std::size_t iterations_per_epoch(std::size_t train_size, std::size_t batch, std::size_t sources) {
  return (train_size + batch - 1) / batch * sources;
}

/// Algorithm 1: each iteration picks a source uniformly, draws a batch of random crops and takes one
/// Adam step on the trunk plus that source's branch and head.
inline TrainResult train(arch::BranchedNetwork<float>& net, const TrainingCorpus& corpus, const TrainConfig& cfg,
                         const std::function<void(std::size_t epoch, const TrainResult&)>& on_epoch = {}) {
  cfg.validate();
  corpus.validate();
  for (const auto& s : net.spec.sources)
    require(corpus.has_source(s), "corpus has no labels for source '" + s + "'");
  const std::size_t m = net.source_count();
  nn::AdamConfig acfg;
  acfg.learning_rate = cfg.learning_rate;
  acfg.l2 = cfg.l2;
  nn::AdamState<float> trunk_state(net.trunk.params, acfg);
  std::vector<nn::AdamState<float>> branch_state, head_state;
  for (std::size_t s = 0; s < m; ++s) {
    branch_state.emplace_back(net.branches[s].params, acfg);
    head_state.emplace_back(net.heads[s].params, acfg);
  }

  TrainResult r;
  r.iterations_per_epoch = iterations_per_epoch(corpus.train_idx.size(), cfg.batch, m);
  Rng rng(derive_seed(cfg.seed, 0x7472));
  std::size_t it = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t step = 0; step < r.iterations_per_epoch; ++step, ++it) {
      const std::size_t s = m == 1 ? 0 : uniform_index(rng, m);
      const auto& name = net.spec.sources[s];
      auto batch = sample_batch(corpus, name, corpus.train_idx, cfg.batch, cfg.chunk, rng);
      auto g = arch::loss_and_gradients(net, s, batch.x, batch.target, rng);
      if (!std::isfinite(g.loss)) {
        std::string where;
        if (!cfg.snapshot_dir.empty()) {
          std::filesystem::create_directories(cfg.snapshot_dir);
          arch::save_params(cfg.snapshot_dir / "diverged_params.bin", net);
          where = "; parameters saved to " + (cfg.snapshot_dir / "diverged_params.bin").string();
        }
        throw TrainingDiverged("non-finite loss at iteration " + std::to_string(it) + " (epoch " +
                               std::to_string(epoch) + ", source " + name + ")" + where);
      }
      if (!net.trunk.empty()) nn::adam_step(net.trunk.params, g.trunk_grads, trunk_state);
      if (!net.branches[s].empty()) nn::adam_step(net.branches[s].params, g.branch_grads, branch_state[s]);
      nn::adam_step(net.heads[s].params, g.head_grads, head_state[s]);
      r.log.push_back({it, epoch, name, g.loss});
    }
    if (cfg.validate_every && !corpus.valid_idx.empty() && (epoch + 1) % cfg.validate_every == 0) {
      Rng vr(derive_seed(cfg.seed, 0x76616c));  // same monitoring batches every time
      std::map<std::string, double> losses;
      for (std::size_t s = 0; s < m; ++s) {
        const auto b = std::min<std::size_t>(cfg.batch, corpus.valid_idx.size() - corpus.valid_idx.size() % 2);
        if (b < 2) continue;
        auto batch = sample_batch(corpus, net.spec.sources[s], corpus.valid_idx, b, cfg.chunk, vr);
        losses[net.spec.sources[s]] = evaluate_loss(net, s, batch.x, batch.target);
      }
      r.validation.emplace_back(epoch, std::move(losses));
    }
    if (on_epoch) on_epoch(epoch, r);
  }
  return r;
}

inline void write_loss_log(const std::filesystem::path& path, const TrainResult& r) {
  io::CsvTable t{{"iteration", "epoch", "source", "loss"}, {}};
  for (const auto& l : r.log)
    t.rows.push_back({std::to_string(l.iteration), std::to_string(l.epoch), l.source, io::fmt_real(l.loss)});
  io::write_csv(path, t);
}

inline void write_validation_log(const std::filesystem::path& path, const TrainResult& r) {
  io::CsvTable t{{"epoch", "source", "loss"}, {}};
  for (const auto& [epoch, losses] : r.validation)
    for (const auto& [s, l] : losses) t.rows.push_back({std::to_string(epoch), s, io::fmt_real(l)});
  io::write_csv(path, t);
}

} // namespace mtdtl::train
