#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtdtl/dsp/spectrogram.hpp"
#include "mtdtl/eval/metrics.hpp"
#include "mtdtl/eval/probe.hpp"
#include "mtdtl/eval/recommender.hpp"
#include "mtdtl/factors/factorize.hpp"
#include "mtdtl/synth/generator.hpp"
#include "mtdtl/train/corpus.hpp"

namespace mtdtl::pipeline {

/// Label-matrix row names for each training track: the artist id for the artist source, else the track id.
inline std::vector<std::string> label_items(const std::vector<std::string>& track_ids,
                                            const std::vector<std::string>& artist_ids, const std::string& source) {
  return source == "artist" ? artist_ids : track_ids;
}

inline factors::LabelMatrix matrix_from_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<factors::Triplet> t;
  t.reserve(rows.size());
  for (const auto& r : rows) t.push_back({r.at(0), r.at(1), std::stod(r.at(2))});
  return factors::from_triplets(t);
}

inline factors::FactorOutput synth_factors(const synth::Corpus& c, const std::string& source,
                                           const factors::FactorConfig& cfg) {
  std::vector<std::string> tracks, artists;
  for (const auto& t : c.tracks) {
    tracks.push_back(t.id);
    artists.push_back(c.artists[t.artist].id);
  }
  const auto items = label_items(tracks, artists, source);
  const auto method = factors::method_for(source);
  if (method == factors::Method::gmm) {
    const auto it = c.scalar_labels.find(source);
    require(it != c.scalar_labels.end(), "synth corpus has no scalar labels for '" + source + "'");
    std::map<std::string, double> values(it->second.begin(), it->second.end());
    return factors::factorize_scalars(values, items, cfg);
  }
  const auto it = c.triplet_labels.find(source);
  require(it != c.triplet_labels.end(), "synth corpus has no label triplets for '" + source + "'");
  return factors::factorize_matrix(matrix_from_rows(it->second), method == factors::Method::plsa_tfidf, items, cfg);
}

/// Standardization statistics from the training split only.
inline dsp::StandardizationStats training_stats(const synth::Corpus& c) {
  std::vector<const Tensor<float>*> ptrs;
  for (std::size_t i = 0; i < c.tracks.size(); ++i)
    if (!c.tracks[i].validation) ptrs.push_back(&c.spectra[i]);
  return dsp::fit_standardization(ptrs);
}

inline train::TrainingCorpus training_corpus(const synth::Corpus& c, const std::vector<std::string>& sources,
                                             const dsp::StandardizationStats& stats, const factors::FactorConfig& cfg) {
  train::TrainingCorpus tc;
  for (std::size_t i = 0; i < c.tracks.size(); ++i) {
    tc.track_ids.push_back(c.tracks[i].id);
    tc.spectra.push_back(dsp::apply_standardization(c.spectra[i], stats));
    (c.tracks[i].validation ? tc.valid_idx : tc.train_idx).push_back(i);
  }
  for (const auto& s : sources)
    if (s != "self") tc.labels[s] = synth_factors(c, s, cfg).z;
  tc.content_hash = "synth-" + std::to_string(c.spec.seed);
  tc.validate();
  return tc;
}

struct EvaluationRecord {
  std::string run_id, dataset, task;
  std::size_t split = 0;
  std::string metric;
  double value = 0.0;
};

inline const std::vector<std::string>& evaluation_header() {
  static const std::vector<std::string> h{"run_id", "dataset", "task", "split", "metric", "value"};
  return h;
}

struct EvalConfig {
  std::size_t splits = 5;
  double test_fraction = 0.2;
  eval::ProbeConfig probe;
  eval::AlsConfig als;
  std::size_t ndcg_k = 500;
};

/// Test indices of an 80/20 split, stratified by class when `stratify`.
inline std::vector<char> test_mask(const std::vector<double>& labels, bool stratify, double fraction, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x73706c6974));
  std::map<double, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < labels.size(); ++i) strata[stratify ? labels[i] : 0.0].push_back(i);
  std::vector<char> mask(labels.size(), 0);
  for (auto& [label, members] : strata) {
    const auto perm = random_permutation(members.size(), rng);
    const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    for (std::size_t j = 0; j < n; ++j) mask[members[perm[j]]] = 1;
  }
  return mask;
}

/// Probe or recommender scores over repeated splits. Items follow `features` order; for recommendation
/// `interactions` is users x items.
inline std::vector<EvaluationRecord> evaluate_dataset(const std::string& run_id, const std::string& dataset,
                                                      const std::string& task,
                                                      const std::vector<std::vector<double>>& features,
                                                      const std::vector<double>& labels,
                                                      const eval::MatrixXd& interactions, const EvalConfig& cfg) {
  require(!features.empty(), "evaluate: no items");
  std::vector<EvaluationRecord> out;
  if (task == "recommendation") {
    require(interactions.cols() == static_cast<Eigen::Index>(features.size()), "evaluate: interaction columns must match items");
    eval::MatrixXd X(static_cast<Eigen::Index>(features.size()), static_cast<Eigen::Index>(features[0].size()));
    for (std::size_t i = 0; i < features.size(); ++i)
      for (std::size_t j = 0; j < features[i].size(); ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features[i][j];
    for (std::size_t s = 0; s < cfg.splits; ++s) {
      const auto r = eval::cold_start_eval(interactions, X, cfg.als, cfg.test_fraction, s, cfg.ndcg_k, 0);
      out.push_back({run_id, dataset, task, s, "ndcg@" + std::to_string(cfg.ndcg_k), r.ndcg});
    }
    return out;
  }
  const bool classify = task == "classification";
  require(classify || task == "regression", "evaluate: unknown task '" + task + "'");
  require(labels.size() == features.size(), "evaluate: labels and features differ in count");
  for (std::size_t s = 0; s < cfg.splits; ++s) {
    const auto mask = test_mask(labels, classify, cfg.test_fraction, s);
    std::vector<std::vector<double>> Xtr, Xte;
    std::vector<double> ytr, yte;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      (mask[i] ? Xte : Xtr).push_back(features[i]);
      (mask[i] ? yte : ytr).push_back(labels[i]);
    }
    auto pc = cfg.probe;
    pc.seed = s;
    eval::MlpProbe probe(classify ? eval::Task::classification : eval::Task::regression, pc);
    probe.fit(Xtr, ytr);
    const auto pred = probe.predict(Xte);
    if (classify) {
      std::vector<std::size_t> truth(yte.begin(), yte.end());
      out.push_back({run_id, dataset, task, s, "accuracy", eval::accuracy(pred.classes, truth)});
    } else {
      out.push_back({run_id, dataset, task, s, "r2", eval::r_squared(pred.values, yte)});
    }
  }
  return out;
}

/// Interaction counts of the target tracks, users in order of first appearance.
inline eval::MatrixXd interaction_matrix(const std::vector<synth::Interaction>& rows, const std::vector<std::string>& items) {
  std::map<std::string, std::size_t> item_index, user_index;
  for (std::size_t i = 0; i < items.size(); ++i) item_index.emplace(items[i], i);
  std::vector<std::string> users;
  for (const auto& r : rows)
    if (user_index.emplace(r.user, users.size()).second) users.push_back(r.user);
  eval::MatrixXd R = eval::MatrixXd::Zero(static_cast<Eigen::Index>(users.size()), static_cast<Eigen::Index>(items.size()));
  for (const auto& r : rows) {
    const auto it = item_index.find(r.item);
    require(it != item_index.end(), "interactions: unknown item '" + r.item + "'");
    R(static_cast<Eigen::Index>(user_index[r.user]), static_cast<Eigen::Index>(it->second)) += r.count;
  }
  return R;
}

} // namespace mtdtl::pipeline
