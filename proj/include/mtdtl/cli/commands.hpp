#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mtdtl/analysis/analysis.hpp"
#include "mtdtl/arch/network_io.hpp"
#include "mtdtl/core/parallel.hpp"
#include "mtdtl/design/design.hpp"
#include "mtdtl/dsp/wav.hpp"
#include "mtdtl/eval/features.hpp"
#include "mtdtl/pipeline.hpp"
#include "mtdtl/train/trainer.hpp"

// Workspace layout under a corpus directory:
//   tracks.csv, raw_spec.mrt (or audio/<id>.wav), labels/<source>.csv
//   targets/tracks.csv, targets/raw_spec.mrt (or targets/audio/<id>.wav), targets/<dataset>/...
//   cache/      standardized spectrograms and band statistics
//   factors/    <source>.mrt factor distributions with <source>.hdr
//   runs/<id>/  params.bin, manifest.txt, loss.csv, features/<dataset>.mrt, eval/<dataset>.csv
namespace mtdtl::cli {

namespace fs = std::filesystem;
using train::require_file;

inline std::string file_hash(const fs::path& p) {
  Fnv1a h;
  hash_file_into(h, require_file(p));
  return h.hex();
}

/// Numeric ids name design rows ("7" is "r0007"); anything else is used verbatim.
inline std::string normalize_run_id(const std::string& id) {
  require(!id.empty(), "run id is empty");
  if (std::all_of(id.begin(), id.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const auto n = std::stoul(id);
    require(n >= 1, "numeric run ids start at 1");
    return design::run_id(n - 1);
  }
  require(id.find('/') == std::string::npos && id.find("..") == std::string::npos, "run id '" + id + "' is not a plain name");
  return id;
}

inline fs::path run_dir(const fs::path& corpus, const std::string& id) { return corpus / "runs" / id; }

// ---- synth --------------------------------------------------------------------------------------

inline void synth(const fs::path& spec_file, const fs::path& out) {
  const auto spec = spec_file.empty() ? synth::SynthSpec{} : synth::SynthSpec::from_config(io::KeyValueConfig::load(require_file(spec_file)));
  synth::write_corpus(synth::generate(spec), out);
}

// ---- dsp ----------------------------------------------------------------------------------------

inline std::vector<Tensor<float>> raw_spectra(const fs::path& dir, const std::vector<std::string>& ids) {
  if (fs::exists(dir / "raw_spec.mrt")) {
    auto s = io::load_tensors<float>(dir / "raw_spec.mrt");
    require(s.size() == ids.size(), (dir / "raw_spec.mrt").string() + " holds " + std::to_string(s.size()) +
                                        " spectrograms for " + std::to_string(ids.size()) + " tracks");
    return s;
  }
  if (!fs::exists(dir / "audio")) throw IoError("missing file: " + (dir / "raw_spec.mrt").string() + " (and no audio/ directory)");
  std::vector<Tensor<float>> out(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    out[i] = dsp::stft_mel_db(dsp::read_wav(require_file(dir / "audio" / (ids[i] + ".wav")))).data;
  });
  return out;
}

inline std::vector<std::string> first_column(const io::CsvTable& t) {
  std::vector<std::string> out;
  for (const auto& r : t.rows) out.push_back(r.at(0));
  return out;
}

/// Fits band statistics on the training split and writes standardized training and target spectrograms.
inline void dsp_cache(const fs::path& in, const fs::path& out) {
  const auto tracks = io::read_csv(require_file(in / "tracks.csv"), {"track_id", "artist_id", "split", "frames"});
  const auto spectra = raw_spectra(in, first_column(tracks));
  std::vector<const Tensor<float>*> train;
  for (std::size_t i = 0; i < spectra.size(); ++i)
    if (tracks.rows[i][2] != "valid") train.push_back(&spectra[i]);
  const auto stats = dsp::fit_standardization(train);

  fs::create_directories(out);
  std::vector<Tensor<float>> std_spec(spectra.size());
  parallel_for(spectra.size(), [&](std::size_t i) { std_spec[i] = dsp::apply_standardization(spectra[i], stats); });
  io::save_tensors(out / "spec.mrt", std_spec);

  io::CsvTable st{{"band", "mean", "sd"}, {}};
  for (std::size_t b = 0; b < stats.mean.size(); ++b)
    st.rows.push_back({std::to_string(b), io::fmt_real(stats.mean[b]), io::fmt_real(stats.sd[b])});
  io::write_csv(out / "stats.csv", st);

  io::KeyValueConfig hdr;
  hdr.set("tracks_hash", file_hash(in / "tracks.csv"));
  if (fs::exists(in / "targets" / "tracks.csv")) {
    const auto targets = io::read_csv(in / "targets" / "tracks.csv", {"track_id", "frames"});
    const auto traw = raw_spectra(in / "targets", first_column(targets));
    std::vector<Tensor<float>> tstd(traw.size());
    parallel_for(traw.size(), [&](std::size_t i) { tstd[i] = dsp::apply_standardization(traw[i], stats); });
    io::save_tensors(out / "targets_spec.mrt", tstd);
    hdr.set("targets_hash", file_hash(in / "targets" / "tracks.csv"));
  }
  hdr.set("stats_hash", file_hash(out / "stats.csv"));
  hdr.save(out / "cache.hdr");
}

// ---- factorize ----------------------------------------------------------------------------------

inline void factorize(const fs::path& corpus, const std::string& source, const factors::FactorConfig& cfg) {
  const auto tracks = io::read_csv(require_file(corpus / "tracks.csv"), {"track_id", "artist_id", "split", "frames"});
  std::vector<std::string> track_ids, artist_ids;
  for (const auto& r : tracks.rows) {
    track_ids.push_back(r[0]);
    artist_ids.push_back(r[1]);
  }
  const auto items = pipeline::label_items(track_ids, artist_ids, source);
  const auto method = factors::method_for(source);
  const auto labels = require_file(corpus / "labels" / (source + ".csv"));
  factors::FactorOutput out;
  if (method == factors::Method::gmm) {
    const auto t = io::read_csv(labels, {"item_id", "value"});
    std::map<std::string, double> values;
    for (const auto& r : t.rows) values[r[0]] = std::stod(r[1]);
    out = factors::factorize_scalars(values, items, cfg);
  } else {
    out = factors::factorize_matrix(factors::read_triplets_csv(labels), method == factors::Method::plsa_tfidf, items, cfg);
  }
  fs::create_directories(corpus / "factors");
  io::save_tensor(corpus / "factors" / (source + ".mrt"), out.z);
  io::KeyValueConfig hdr;
  hdr.set("source", source);
  hdr.set("method", factors::method_name(method));
  hdr.set("k", std::to_string(cfg.k));
  hdr.set("iterations", std::to_string(cfg.iterations));
  hdr.set("seed", std::to_string(cfg.seed));
  hdr.set("uniform_rows", std::to_string(out.uniform_rows));
  hdr.set("log_likelihood", io::fmt_real(out.log_likelihood));
  hdr.set("tracks_hash", file_hash(corpus / "tracks.csv"));
  hdr.save(corpus / "factors" / (source + ".hdr"));
}

// ---- train --------------------------------------------------------------------------------------

struct TrainOptions {
  std::size_t epochs = 200;
  std::size_t batch = 128;
  double learning_rate = 0.00025;
  std::size_t chunk = 216;
  std::size_t feature_dim = 256;
  double dropout = 0.5;
};

struct RunSpec {
  std::string run_id;
  arch::Strategy strategy = arch::Strategy::ssr;
  std::vector<std::string> sources;
  std::uint64_t seed = 0;
};

inline RunSpec run_from_design(const fs::path& design_file, const std::string& id) {
  for (const auto& row : design::read_design_csv(require_file(design_file)))
    if (row.run_id == id) return {row.run_id, row.run.strategy, row.run.sources(), row.seed};
  throw InvalidArgument("run '" + id + "' is not in " + design_file.string());
}

/// Trains one run; zero epochs stores the initialized network (the untrained baseline).
inline void train_run(const fs::path& corpus, const RunSpec& run, const TrainOptions& opt) {
  auto data = train::load_training_corpus(corpus, run.sources);
  std::size_t k = 0;
  for (const auto& s : run.sources) {
    if (s == "self") continue;
    const auto dim = data.labels.at(s).dim(1);
    require(k == 0 || k == dim, "factor files disagree on k; re-run factorize with one k for all sources");
    k = dim;
  }
  arch::StrategySpec spec;
  spec.kind = run.strategy;
  spec.sources = run.sources;
  spec.feature_dim = opt.feature_dim;
  spec.factor_dim = k ? k : 50;
  spec.in_channels = data.spectra.front().dim(0);
  spec.dropout = opt.dropout;
  spec.validate();
  auto net = arch::build<float>(spec, run.seed);

  const auto dir = run_dir(corpus, run.run_id);
  fs::create_directories(dir);
  train::TrainResult result;
  if (opt.epochs > 0) {
    train::TrainConfig cfg;
    cfg.epochs = opt.epochs;
    cfg.batch = opt.batch;
    cfg.learning_rate = opt.learning_rate;
    cfg.chunk = opt.chunk;
    cfg.seed = run.seed;
    cfg.snapshot_dir = dir;
    result = train::train(net, data, cfg);
  }
  arch::save_params(dir / "params.bin", net);
  train::write_loss_log(dir / "loss.csv", result);
  train::write_validation_log(dir / "validation.csv", result);

  io::KeyValueConfig m;
  m.set("run_id", run.run_id);
  m.set("seed", std::to_string(run.seed));
  m.set("epochs", std::to_string(opt.epochs));
  m.set("batch", std::to_string(opt.batch));
  m.set("learning_rate", io::fmt_real(opt.learning_rate));
  m.set("chunk", std::to_string(opt.chunk));
  m.set("corpus_hash", data.content_hash);
  m.set("stats_hash", io::KeyValueConfig::load(require_file(corpus / "cache" / "cache.hdr")).get("stats_hash"));
  m.set("params_hash", file_hash(dir / "params.bin"));
  arch::describe_network(spec, m);
  m.save(dir / "manifest.txt");
}

// ---- extract ------------------------------------------------------------------------------------

inline const std::string kMfccBaseline = "mfcc";

struct TargetSet {
  std::vector<std::string> ids;
  std::map<std::string, std::size_t> index;
};

inline TargetSet target_tracks(const fs::path& corpus) {
  TargetSet t;
  t.ids = first_column(io::read_csv(require_file(corpus / "targets" / "tracks.csv"), {"track_id", "frames"}));
  for (std::size_t i = 0; i < t.ids.size(); ++i) t.index.emplace(t.ids[i], i);
  return t;
}

inline std::vector<std::size_t> dataset_items(const fs::path& corpus, const std::string& dataset, const TargetSet& t,
                                              std::vector<double>* labels = nullptr) {
  const auto items = io::read_csv(require_file(corpus / "targets" / dataset / "items.csv"), {"item_id", "label"});
  std::vector<std::size_t> out;
  for (const auto& r : items.rows) {
    const auto it = t.index.find(r[0]);
    require(it != t.index.end(), "dataset " + dataset + ": item '" + r[0] + "' is not a target track");
    out.push_back(it->second);
    if (labels) labels->push_back(std::stod(r[1]));
  }
  return out;
}

/// Aggregated slice features for a dataset's items from a trained run, or MFCC statistics for the mfcc baseline.
inline void extract(const fs::path& corpus, const std::string& id, const std::string& dataset) {
  const auto targets = target_tracks(corpus);
  const auto items = dataset_items(corpus, dataset, targets);
  const auto dir = run_dir(corpus, id);
  io::KeyValueConfig hdr;
  std::vector<std::vector<double>> feats(items.size());
  if (id == kMfccBaseline) {
    const auto raw = raw_spectra(corpus / "targets", targets.ids);
    parallel_for(items.size(), [&](std::size_t i) { feats[i] = dsp::mfcc_from_spectrogram(raw[items[i]]); });
    hdr.set("source", "mfcc");
  } else {
    const auto manifest = io::KeyValueConfig::load(require_file(dir / "manifest.txt"));
    const auto net = arch::load_network<float>(manifest, require_file(dir / "params.bin"));
    const auto cache = io::KeyValueConfig::load(require_file(corpus / "cache" / "cache.hdr"));
    if (cache.get("stats_hash") != manifest.get("stats_hash"))
      throw IoError("run " + id + " was trained on a different spectrogram cache; re-run train after dsp");
    if (cache.get("targets_hash", "") != file_hash(corpus / "targets" / "tracks.csv"))
      throw IoError("cache/targets_spec.mrt is stale for targets/tracks.csv; re-run dsp");
    const auto spectra = io::load_tensors<float>(require_file(corpus / "cache" / "targets_spec.mrt"));
    require(spectra.size() == targets.ids.size(), "cache/targets_spec.mrt does not match targets/tracks.csv");
    parallel_for(items.size(), [&](std::size_t i) { feats[i] = eval::extract_aggregate(net, spectra[items[i]]); });
    hdr.set("source", "network");
    hdr.set("manifest_hash", file_hash(dir / "manifest.txt"));
  }
  Tensor<float> z({items.size(), feats.front().size()});
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t j = 0; j < feats[i].size(); ++j) z.at(i, j) = static_cast<float>(feats[i][j]);
  fs::create_directories(dir / "features");
  io::save_tensor(dir / "features" / (dataset + ".mrt"), z);
  hdr.set("items_hash", file_hash(corpus / "targets" / dataset / "items.csv"));
  hdr.save(dir / "features" / (dataset + ".hdr"));
}

// ---- evaluate -----------------------------------------------------------------------------------

inline void write_records(const fs::path& path, const std::vector<pipeline::EvaluationRecord>& rows) {
  io::CsvTable t{pipeline::evaluation_header(), {}};
  for (const auto& r : rows)
    t.rows.push_back({r.run_id, r.dataset, r.task, std::to_string(r.split), r.metric, io::fmt_real(r.value)});
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_csv(path, t);
}

inline std::vector<pipeline::EvaluationRecord> evaluate(const fs::path& corpus, const std::string& id,
                                                        const std::string& dataset, const pipeline::EvalConfig& cfg) {
  const auto dir = run_dir(corpus, id);
  const auto hdr = io::KeyValueConfig::load(require_file(dir / "features" / (dataset + ".hdr")));
  if (hdr.get("items_hash") != file_hash(corpus / "targets" / dataset / "items.csv"))
    throw IoError("features for " + dataset + " were extracted for a different item list; re-run extract");
  if (id != kMfccBaseline && hdr.get("manifest_hash", "") != file_hash(dir / "manifest.txt"))
    throw IoError("features for " + dataset + " predate the current manifest of run " + id + "; re-run extract");
  const auto z = io::load_tensor<float>(require_file(dir / "features" / (dataset + ".mrt")));
  const auto task = io::KeyValueConfig::load(require_file(corpus / "targets" / dataset / "dataset.cfg")).get("task");

  const auto targets = target_tracks(corpus);
  std::vector<double> labels;
  const auto items = dataset_items(corpus, dataset, targets, &labels);
  require(z.dim(0) == items.size(), "feature rows do not match the dataset items");
  std::vector<std::vector<double>> X(items.size(), std::vector<double>(z.dim(1)));
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t j = 0; j < z.dim(1); ++j) X[i][j] = z.at(i, j);

  eval::MatrixXd R;
  if (task == "recommendation") {
    const auto t = io::read_csv(require_file(corpus / "targets" / dataset / "interactions.csv"), {"user_id", "item_id", "count"});
    std::vector<synth::Interaction> rows;
    for (const auto& r : t.rows) rows.push_back({r[0], r[1], std::stod(r[2])});
    std::vector<std::string> names;
    for (auto i : items) names.push_back(targets.ids[i]);
    R = pipeline::interaction_matrix(rows, names);
  }
  return pipeline::evaluate_dataset(id, dataset, task, X, labels, R, cfg);
}

// ---- analyze ------------------------------------------------------------------------------------

struct AnalysisSummary {
  std::size_t input_rows = 0, records = 0, skipped_runs = 0;
};

/// Split scores averaged per (run, dataset) and joined with the design; runs outside the design are skipped.
inline std::vector<analysis::Record> load_records(const std::vector<fs::path>& files, const fs::path& design_file,
                                                  AnalysisSummary& summary) {
  std::map<std::string, design::ExperimentalRun> runs;
  for (const auto& r : design::read_design_csv(require_file(design_file))) runs.emplace(r.run_id, r.run);
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> sums;
  std::set<std::string> skipped;
  for (const auto& f : files) {
    const auto t = io::read_csv(require_file(f), pipeline::evaluation_header());
    summary.input_rows += t.rows.size();
    for (const auto& r : t.rows) {
      if (!runs.count(r[0])) {
        skipped.insert(r[0]);
        continue;
      }
      auto& s = sums[{r[0], r[1]}];
      s.first += std::stod(r[5]);
      ++s.second;
    }
  }
  std::vector<analysis::Record> out;
  for (const auto& [key, s] : sums) {
    analysis::Record rec;
    rec.run_id = key.first;
    rec.run = runs.at(key.first);
    rec.dataset = key.second;
    rec.y = s.first / static_cast<double>(s.second);
    out.push_back(rec);
  }
  summary.records = out.size();
  summary.skipped_runs = skipped.size();
  return out;
}

inline void write_fit(const fs::path& path, const analysis::LinearFitResult& fit) {
  io::CsvTable t{{"term", "estimate", "lower", "upper"}, {}};
  for (const auto& c : fit.coefficients)
    t.rows.push_back({c.term, io::fmt_real(c.estimate), io::fmt_real(c.lower), io::fmt_real(c.upper)});
  io::write_csv(path, t);
}

inline void analyze(const std::vector<fs::path>& files, const fs::path& design_file, const fs::path& out,
                    const analysis::BootstrapConfig& boot) {
  AnalysisSummary summary;
  auto records = load_records(files, design_file, summary);
  require(!records.empty(), "analyze: no records belong to runs of the design");
  analysis::standardize(records);
  fs::create_directories(out);

  io::CsvTable st{{"run_id", "dataset", "strategy", "n", "y", "y_star"}, {}};
  for (const auto& r : records)
    st.rows.push_back({r.run_id, r.dataset, arch::strategy_name(r.run.strategy), std::to_string(r.run.n()),
                       io::fmt_real(r.y), io::fmt_real(r.y_star)});
  io::write_csv(out / "standardized.csv", st);

  const auto strat = analysis::fit_strategy_model(records, boot);
  write_fit(out / "strategy_model.csv", strat);
  const auto size = analysis::fit_size_model(records, boot);
  write_fit(out / "size_model.csv", size);

  const auto vc = analysis::variance_components(records);
  io::CsvTable vt{{"dataset", "source", "percent", "largest"}, {}};
  for (const auto& c : vc)
    vt.rows.push_back({c.dataset, c.source, std::isnan(c.percent) ? "" : io::fmt_real(c.percent), c.largest ? "1" : "0"});
  io::write_csv(out / "variance_components.csv", vt);

  std::ofstream os(out / "summary.txt");
  os << "input rows: " << summary.input_rows << "\n";
  os << "records (run x dataset, split-averaged): " << summary.records << "\n";
  os << "runs outside the design (skipped): " << summary.skipped_runs << "\n";
  os << "bootstrap resamples: " << boot.resamples << ", seed " << boot.seed << ", level " << io::fmt_real(boot.level) << "\n";
  os << "method: scores standardized within dataset, fixed effects by OLS, intervals by bootstrap over runs.\n"
        "This approximates the multilevel model by replacing dataset-level random effects with per-dataset centering;\n"
        "intervals are not equivalent to the multilevel p-values.\n";
  os << "variance components: one-way method-of-moments estimate per source flag, non-ss-r runs only.\n";
  os << "pearson(ss-r mean y*, variance component): " << io::fmt_real(analysis::ssr_component_correlation(records, vc))
     << "\n";
  for (const auto& c : vc)
    if (c.largest) os << "largest component on " << c.dataset << ": " << c.source << " (" << io::fmt_real(c.percent) << "%)\n";
  if (!os) throw IoError("write failed: " + (out / "summary.txt").string());
}

} // namespace mtdtl::cli
