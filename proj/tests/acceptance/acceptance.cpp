#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "als_oracle.hpp"
#include "design_oracle.hpp"
#include "gradcheck.hpp"
#include "mtdtl/cli/commands.hpp"
#include "mtdtl/nn/loss.hpp"

using namespace mtdtl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 ------------------------------------------------------------------------------------------

Outcome shape_fidelity() {
  const auto chain = arch::base_chain(2, 256, 0.5);
  const auto shapes = nn::infer_shapes(chain, {1, 2, 216, 128});
  const std::vector<std::pair<std::string, Shape>> table = {
      {"conv1", {16, 108, 128}}, {"max-pool1", {16, 54, 64}}, {"conv2", {32, 54, 64}}, {"max-pool2", {32, 27, 32}},
      {"conv3", {64, 27, 32}},   {"max-pool3", {64, 13, 16}}, {"conv4", {64, 13, 16}}, {"max-pool4", {64, 6, 8}},
      {"conv5", {128, 6, 8}},    {"max-pool5", {128, 3, 4}},  {"conv61", {256, 3, 4}}, {"conv62", {256, 3, 4}},
      {"gap", {256}},            {"fc-feature", {256}}};
  std::size_t matched = 0;
  for (const auto& [name, want] : table)
    for (std::size_t i = 0; i < chain.size(); ++i)
      if (chain[i].name == name && Shape(shapes[i + 1].begin() + 1, shapes[i + 1].end()) == want) ++matched;
  Rng rng(1);
  const auto params = nn::init_params<float>(chain, rng);
  Tensor<float> x({1, 2, 216, 128});
  for (auto& v : x.storage()) v = static_cast<float>(normal01(rng));
  const auto y = nn::forward_eval(chain, params, x);
  const bool out_ok = y.shape() == Shape{1, 256};
  return {matched == table.size() && out_ok,
          fmt("%zu/%zu layer shapes match, forward output %s", matched, table.size(), shape_string(y.shape()).c_str())};
}

// ---- 2 ------------------------------------------------------------------------------------------

Outcome parameter_accounting() {
  auto count = [](arch::Strategy s, std::size_t m) {
    arch::StrategySpec spec;
    spec.kind = s;
    spec.sources.assign(arch::all_sources().begin(), arch::all_sources().begin() + static_cast<long>(m));
    return static_cast<double>(arch::count_parameters(spec));
  };
  const double ssr = count(arch::Strategy::ssr, 1);
  const double r6 = count(arch::Strategy::mscr6, 8) / ssr, rfc = count(arch::Strategy::mssrfc, 8) / ssr;
  // identical head types: factor-label sources only
  auto factor_sources = [](arch::Strategy s, std::size_t m) {
    arch::StrategySpec spec;
    spec.kind = s;
    for (std::size_t i = 0; i < m; ++i) spec.sources.push_back(arch::all_sources()[1 + i % 7]);
    return static_cast<double>(arch::count_parameters(spec));
  };
  bool exact = true;
  for (std::size_t m = 2; m <= 8; ++m)
    exact = exact && factor_sources(arch::Strategy::msscr, m) == static_cast<double>(m) * factor_sources(arch::Strategy::ssr, 1);
  return {r6 >= 5.8 && r6 <= 6.8 && rfc >= 1.1 && rfc <= 1.3 && exact,
          fmt("ms-cr@6/ss-r %.3f, ms-sr@fc/ss-r %.3f, mss-cr = m * ss-r for m=2..8: %s", r6, rfc, exact ? "yes" : "no")};
}

// ---- 3 ------------------------------------------------------------------------------------------

Tensor<double> random_tensor(const Shape& s, Rng& rng) {
  Tensor<double> t(s);
  for (auto& v : t.storage()) v = normal01(rng);
  return t;
}

Outcome gradient_correctness() {
  using nn::LayerSpec;
  double worst = 0.0;
  std::string where;
  auto note = [&](const testing::ChainCheck& c, const std::string& what, std::uint64_t seed) {
    if (c.error >= worst) worst = c.error, where = what + " " + c.worst + " seed " + std::to_string(seed);
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed * 7919 + 1);
    const std::vector<std::pair<LayerSpec, Shape>> layers = {
        {LayerSpec::conv("conv", 2, 3, 5, 5, 2, 1), {2, 2, 9, 6}}, {LayerSpec::conv("conv", 2, 3, 3, 3, 1, 1, true), {2, 2, 5, 4}},
        {LayerSpec::maxpool("pool"), {2, 2, 5, 6}},                {LayerSpec::batchnorm("bn", 3), {2, 3, 3, 2}},
        {LayerSpec::batchnorm("bn", 4), {6, 4}},                   {LayerSpec::relu("relu"), {3, 7}},
        {LayerSpec::gap("gap"), {2, 3, 4, 5}},                     {LayerSpec::fc("fc", 5, 4, true), {3, 5}},
        {LayerSpec::fc("fc", 5, 4, false), {3, 5}},                {LayerSpec::dropout("drop", 0.5), {4, 6}},
        {LayerSpec::softmax("softmax"), {3, 6}}};
    for (const auto& [spec, shape] : layers)
      note(testing::chain_gradient_error({spec}, random_tensor(shape, rng), seed), spec.name, seed);

    Rng kr(seed + 100);
    const std::size_t K = 50;
    auto logits = random_tensor({2, K}, kr);
    Tensor<double> z({2, K});
    for (std::size_t n = 0; n < 2; ++n) {
      double s = 0;
      for (std::size_t k = 0; k < K; ++k) s += z[n * K + k] = uniform01(kr);
      for (std::size_t k = 0; k < K; ++k) z[n * K + k] /= s;
    }
    const auto analytic = nn::kl_loss_from_logits(z, logits).grad_logits;
    const auto num = testing::numeric_gradient(logits, [&] { return nn::kl_loss_from_logits(z, logits).loss; }, 1e-6);
    note({testing::relative_error(num, testing::values_of(analytic)), "logits"}, "kl", seed);

    auto chain = arch::base_chain(2, 16, 0.5);
    chain.push_back(LayerSpec::fc("fc-output", 16, 5));
    chain.push_back(LayerSpec::softmax("softmax"));
    Rng cr(seed + 500);
    note(testing::chain_gradient_error(chain, random_tensor({3, 2, 128, 64}, cr), seed, 12), "network", seed);
  }
  return {worst < 1e-4, fmt("worst relative error %.3g (%s)", worst, where.c_str())};
}

// ---- 4 ------------------------------------------------------------------------------------------

Outcome em_monotonicity() {
  double worst_plsa = 0.0, worst_gmm = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t docs = 5 + uniform_index(rng, 10), terms = 4 + uniform_index(rng, 8);
    std::vector<factors::Triplet> t;
    for (std::size_t d = 0; d < docs; ++d) {
      t.push_back({"d" + std::to_string(d), "w" + std::to_string(uniform_index(rng, terms)), 1.0});
      for (std::size_t w = 0; w < terms; ++w)
        if (uniform01(rng) < 0.3) t.push_back({"d" + std::to_string(d), "w" + std::to_string(w), 1.0 + uniform_index(rng, 5)});
    }
    for (std::size_t w = 0; w < terms; ++w) t.push_back({"d0", "w" + std::to_string(w), 1.0});
    const auto p = factors::plsa_fit(factors::from_triplets(t), 1 + uniform_index(rng, 4), 40, seed);
    for (std::size_t i = 1; i < p.log_likelihood.size(); ++i)
      worst_plsa = std::max(worst_plsa, p.log_likelihood[i - 1] - p.log_likelihood[i]);

    Rng gr(seed + 1000);
    std::vector<double> xs(10 + uniform_index(gr, 60));
    for (auto& x : xs) x = 10 * normal01(gr) + (uniform01(gr) < 0.5 ? 30 : 0);
    const auto g = factors::gmm_fit(xs, 1 + uniform_index(gr, 6), 60, seed);
    for (std::size_t i = 1; i < g.log_likelihood.size(); ++i)
      worst_gmm = std::max(worst_gmm, g.log_likelihood[i - 1] - g.log_likelihood[i]);
  }
  return {worst_plsa <= 1e-9 && worst_gmm <= 1e-9,
          fmt("largest per-iteration decrease: plsa %.3g, gmm %.3g (100 instances each)", worst_plsa, worst_gmm)};
}

// ---- 5 ------------------------------------------------------------------------------------------

Outcome design_generator() {
  using namespace design;
  const auto full = enumerate_pool();
  std::map<std::size_t, std::set<unsigned>> subsets;
  for (const auto& r : full.phase3) {
    unsigned mask = 0;
    for (std::size_t i = 0; i < kSources; ++i) mask |= static_cast<unsigned>(r.flags[i]) << i;
    subsets[r.n()].insert(mask);
  }
  const bool pool_ok = full.phase3.size() == 1230 && subsets[4].size() == 70 && subsets[2].size() == 28 && subsets[7].size() == 8;
  const auto rows = generate_full_design({});
  std::map<int, std::size_t> phases;
  for (const auto& r : rows) ++phases[r.phase];
  const bool rows_ok = rows.size() == 425 && phases[1] == 48 && phases[2] == 25 && phases[3] == 352;

  bool toy_ok = true;
  for (std::uint64_t seed = 0; seed < 10 && toy_ok; ++seed) {
    Rng pick_rng(seed);
    const auto perm = random_permutation(full.phase3.size(), pick_rng);
    std::vector<ExperimentalRun> pool;
    for (std::size_t i = 0; i < 12; ++i) pool.push_back(full.phase3[perm[i]]);
    const std::vector<ExperimentalRun> start = {full.phase1[seed % 8], full.phase2[seed % 5], full.phase1[(seed + 3) % 8]};
    DesignState state(pool, start);
    Rng a(seed + 100), b(seed + 100);
    std::vector<ExperimentalRun> done = start;
    std::vector<char> left(pool.size(), 1);
    for (int step = 0; step < 12 && toy_ok; ++step) {
      std::size_t best_u = SIZE_MAX;
      std::vector<std::size_t> O;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!left[i]) continue;
        auto d = done;
        d.push_back(pool[i]);
        std::vector<ExperimentalRun> rest;
        for (std::size_t j = 0; j < pool.size(); ++j)
          if (left[j] && j != i) rest.push_back(pool[j]);
        const auto u = testing_oracle::count_unbalance(d, &rest);
        if (u < best_u) O.clear(), best_u = u;
        if (u == best_u) O.push_back(i);
      }
      double best_a = 1e300;
      std::vector<double> al;
      for (auto i : O) {
        auto d = done;
        d.push_back(pool[i]);
        al.push_back(testing_oracle::ls_max_alias(d, AliasMode::all_runs));
        best_a = std::min(best_a, al.back());
      }
      std::vector<std::size_t> P;
      for (std::size_t j = 0; j < O.size(); ++j)
        if (al[j] <= best_a + 1e-9) P.push_back(O[j]);
      toy_ok = state.candidates() == P;
      const auto expect = P[uniform_index(b, P.size())];
      toy_ok = toy_ok && state.next_run(a) == expect;
      left[expect] = 0;
      done.push_back(pool[expect]);
    }
  }

  const auto runs = runs_of(rows);
  const double greedy = alias_matrix(runs).max_alias;
  Rng rng(2024);
  std::vector<double> random;
  for (int k = 0; k < 1000; ++k) {
    const auto perm = random_permutation(full.phase3.size(), rng);
    std::vector<ExperimentalRun> d(runs.begin(), runs.begin() + 73);
    for (std::size_t i = 0; i < 352; ++i) d.push_back(full.phase3[perm[i]]);
    random.push_back(alias_matrix(d).max_alias);
  }
  std::sort(random.begin(), random.end());
  const double median = 0.5 * (random[499] + random[500]);
  return {pool_ok && rows_ok && toy_ok && greedy < median,
          fmt("pool %zu (n=4: %zu, n=2: %zu, n=7: %zu); rows %zu = %zu+%zu+%zu; toy exhaustive %s; "
              "max alias %.3f vs random median %.3f",
              full.phase3.size(), subsets[4].size(), subsets[2].size(), subsets[7].size(), rows.size(), phases[1],
              phases[2], phases[3], toy_ok ? "agrees" : "DIFFERS", greedy, median)};
}

// ---- 6 ------------------------------------------------------------------------------------------

Outcome als_recommender() {
  using eval::MatrixXd;
  auto counts = [](std::size_t u, std::size_t i, double density, Rng& rng) {
    MatrixXd R = MatrixXd::Zero(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(i));
    for (Eigen::Index k = 0; k < R.size(); ++k)
      if (uniform01(rng) < density) R.data()[k] = 1.0 + static_cast<double>(poisson_draw(rng, 3.0));
    return R;
  };
  auto gauss = [](std::size_t r, std::size_t c, Rng& rng) {
    MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = normal01(rng);
    return m;
  };
  std::size_t monotone = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto R = counts(10 + seed % 7, 12 + seed % 5, 0.3, rng);
    const auto X = gauss(static_cast<std::size_t>(R.cols()), 3 + seed % 4, rng);
    eval::AlsConfig c;
    c.rank = 4;
    c.seed = seed;
    const auto m = eval::als_fit(R, X, c);
    bool ok = m.objective.size() == 16;
    for (std::size_t i = 1; i < m.objective.size(); ++i)
      ok = ok && m.objective[i] <= m.objective[i - 1] + 1e-9 * std::abs(m.objective[i - 1]);
    monotone += ok;
  }

  Rng rng(3);
  const auto R = counts(4, 5, 0.4, rng);
  const auto X = gauss(5, 3, rng);
  eval::AlsConfig c;
  c.rank = 2;
  c.lambda_u = 0.1;
  c.lambda_v = 0.5;
  c.lambda_w = 0.1;
  c.seed = 11;
  c.iterations = 0;
  const auto start = eval::als_fit(R, X, c);
  c.iterations = 5000;
  const double gap = std::abs(eval::als_fit(R, X, c).objective.back() -
                              testing_oracle::gd_minimize(R, X, c, {start.U, start.V, start.W}));

  const auto p = testing_oracle::planted_recs(150, 400, 20, 5, 42);
  const auto good = eval::cold_start_eval(p.R, p.X, {}, 0.2, 1);
  const auto zero = eval::cold_start_eval(p.R, MatrixXd::Zero(p.X.rows(), p.X.cols()), {}, 0.2, 1);
  const double lift = good.ndcg - good.random_ndcg;
  return {monotone == 100 && gap < 1e-6 && lift >= 0.1 && zero.p_value > 0.01,
          fmt("monotone %zu/100; |ALS - GD| %.2g; planted nDCG@500 %.3f vs random %.3f (+%.3f); zero features p=%.3f",
              monotone, gap, good.ndcg, good.random_ndcg, lift, zero.p_value)};
}

// ---- shared synthetic corpus for 7 and 8 --------------------------------------------------------

struct SynthSuite {
  synth::Corpus corpus;
  train::TrainingCorpus training;
  std::vector<Tensor<float>> targets;  // standardized target spectrograms
};

SynthSuite& synth_suite() {
  static SynthSuite s = [] {
    SynthSuite out;
    out.corpus = synth::generate(synth::SynthSpec{});
    const auto stats = pipeline::training_stats(out.corpus);
    out.training = pipeline::training_corpus(out.corpus, arch::all_sources(), stats, {});
    for (const auto& t : out.corpus.target_spectra) out.targets.push_back(dsp::apply_standardization(t, stats));
    return out;
  }();
  return s;
}

std::vector<std::vector<double>> target_features(const arch::BranchedNetwork<float>& net) {
  const auto& s = synth_suite();
  std::vector<std::vector<double>> f(s.targets.size());
  parallel_for(s.targets.size(), [&](std::size_t i) { f[i] = eval::extract_aggregate(net, s.targets[i]); });
  return f;
}

arch::BranchedNetwork<float> trained_ssr(const std::string& source, std::size_t epochs, std::uint64_t seed) {
  arch::StrategySpec spec;
  spec.sources = {source};
  spec.feature_dim = 64;
  auto net = arch::build<float>(spec, seed);
  if (epochs > 0) {
    train::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.validate_every = 0;
    train::train(net, synth_suite().training, cfg);
  }
  return net;
}

double mean_score(const std::string& dataset, const std::string& task, const std::vector<std::vector<double>>& features) {
  const auto& c = synth_suite().corpus;
  std::vector<double> labels;
  eval::MatrixXd R;
  if (task == "recommendation") {
    std::vector<std::string> ids;
    for (const auto& t : c.target_tracks) ids.push_back(t.id);
    R = pipeline::interaction_matrix(c.rec_interactions, ids);
  } else {
    for (const auto& t : c.target_tracks) labels.push_back(synth::target_label(dataset, t));
  }
  const auto rows = pipeline::evaluate_dataset("", dataset, task, features, labels, R, {});
  double s = 0;
  for (const auto& r : rows) s += r.value;
  return s / static_cast<double>(rows.size());
}

// ---- 7 ------------------------------------------------------------------------------------------

Outcome learning_signal() {
  std::string detail;
  double lift = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const double rand = mean_score("tempo_cls", "classification", target_features(trained_ssr("bpm", 0, seed)));
    const double ssr = mean_score("tempo_cls", "classification", target_features(trained_ssr("bpm", 150, seed)));
    lift += (ssr - rand) / 3.0;
    detail += fmt("seed %llu: ss-r %.3f rand %.3f; ", static_cast<unsigned long long>(seed), ssr, rand);
  }
  return {lift >= 0.10, detail + fmt("mean lift %+.1f points", 100 * lift)};
}

// ---- 8 ------------------------------------------------------------------------------------------

Outcome main_effects() {
  constexpr std::size_t kSeeds = 5, kMaxN = 4;
  const auto& targets = synth::target_datasets();
  // y[seed][n-1][dataset]
  std::vector<std::vector<std::vector<double>>> y(kSeeds, std::vector<std::vector<double>>(kMaxN, std::vector<double>(targets.size())));
  for (std::size_t seed = 0; seed < kSeeds; ++seed) {
    Rng order_rng(derive_seed(seed, 0x6d7373));
    const auto order = random_permutation(arch::all_sources().size(), order_rng);
    std::vector<std::vector<std::vector<double>>> parts;
    for (std::size_t j = 0; j < kMaxN; ++j) {
      const auto& src = arch::all_sources()[order[j]];
      parts.push_back(target_features(trained_ssr(src, 30, derive_seed(seed, j + 1))));
      std::vector<std::vector<double>> concat(parts[0].size());
      for (std::size_t i = 0; i < concat.size(); ++i)
        for (const auto& p : parts) concat[i].insert(concat[i].end(), p[i].begin(), p[i].end());
      for (std::size_t d = 0; d < targets.size(); ++d) y[seed][j][d] = mean_score(targets[d].name, targets[d].task, concat);
    }
  }
  // standardize within dataset over all (seed, n) cells
  for (std::size_t d = 0; d < targets.size(); ++d) {
    double m = 0, ss = 0;
    for (const auto& s : y)
      for (const auto& n : s) m += n[d];
    m /= static_cast<double>(kSeeds * kMaxN);
    for (const auto& s : y)
      for (const auto& n : s) ss += (n[d] - m) * (n[d] - m);
    const double sd = std::sqrt(ss / static_cast<double>(kSeeds * kMaxN));
    for (auto& s : y)
      for (auto& n : s) n[d] = sd > 0 ? (n[d] - m) / sd : 0.0;
  }
  std::vector<double> mean(kMaxN, 0.0), sd(kMaxN, 0.0);
  for (std::size_t n = 0; n < kMaxN; ++n) {
    std::vector<double> per_seed;
    for (std::size_t s = 0; s < kSeeds; ++s) {
      double v = 0;
      for (double x : y[s][n]) v += x;
      per_seed.push_back(v / static_cast<double>(targets.size()));
    }
    for (double v : per_seed) mean[n] += v / static_cast<double>(kSeeds);
    for (double v : per_seed) sd[n] += (v - mean[n]) * (v - mean[n]);
    sd[n] = std::sqrt(sd[n] / static_cast<double>(kSeeds - 1));
  }
  bool monotone = true;
  for (std::size_t n = 1; n < kMaxN; ++n) monotone = monotone && mean[n] >= mean[n - 1];
  return {monotone && sd[3] <= sd[0],
          fmt("mean y* by n: %.3f %.3f %.3f %.3f; across-seed sd n=1 %.3f, n=4 %.3f", mean[0], mean[1], mean[2], mean[3],
              sd[0], sd[3])};
}

// ---- 9 ------------------------------------------------------------------------------------------

Outcome analysis_pipeline() {
  using namespace analysis;
  const auto all = design::generate_full_design({});
  auto records_for = [](const std::vector<design::DesignRow>& rows, std::size_t datasets) {
    std::vector<Record> out;
    for (const auto& r : rows)
      for (std::size_t d = 0; d < datasets; ++d) out.push_back({r.run_id, r.run, "d" + std::to_string(d), 0.0, 0.0});
    return out;
  };
  auto rs = records_for(all, 3);
  Rng rng(1);
  for (auto& r : rs) r.y = 10.0 * uniform01(rng) + static_cast<double>(r.dataset.back() - '0') * 5;
  standardize(rs);
  auto again = rs;
  for (auto& r : again) r.y = r.y_star;
  standardize(again);
  double drift = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) drift = std::max(drift, std::abs(again[i].y_star - rs[i].y_star));

  std::size_t covered = 0, total = 0;
  for (std::uint64_t sim = 0; sim < 200; ++sim) {
    Rng srng(1000 + sim);
    const auto perm = random_permutation(all.size(), srng);
    std::vector<design::DesignRow> rows;
    for (std::size_t i = 0; i < 120; ++i) rows.push_back(all[perm[i]]);
    auto null = records_for(rows, 3);
    for (auto& r : null) r.y = normal01(srng);
    standardize(null);
    BootstrapConfig cfg;
    cfg.seed = sim;
    for (const auto& c : fit_strategy_model(null, cfg).coefficients) {
      covered += c.lower <= 0.0 && 0.0 <= c.upper;
      ++total;
    }
  }
  const double coverage = static_cast<double>(covered) / static_cast<double>(total);

  auto planted = records_for(all, 3);
  Rng prng(5);
  const auto& src = arch::all_sources();
  const auto bpm = static_cast<std::size_t>(std::find(src.begin(), src.end(), "bpm") - src.begin());
  for (auto& r : planted) r.y_star = 4.0 * (r.run.flags[bpm] ? 1.0 : 0.0) + normal01(prng);
  double min_share = 100.0;
  bool largest = true;
  for (const auto& c : variance_components(planted)) {
    if (c.source == "bpm") min_share = std::min(min_share, c.percent);
    largest = largest && (c.source == "bpm") == c.largest;
  }
  return {drift < 1e-12 && std::abs(coverage - 0.95) <= 0.03 && min_share > 80.0 && largest,
          fmt("idempotence drift %.2g; null coverage %.3f over %zu intervals; planted source share %.1f%% (largest: %s)",
              drift, coverage, total, min_share, largest ? "yes" : "no")};
}

// ---- 10 -----------------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void run_commands(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto c = dir / "corpus";
  io::KeyValueConfig spec;
  spec.set("tracks", "100");
  spec.set("target_tracks", "60");
  spec.set("artists", "20");
  spec.set("taste_users", "30");
  spec.set("rec_users", "30");
  spec.set("seed", "17");
  spec.save(dir / "synth.cfg");
  cli::synth(dir / "synth.cfg", c);
  cli::dsp_cache(c, c / "cache");
  factors::FactorConfig f;
  f.k = 8;
  f.iterations = 20;
  for (const auto& s : arch::all_sources())
    if (s != "self") cli::factorize(c, s, f);
  const auto rows = design::generate_full_design({});
  design::write_design_csv(c / "design.csv", rows);
  cli::TrainOptions t;
  t.epochs = 1;
  t.batch = 16;
  t.chunk = 128;
  t.feature_dim = 16;
  pipeline::EvalConfig e;
  e.splits = 2;
  e.probe.iterations = 30;
  std::vector<pipeline::EvaluationRecord> all;
  for (const char* id : {"r0001", "r0050", "r0100"}) {
    cli::train_run(c, cli::run_from_design(c / "design.csv", id), t);
    for (const auto& d : synth::target_datasets()) {
      cli::extract(c, id, d.name);
      const auto r = cli::evaluate(c, id, d.name, e);
      all.insert(all.end(), r.begin(), r.end());
    }
  }
  cli::extract(c, cli::kMfccBaseline, "tempo_cls");
  const auto m = cli::evaluate(c, cli::kMfccBaseline, "tempo_cls", e);
  all.insert(all.end(), m.begin(), m.end());
  cli::write_records(c / "records.csv", all);

  // analysis needs every strategy, so it runs on a seeded score table over the full design
  std::vector<pipeline::EvaluationRecord> table;
  Rng rng(8);
  for (const auto& r : rows)
    for (const auto& d : synth::target_datasets())
      table.push_back({r.run_id, d.name, d.task, 0, "score", 0.05 * static_cast<double>(r.run.n()) + normal01(rng)});
  cli::write_records(c / "score_table.csv", table);
  analysis::BootstrapConfig boot;
  boot.resamples = 200;
  cli::analyze({c / "score_table.csv", c / "records.csv"}, c / "design.csv", c / "report", boot);
}

Outcome determinism() {
  const char* prev = std::getenv("MTDTL_THREADS");
  const std::string saved = prev ? prev : "";
  setenv("MTDTL_THREADS", "1", 1);
  const auto base = fs::temp_directory_path() / "mtdtl_acceptance_determinism";
  run_commands(base / "a");
  run_commands(base / "b");
  if (prev) setenv("MTDTL_THREADS", saved.c_str(), 1);
  else unsetenv("MTDTL_THREADS");
  std::size_t csv = 0, other = 0;
  std::vector<std::string> differing;
  for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), base / "a");
    const bool same = fs::exists(base / "b" / rel) && slurp(e.path()) == slurp(base / "b" / rel);
    (e.path().extension() == ".csv" ? csv : other) += 1;
    if (!same) differing.push_back(rel.string());
  }
  fs::remove_all(base);
  return {differing.empty() && csv > 20,
          fmt("%zu CSV and %zu other files compared, %zu differ%s", csv, other, differing.size(),
              differing.empty() ? "" : (": " + differing.front()).c_str())};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criterion numbers to run (default all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "shape fidelity", 1, shape_fidelity},
      {2, "parameter accounting", 1, parameter_accounting},
      {3, "gradient correctness", 300, gradient_correctness},
      {4, "EM monotonicity", 120, em_monotonicity},
      {5, "design generator", 600, design_generator},
      {6, "ALS recommender", 600, als_recommender},
      {7, "end-to-end learning signal", 45 * 60, learning_signal},
      {8, "direction of main effects", 4 * 3600, main_effects},
      {9, "analysis pipeline", 600, analysis_pipeline},
      {10, "determinism", 600, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("[%s] %2d %s: %s; %.2f s (limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(),
                secs, c.limit_seconds, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
