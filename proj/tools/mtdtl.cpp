#include <CLI11.hpp>

#include <iostream>

#include "mtdtl/cli/commands.hpp"

using namespace mtdtl;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> datasets_arg(const fs::path& corpus, const std::string& d) {
  if (d != "all") return {d};
  std::vector<std::string> out;
  for (const auto& t : synth::target_datasets())
    if (fs::exists(corpus / "targets" / t.name)) out.push_back(t.name);
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source music representation pipeline"};
  app.require_subcommand(1);
  fs::path corpus = ".";

  auto* syn = app.add_subcommand("synth", "generate a synthetic corpus");
  fs::path spec_file, synth_out;
  syn->add_option("--spec", spec_file, "key = value synth spec (defaults when omitted)");
  syn->add_option("--out", synth_out, "corpus directory")->required();

  auto* dsp = app.add_subcommand("dsp", "standardized spectrogram cache and band statistics");
  fs::path dsp_in, dsp_out;
  dsp->add_option("--in", dsp_in, "corpus directory")->required();
  dsp->add_option("--out", dsp_out, "cache directory (default <in>/cache)");

  auto* fac = app.add_subcommand("factorize", "factor distributions for a learning source");
  std::string fac_source;
  factors::FactorConfig fcfg;
  fac->add_option("--corpus", corpus, "corpus directory")->capture_default_str();
  fac->add_option("--source", fac_source, "source name or 'all'")->required();
  fac->add_option("--k", fcfg.k, "components")->capture_default_str();
  fac->add_option("--iterations", fcfg.iterations, "EM iterations")->capture_default_str();
  fac->add_option("--seed", fcfg.seed, "seed")->capture_default_str();

  auto* des = app.add_subcommand("design", "experimental design");
  des->require_subcommand(1);
  auto* gen = des->add_subcommand("gen", "generate the run table");
  design::DesignConfig dcfg;
  fs::path design_out = "design.csv";
  std::string mode = "all_runs";
  gen->add_option("--budget", dcfg.budget, "greedy phase-3 runs")->capture_default_str();
  gen->add_option("--seed", dcfg.seed, "seed")->capture_default_str();
  gen->add_option("--phase1-replicates", dcfg.phase1_replicates)->capture_default_str();
  gen->add_option("--phase2-replicates", dcfg.phase2_replicates)->capture_default_str();
  gen->add_option("--mode", mode, "alias mode")->check(CLI::IsMember({"all_runs", "phase3_only"}))->capture_default_str();
  gen->add_option("--out", design_out, "design CSV")->capture_default_str();

  auto* trn = app.add_subcommand("train", "train one run of the design");
  std::string run_id, strategy, sources;
  fs::path design_file;
  cli::TrainOptions topt;
  std::uint64_t run_seed = 0;
  trn->add_option("--corpus", corpus, "corpus directory")->capture_default_str();
  trn->add_option("--run-id", run_id, "design row (number or id), or a free name with --strategy")->required();
  trn->add_option("--design", design_file, "design CSV");
  trn->add_option("--strategy", strategy, "strategy when not taken from a design");
  trn->add_option("--sources", sources, "comma-separated sources when not taken from a design");
  trn->add_option("--seed", run_seed, "seed when not taken from a design");
  trn->add_option("--epochs", topt.epochs, "epochs; 0 stores the untrained network")->capture_default_str();
  trn->add_option("--batch", topt.batch)->capture_default_str();
  trn->add_option("--lr", topt.learning_rate)->capture_default_str();
  trn->add_option("--chunk", topt.chunk, "crop length in frames")->capture_default_str();
  trn->add_option("--feature-dim", topt.feature_dim, "fc-feature width d")->capture_default_str();
  trn->add_option("--dropout", topt.dropout)->capture_default_str();

  auto* ext = app.add_subcommand("extract", "aggregated features of a target dataset");
  std::string dataset;
  ext->add_option("--corpus", corpus, "corpus directory")->capture_default_str();
  ext->add_option("--run-id", run_id, "trained run, or 'mfcc'")->required();
  ext->add_option("--dataset", dataset, "target dataset or 'all'")->required();

  auto* evl = app.add_subcommand("evaluate", "probe or recommender scores over repeated splits");
  pipeline::EvalConfig ecfg;
  fs::path eval_out;
  evl->add_option("--corpus", corpus, "corpus directory")->capture_default_str();
  evl->add_option("--run-id", run_id, "run or 'mfcc'")->required();
  evl->add_option("--dataset", dataset, "target dataset or 'all'")->required();
  evl->add_option("--splits", ecfg.splits)->capture_default_str();
  evl->add_option("--probe-iterations", ecfg.probe.iterations)->capture_default_str();
  evl->add_option("--out", eval_out, "CSV (default runs/<id>/eval/<dataset>.csv)");

  auto* ana = app.add_subcommand("analyze", "standardized scores, fixed effects and variance components");
  std::vector<fs::path> records;
  fs::path ana_out = "report";
  analysis::BootstrapConfig boot;
  ana->add_option("--records", records, "evaluation CSV files")->required();
  ana->add_option("--design", design_file, "design CSV")->required();
  ana->add_option("--out", ana_out, "report directory")->capture_default_str();
  ana->add_option("--bootstrap", boot.resamples)->capture_default_str();
  ana->add_option("--seed", boot.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*syn) {
      cli::synth(spec_file, synth_out);
    } else if (*dsp) {
      cli::dsp_cache(dsp_in, dsp_out.empty() ? dsp_in / "cache" : dsp_out);
    } else if (*fac) {
      if (fac_source == "all") {
        for (const auto& s : arch::all_sources())
          if (s != "self") cli::factorize(corpus, s, fcfg);
      } else {
        cli::factorize(corpus, fac_source, fcfg);
      }
    } else if (*gen) {
      dcfg.mode = mode == "all_runs" ? design::AliasMode::all_runs : design::AliasMode::phase3_only;
      const auto rows = design::generate_full_design(dcfg);
      design::write_design_csv(design_out, rows);
      std::cout << rows.size() << " runs written to " << design_out.string() << "\n";
    } else if (*trn) {
      cli::RunSpec run;
      if (!design_file.empty()) {
        require(strategy.empty() && sources.empty(), "train: --design and --strategy/--sources are exclusive");
        run = cli::run_from_design(design_file, cli::normalize_run_id(run_id));
      } else {
        require(!strategy.empty() && !sources.empty(), "train: give --design, or --strategy with --sources");
        run = {cli::normalize_run_id(run_id), arch::parse_strategy(strategy), arch::split_sources(sources), run_seed};
      }
      cli::train_run(corpus, run, topt);
    } else if (*ext) {
      const auto id = cli::normalize_run_id(run_id);
      for (const auto& d : datasets_arg(corpus, dataset)) cli::extract(corpus, id, d);
    } else if (*evl) {
      const auto id = cli::normalize_run_id(run_id);
      const auto ds = datasets_arg(corpus, dataset);
      std::vector<std::vector<pipeline::EvaluationRecord>> rows(ds.size());
      for (std::size_t i = 0; i < ds.size(); ++i) rows[i] = cli::evaluate(corpus, id, ds[i], ecfg);
      if (!eval_out.empty()) {
        std::vector<pipeline::EvaluationRecord> all;
        for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
        cli::write_records(eval_out, all);
      } else {
        for (std::size_t i = 0; i < ds.size(); ++i)
          cli::write_records(cli::run_dir(corpus, id) / "eval" / (ds[i] + ".csv"), rows[i]);
      }
    } else if (*ana) {
      cli::analyze(records, design_file, ana_out, boot);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
