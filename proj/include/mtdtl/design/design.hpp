#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "mtdtl/arch/strategy.hpp"
#include "mtdtl/core/csv.hpp"
#include "mtdtl/core/error.hpp"
#include "mtdtl/core/random.hpp"

namespace mtdtl::design {

inline constexpr std::size_t kSources = 8;
inline constexpr std::size_t kFactors = kSources + 2;  // strategy, one flag per source, n
inline constexpr std::size_t kMaxLevels = kSources + 1;

struct ExperimentalRun {
  arch::Strategy strategy = arch::Strategy::ssr;
  std::array<bool, kSources> flags{};

  std::size_t n() const {
    std::size_t c = 0;
    for (bool f : flags) c += f;
    return c;
  }
  std::vector<std::string> sources() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < kSources; ++i)
      if (flags[i]) out.push_back(arch::all_sources()[i]);
    return out;
  }
  void validate() const {
    const auto k = n();
    if (strategy == arch::Strategy::ssr)
      require(k == 1, "design: ss-r runs use exactly one source");
    else
      require(k >= 2 && k <= kSources, "design: multi-source runs use 2 to 8 sources");
  }
  bool operator==(const ExperimentalRun&) const = default;
};

inline std::size_t strategy_level(arch::Strategy s) {
  for (std::size_t i = 0; i < arch::kAllStrategies.size(); ++i)
    if (arch::kAllStrategies[i] == s) return i;
  throw InvalidArgument("design: unknown strategy");
}

/// Level of factor f: 0 strategy, 1..8 source flags, 9 number of sources.
inline std::size_t level(const ExperimentalRun& r, std::size_t f) {
  if (f == 0) return strategy_level(r.strategy);
  if (f <= kSources) return r.flags[f - 1] ? 1 : 0;
  return r.n();
}

inline ExperimentalRun run_from_mask(arch::Strategy s, unsigned mask) {
  ExperimentalRun r;
  r.strategy = s;
  for (std::size_t i = 0; i < kSources; ++i) r.flags[i] = (mask >> i) & 1u;
  return r;
}

struct Pools {
  std::vector<ExperimentalRun> phase1;  // one ss-r cell per source
  std::vector<ExperimentalRun> phase2;  // every multi-source strategy on all sources
  std::vector<ExperimentalRun> phase3;  // multi-source strategies on 2..7 sources
};

inline std::vector<arch::Strategy> multi_source_strategies() {
  std::vector<arch::Strategy> out;
  for (auto s : arch::kAllStrategies)
    if (s != arch::Strategy::ssr) out.push_back(s);
  return out;
}

inline Pools enumerate_pool() {
  Pools p;
  for (std::size_t i = 0; i < kSources; ++i) p.phase1.push_back(run_from_mask(arch::Strategy::ssr, 1u << i));
  const unsigned full = (1u << kSources) - 1;
  for (auto s : multi_source_strategies()) {
    p.phase2.push_back(run_from_mask(s, full));
    for (unsigned m = 1; m < full; ++m) {
      auto r = run_from_mask(s, m);
      if (r.n() >= 2) p.phase3.push_back(r);
    }
  }
  return p;
}

using LevelCounts = std::array<std::array<std::size_t, kMaxLevels>, kFactors>;

inline void add_counts(LevelCounts& c, const ExperimentalRun& r, long sign = 1) {
  for (std::size_t f = 0; f < kFactors; ++f) c[f][level(r, f)] += static_cast<std::size_t>(sign);
}

/// Max over factors of (max - min) level count. With `available`, only levels that still occur there count
/// (others are exhausted); without it, only levels present in the design.
inline std::size_t unbalance_from_counts(const LevelCounts& design, const LevelCounts* available) {
  std::size_t worst = 0;
  for (std::size_t f = 0; f < kFactors; ++f) {
    std::size_t lo = std::numeric_limits<std::size_t>::max(), hi = 0;
    bool any = false;
    for (std::size_t l = 0; l < kMaxLevels; ++l) {
      const bool live = available ? (*available)[f][l] > 0 : design[f][l] > 0;
      if (!live) continue;
      any = true;
      lo = std::min(lo, design[f][l]);
      hi = std::max(hi, design[f][l]);
    }
    if (any) worst = std::max(worst, hi - lo);
  }
  return worst;
}

inline std::array<std::size_t, kFactors> factor_unbalances(const std::vector<ExperimentalRun>& design) {
  std::array<std::size_t, kFactors> out{};
  LevelCounts d{};
  for (const auto& r : design) add_counts(d, r);
  for (std::size_t f = 0; f < kFactors; ++f) {
    LevelCounts one{};
    one[f] = d[f];
    out[f] = unbalance_from_counts(one, nullptr);
  }
  return out;
}

inline std::size_t unbalance(const std::vector<ExperimentalRun>& design,
                             const std::vector<ExperimentalRun>* remaining = nullptr) {
  LevelCounts d{}, a{};
  for (const auto& r : design) add_counts(d, r);
  if (!remaining) return unbalance_from_counts(d, nullptr);
  for (const auto& r : *remaining) add_counts(a, r);
  return unbalance_from_counts(d, &a);
}

enum class AliasMode { all_runs, phase3_only };

/// Coded main-effect columns: deviation contrasts for strategy, +-1 source flags, n.
struct Coding {
  AliasMode mode = AliasMode::all_runs;
  std::vector<arch::Strategy> levels;
  std::vector<std::string> names;
  std::vector<std::size_t> factor;  // owning factor of each column

  explicit Coding(AliasMode m) : mode(m) {
    for (auto s : arch::kAllStrategies)
      if (m == AliasMode::all_runs || s != arch::Strategy::ssr) levels.push_back(s);
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
      names.push_back("strategy[" + arch::strategy_name(levels[i]) + "]");
      factor.push_back(0);
    }
    for (std::size_t i = 0; i < kSources; ++i) {
      names.push_back(arch::all_sources()[i]);
      factor.push_back(1 + i);
    }
    names.push_back("n");
    factor.push_back(kFactors - 1);
  }
  std::size_t columns() const { return names.size(); }
  bool uses(const ExperimentalRun& r) const { return mode == AliasMode::all_runs || r.strategy != arch::Strategy::ssr; }

  void code(const ExperimentalRun& r, double* out) const {
    std::size_t k = 0;
    std::size_t lv = levels.size();
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i] == r.strategy) lv = i;
    require(lv < levels.size(), "design: strategy outside the coded levels");
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) out[k++] = lv == i ? 1.0 : (lv + 1 == levels.size() ? -1.0 : 0.0);
    for (bool f : r.flags) out[k++] = f ? 1.0 : -1.0;
    out[k] = static_cast<double>(r.n());
  }
  /// Pairs entering the max-alias summary: different factors, excluding n against a flag since n is their sum.
  bool counted(std::size_t i, std::size_t j) const {
    const auto a = factor[i], b = factor[j];
    if (a == b) return false;
    const auto n = kFactors - 1;
    return !((a == n && b <= kSources && b >= 1) || (b == n && a <= kSources && a >= 1));
  }
};

struct AliasResult {
  std::vector<std::string> names;
  Eigen::MatrixXd alias;  // |correlation| between centred coded columns, NaN for excluded columns
  std::vector<std::string> excluded;
  double max_alias = 0.0;
};

/// Running first and second moments of the coded columns.
struct AliasMoments {
  std::size_t count = 0;
  Eigen::VectorXd sum;
  Eigen::MatrixXd cross;

  explicit AliasMoments(std::size_t k = 0) : sum(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k))),
                                             cross(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))) {}
  void add(const Eigen::VectorXd& x) {
    ++count;
    sum += x;
    cross.noalias() += x * x.transpose();
  }
};

inline constexpr double kConstantColumn = 1e-12;

/// Max |correlation| over counted pairs of the moments plus an optional extra row.
inline double max_alias_from_moments(const AliasMoments& m, const Coding& coding, const Eigen::VectorXd* extra) {
  const std::size_t N = m.count + (extra ? 1 : 0);
  if (N < 2) return 0.0;
  const auto k = static_cast<Eigen::Index>(coding.columns());
  const double inv = 1.0 / static_cast<double>(N);
  Eigen::VectorXd s = m.sum;
  if (extra) s += *extra;
  auto cov = [&](Eigen::Index i, Eigen::Index j) {
    double c = m.cross(i, j) + (extra ? (*extra)[i] * (*extra)[j] : 0.0);
    return c * inv - s[i] * s[j] * inv * inv;
  };
  Eigen::VectorXd var(k);
  for (Eigen::Index i = 0; i < k; ++i) var[i] = cov(i, i);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (var[i] <= kConstantColumn) continue;
    for (Eigen::Index j = i + 1; j < k; ++j) {
      if (var[j] <= kConstantColumn || !coding.counted(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) continue;
      worst = std::max(worst, std::min(1.0, std::abs(cov(i, j)) / std::sqrt(var[i] * var[j])));
    }
  }
  return worst;
}

inline AliasResult alias_matrix(const std::vector<ExperimentalRun>& design, AliasMode mode = AliasMode::all_runs) {
  const Coding coding(mode);
  const auto k = static_cast<Eigen::Index>(coding.columns());
  std::vector<Eigen::VectorXd> rows;
  for (const auto& r : design)
    if (coding.uses(r)) {
      Eigen::VectorXd x(k);
      coding.code(r, x.data());
      rows.push_back(std::move(x));
    }
  require(rows.size() >= 2, "alias: design needs at least two runs");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
  const Eigen::VectorXd ss = Xc.colwise().squaredNorm().transpose() / static_cast<double>(rows.size());
  AliasResult out;
  out.names = coding.names;
  out.alias = Eigen::MatrixXd::Constant(k, k, std::nan(""));
  for (Eigen::Index i = 0; i < k; ++i)
    if (ss[i] <= kConstantColumn) out.excluded.push_back(coding.names[static_cast<std::size_t>(i)]);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (ss[i] <= kConstantColumn) continue;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (ss[j] <= kConstantColumn) continue;
      const double a = i == j ? 1.0 : std::min(1.0, std::abs(Xc.col(i).dot(Xc.col(j))) /
                                                        (static_cast<double>(rows.size()) * std::sqrt(ss[i] * ss[j])));
      out.alias(i, j) = a;
      if (i < j && coding.counted(static_cast<std::size_t>(i), static_cast<std::size_t>(j)))
        out.max_alias = std::max(out.max_alias, a);
    }
  }
  return out;
}

inline constexpr double kAliasTie = 1e-12;

class DesignState {
 public:
  DesignState(std::vector<ExperimentalRun> pool, std::vector<ExperimentalRun> executed = {},
              AliasMode mode = AliasMode::all_runs)
      : pool_(std::move(pool)), remaining_(pool_.size(), 1), coding_(mode), moments_(coding_.columns()) {
    for (const auto& r : pool_) {
      r.validate();
      add_counts(available_, r);
    }
    for (auto& r : executed) record(r);
  }

  const std::vector<ExperimentalRun>& pool() const { return pool_; }
  const std::vector<ExperimentalRun>& executed() const { return executed_; }
  bool is_remaining(std::size_t i) const { return remaining_.at(i) != 0; }
  std::size_t remaining_count() const {
    std::size_t c = 0;
    for (char r : remaining_) c += r;
    return c;
  }

  std::size_t unbalance_with(std::size_t i) const {
    LevelCounts d = executed_counts_, a = available_;
    add_counts(d, pool_[i]);
    add_counts(a, pool_[i], -1);
    return unbalance_from_counts(d, &a);
  }
  double max_alias_with(std::size_t i) const {
    if (!coding_.uses(pool_[i])) return max_alias_from_moments(moments_, coding_, nullptr);
    Eigen::VectorXd x(static_cast<Eigen::Index>(coding_.columns()));
    coding_.code(pool_[i], x.data());
    return max_alias_from_moments(moments_, coding_, &x);
  }

  /// Indices of remaining runs with minimal augmented unbalance, then minimal augmented max alias.
  std::vector<std::size_t> candidates() const {
    std::vector<std::size_t> O;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < pool_.size(); ++i) {
      if (!remaining_[i]) continue;
      const auto u = unbalance_with(i);
      if (u < best) {
        best = u;
        O.clear();
      }
      if (u == best) O.push_back(i);
    }
    require(!O.empty(), "design: no remaining runs in the pool");
    std::vector<double> alias(O.size());
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < O.size(); ++j) lo = std::min(lo, alias[j] = max_alias_with(O[j]));
    std::vector<std::size_t> P;
    for (std::size_t j = 0; j < O.size(); ++j)
      if (alias[j] <= lo + kAliasTie) P.push_back(O[j]);
    return P;
  }

  /// Executes one greedy step and returns the chosen pool index.
  std::size_t next_run(Rng& rng) {
    const auto P = candidates();
    const auto pick = P[uniform_index(rng, P.size())];
    remaining_[pick] = 0;
    add_counts(available_, pool_[pick], -1);
    record(pool_[pick]);
    return pick;
  }

 private:
  void record(const ExperimentalRun& r) {
    executed_.push_back(r);
    add_counts(executed_counts_, r);
    if (coding_.uses(r)) {
      Eigen::VectorXd x(static_cast<Eigen::Index>(coding_.columns()));
      coding_.code(r, x.data());
      moments_.add(x);
    }
  }

  std::vector<ExperimentalRun> pool_;
  std::vector<char> remaining_;
  std::vector<ExperimentalRun> executed_;
  LevelCounts executed_counts_{}, available_{};
  Coding coding_;
  AliasMoments moments_;
};

struct DesignRow {
  std::string run_id;
  ExperimentalRun run;
  int phase = 1;
  std::uint64_t seed = 0;
};

struct DesignConfig {
  std::size_t phase1_replicates = 6;
  std::size_t phase2_replicates = 5;
  std::size_t budget = 352;
  std::uint64_t seed = 0;
  AliasMode mode = AliasMode::all_runs;
};

inline std::string run_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "r%04zu", i + 1);
  return buf;
}

inline std::vector<DesignRow> generate_full_design(const DesignConfig& cfg) {
  const auto pools = enumerate_pool();
  require(cfg.budget <= pools.phase3.size(),
          "design: budget " + std::to_string(cfg.budget) + " exceeds the " + std::to_string(pools.phase3.size()) +
              "-run pool");
  std::vector<DesignRow> rows;
  auto push = [&](const ExperimentalRun& r, int phase) {
    rows.push_back({run_id(rows.size()), r, phase, derive_seed(cfg.seed, rows.size() + 1)});
  };
  for (std::size_t rep = 0; rep < cfg.phase1_replicates; ++rep)
    for (const auto& r : pools.phase1) push(r, 1);
  for (std::size_t rep = 0; rep < cfg.phase2_replicates; ++rep)
    for (const auto& r : pools.phase2) push(r, 2);
  std::vector<ExperimentalRun> done;
  for (const auto& r : rows) done.push_back(r.run);
  DesignState state(pools.phase3, done, cfg.mode);
  Rng rng(derive_seed(cfg.seed, 0x677265656479));
  for (std::size_t i = 0; i < cfg.budget; ++i) push(pools.phase3[state.next_run(rng)], 3);
  return rows;
}

inline std::vector<ExperimentalRun> runs_of(const std::vector<DesignRow>& rows) {
  std::vector<ExperimentalRun> out;
  for (const auto& r : rows) out.push_back(r.run);
  return out;
}

inline std::vector<std::string> design_header() {
  std::vector<std::string> h{"run_id", "strategy"};
  for (const auto& s : arch::all_sources()) h.push_back(s);
  for (const char* c : {"n", "phase", "seed"}) h.push_back(c);
  return h;
}

inline void write_design_csv(const std::filesystem::path& path, const std::vector<DesignRow>& rows) {
  io::CsvTable t{design_header(), {}};
  for (const auto& r : rows) {
    std::vector<std::string> cells{r.run_id, arch::strategy_name(r.run.strategy)};
    for (bool f : r.run.flags) cells.push_back(f ? "1" : "0");
    cells.push_back(std::to_string(r.run.n()));
    cells.push_back(std::to_string(r.phase));
    cells.push_back(std::to_string(r.seed));
    t.rows.push_back(std::move(cells));
  }
  io::write_csv(path, t);
}

inline std::vector<DesignRow> read_design_csv(const std::filesystem::path& path) {
  const auto t = io::read_csv(path, design_header());
  std::vector<DesignRow> rows;
  for (const auto& c : t.rows) {
    DesignRow r;
    r.run_id = c[0];
    r.run.strategy = arch::parse_strategy(c[1]);
    for (std::size_t i = 0; i < kSources; ++i) {
      require(c[2 + i] == "0" || c[2 + i] == "1", "design csv: source flags must be 0 or 1");
      r.run.flags[i] = c[2 + i] == "1";
    }
    r.run.validate();
    require(std::stoul(c[10]) == r.run.n(), "design csv: n disagrees with the source flags in " + r.run_id);
    r.phase = std::stoi(c[11]);
    r.seed = std::stoull(c[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

} // namespace mtdtl::design
