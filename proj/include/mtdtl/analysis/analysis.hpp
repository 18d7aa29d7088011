#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mtdtl/arch/strategy.hpp"
#include "mtdtl/core/error.hpp"
#include "mtdtl/core/random.hpp"
#include "mtdtl/design/design.hpp"

namespace mtdtl::analysis {

struct Record {
  std::string run_id;
  design::ExperimentalRun run;
  std::string dataset;
  double y = 0.0;
  double y_star = 0.0;

  double n_star() const { return run.strategy == arch::Strategy::ssr ? 0.0 : static_cast<double>(run.n()) - 2.0; }
};

/// Network-size coding of the strategies.
inline double r_star(arch::Strategy s) { return arch::size_code(s); }

/// Within-dataset z-scores with the population standard deviation.
inline void standardize(std::vector<Record>& records) {
  std::map<std::string, std::vector<Record*>> by;
  for (auto& r : records) by[r.dataset].push_back(&r);
  for (auto& [name, rs] : by) {
    require(rs.size() >= 2, "standardize: dataset '" + name + "' has fewer than two records");
    double mean = 0;
    for (auto* r : rs) mean += r->y;
    mean /= static_cast<double>(rs.size());
    double ss = 0;
    for (auto* r : rs) ss += (r->y - mean) * (r->y - mean);
    const double sd = std::sqrt(ss / static_cast<double>(rs.size()));
    require(sd > 1e-12 * std::max(1.0, std::abs(mean)), "standardize: dataset '" + name + "' has zero score variance");
    for (auto* r : rs) r->y_star = (r->y - mean) / sd;
  }
}

struct Coefficient {
  std::string term;
  double estimate = 0.0, lower = 0.0, upper = 0.0;
};

struct LinearFitResult {
  std::vector<Coefficient> coefficients;
  std::size_t records = 0;
  std::size_t resamples = 0;

  const Coefficient& at(const std::string& term) const {
    for (const auto& c : coefficients)
      if (c.term == term) return c;
    throw InvalidArgument("fit: no term '" + term + "'");
  }
};

struct BootstrapConfig {
  std::size_t resamples = 2000;
  std::uint64_t seed = 0;
  double level = 0.95;
};

/// Design-matrix builder: column names plus a row filler.
struct Model {
  std::vector<std::string> terms;
  std::function<void(const Record&, double*)> fill;
};

inline Model strategy_model(const std::vector<Record>& records) {
  std::vector<arch::Strategy> present;
  for (auto s : arch::kAllStrategies)
    for (const auto& r : records)
      if (r.run.strategy == s) {
        present.push_back(s);
        break;
      }
  require(present.size() >= 2, "strategy model: needs at least two strategies");
  Model m;
  for (auto s : present) m.terms.push_back("b0[" + arch::strategy_name(s) + "]");
  std::vector<arch::Strategy> sloped;
  for (auto s : present)
    if (s != arch::Strategy::ssr) {
      sloped.push_back(s);
      m.terms.push_back("b1[" + arch::strategy_name(s) + "]");
    }
  m.fill = [present, sloped](const Record& r, double* x) {
    std::size_t k = 0;
    for (auto s : present) x[k++] = r.run.strategy == s ? 1.0 : 0.0;
    for (auto s : sloped) x[k++] = r.run.strategy == s ? r.n_star() : 0.0;
  };
  return m;
}

inline Model size_model() {
  Model m;
  m.terms = {"b0", "b10", "b20", "b30"};
  m.fill = [](const Record& r, double* x) {
    const double rs = r_star(r.run.strategy), ns = r.n_star();
    x[0] = 1.0;
    x[1] = rs;
    x[2] = ns;
    x[3] = rs * ns;
  };
  return m;
}

/// OLS on y*; nullopt-like empty vector when rank deficient, names of aliased columns in `aliased`.
inline Eigen::VectorXd ols(const Model& m, const std::vector<const Record*>& rows, std::vector<std::string>* aliased) {
  const auto k = static_cast<Eigen::Index>(m.terms.size());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), k);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::VectorXd x(k);
    m.fill(*rows[i], x.data());
    X.row(static_cast<Eigen::Index>(i)) = x.transpose();
    y[static_cast<Eigen::Index>(i)] = rows[i]->y_star;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    if (aliased)
      for (Eigen::Index j = qr.rank(); j < k; ++j) aliased->push_back(m.terms[static_cast<std::size_t>(qr.colsPermutation().indices()[j])]);
    return {};
  }
  return qr.solve(y);
}

inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// OLS estimates with percentile intervals from resampling whole runs, so each resample keeps every
/// dataset's records of a drawn run together.
inline LinearFitResult fit_with_bootstrap(const Model& m, const std::vector<Record>& records, const BootstrapConfig& cfg) {
  require(!records.empty(), "fit: no records");
  require(cfg.resamples >= 2 && cfg.level > 0 && cfg.level < 1, "fit: invalid bootstrap settings");
  std::map<std::string, std::vector<const Record*>> runs;
  for (const auto& r : records) runs[r.run_id].push_back(&r);
  std::vector<const std::vector<const Record*>*> clusters;
  for (const auto& [id, rs] : runs) clusters.push_back(&rs);
  std::vector<const Record*> all;
  for (const auto* c : clusters) all.insert(all.end(), c->begin(), c->end());

  std::vector<std::string> aliased;
  const auto est = ols(m, all, &aliased);
  if (est.size() == 0) {
    std::string names;
    for (const auto& a : aliased) names += (names.empty() ? "" : ", ") + a;
    throw InvalidArgument("fit: rank deficient model, aliased columns: " + names);
  }
  Rng rng(derive_seed(cfg.seed, 0x626f6f74));
  std::vector<std::vector<double>> draws(m.terms.size());
  std::size_t attempts = 0;
  for (std::size_t b = 0; b < cfg.resamples;) {
    require(++attempts <= 10 * cfg.resamples, "fit: too many rank-deficient bootstrap resamples");
    std::vector<const Record*> rows;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      const auto* c = clusters[uniform_index(rng, clusters.size())];
      rows.insert(rows.end(), c->begin(), c->end());
    }
    const auto beta = ols(m, rows, nullptr);
    if (beta.size() == 0) continue;
    for (std::size_t j = 0; j < m.terms.size(); ++j) draws[j].push_back(beta[static_cast<Eigen::Index>(j)]);
    ++b;
  }
  LinearFitResult out;
  out.records = all.size();
  out.resamples = cfg.resamples;
  const double tail = (1.0 - cfg.level) / 2.0;
  for (std::size_t j = 0; j < m.terms.size(); ++j)
    out.coefficients.push_back({m.terms[j], est[static_cast<Eigen::Index>(j)], quantile(draws[j], tail),
                                quantile(draws[j], 1.0 - tail)});
  return out;
}

inline LinearFitResult fit_strategy_model(const std::vector<Record>& records, const BootstrapConfig& cfg = {}) {
  return fit_with_bootstrap(strategy_model(records), records, cfg);
}

inline LinearFitResult fit_size_model(const std::vector<Record>& records, const BootstrapConfig& cfg = {}) {
  return fit_with_bootstrap(size_model(), records, cfg);
}

struct VarianceComponent {
  std::string dataset;
  std::string source;
  double percent = std::nan("");  // NaN when the source is always present or always absent
  bool largest = false;
};

/// One-way method-of-moments component of a source's presence flag, as percent of component plus residual.
inline double one_way_component(const std::vector<double>& on, const std::vector<double>& off) {
  if (on.empty() || off.empty()) return std::nan("");
  const double N = static_cast<double>(on.size() + off.size());
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double m1 = mean(on), m0 = mean(off);
  const double grand = (m1 * static_cast<double>(on.size()) + m0 * static_cast<double>(off.size())) / N;
  const double ssb = static_cast<double>(on.size()) * (m1 - grand) * (m1 - grand) +
                     static_cast<double>(off.size()) * (m0 - grand) * (m0 - grand);
  double ssw = 0;
  for (double x : on) ssw += (x - m1) * (x - m1);
  for (double x : off) ssw += (x - m0) * (x - m0);
  if (N <= 2) return std::nan("");
  const double msb = ssb, msw = ssw / (N - 2.0);
  const double n0 = N - (static_cast<double>(on.size() * on.size()) + static_cast<double>(off.size() * off.size())) / N;
  const double comp = std::max(0.0, (msb - msw) / n0);
  if (comp + msw <= 0) return 0.0;
  return 100.0 * comp / (comp + msw);
}

inline std::vector<VarianceComponent> variance_components(const std::vector<Record>& records) {
  std::map<std::string, std::vector<const Record*>> by;
  for (const auto& r : records)
    if (r.run.strategy != arch::Strategy::ssr) by[r.dataset].push_back(&r);
  std::vector<VarianceComponent> out;
  for (const auto& [name, rs] : by) {
    const auto first = out.size();
    for (std::size_t s = 0; s < design::kSources; ++s) {
      std::vector<double> on, off;
      for (const auto* r : rs) (r->run.flags[s] ? on : off).push_back(r->y_star);
      out.push_back({name, arch::all_sources()[s], one_way_component(on, off), false});
    }
    std::size_t best = out.size();
    for (std::size_t i = first; i < out.size(); ++i)
      if (!std::isnan(out[i].percent) && (best == out.size() || out[i].percent > out[best].percent)) best = i;
    if (best < out.size()) out[best].largest = true;
  }
  return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "pearson: length mismatch");
  if (a.size() < 3) return std::nan("");
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

/// Correlation over (dataset, source) pairs between the source's mean ss-r y* and its variance component.
inline double ssr_component_correlation(const std::vector<Record>& records, const std::vector<VarianceComponent>& vc) {
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> ssr;
  for (const auto& r : records)
    if (r.run.strategy == arch::Strategy::ssr) {
      auto& e = ssr[{r.dataset, r.run.sources().front()}];
      e.first += r.y_star;
      ++e.second;
    }
  std::vector<double> a, b;
  for (const auto& c : vc) {
    const auto it = ssr.find({c.dataset, c.source});
    if (it == ssr.end() || std::isnan(c.percent)) continue;
    a.push_back(it->second.first / static_cast<double>(it->second.second));
    b.push_back(c.percent);
  }
  return pearson(a, b);
}

} // namespace mtdtl::analysis
