#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "mtdtl/core/random.hpp"
#include "mtdtl/core/error.hpp"

namespace mtdtl::factors {

struct GmmModel {
  std::vector<double> weight, mean, variance;
  double variance_floor = 0.0;
  std::vector<double> log_likelihood;  // after init, then after every iteration
  std::size_t k() const { return weight.size(); }
  double final_log_likelihood() const { return log_likelihood.empty() ? 0.0 : log_likelihood.back(); }
};

namespace detail {

inline double log_normal(double x, double mean, double var) {
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + (x - mean) * (x - mean) / var);
}

/// log sum_j w_j N(x; mu_j, var_j) and the normalised responsibilities.
inline double gmm_responsibilities(const GmmModel& g, double x, std::vector<double>& resp) {
  resp.resize(g.k());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < g.k(); ++j) {
    resp[j] = g.weight[j] > 0 ? std::log(g.weight[j]) + log_normal(x, g.mean[j], g.variance[j])
                              : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, resp[j]);
  }
  double s = 0.0;
  for (auto& r : resp) s += r = std::exp(r - mx);
  for (auto& r : resp) r /= s;
  return mx + std::log(s);
}

inline double gmm_log_likelihood(const GmmModel& g, const std::vector<double>& xs) {
  std::vector<double> r;
  double ll = 0.0;
  for (double x : xs) ll += gmm_responsibilities(g, x, r);
  return ll;
}

}  // namespace detail

/// 1-D mixture by EM. Means start at evenly spaced quantiles (jittered by 1e-3 sd with the seed so tied
/// quantiles separate), variances at the sample variance, uniform weights.
inline GmmModel gmm_fit(const std::vector<double>& xs, std::size_t k, std::size_t iters = 200, std::uint64_t seed = 0) {
  require(k >= 1, "gmm: k must be positive");
  require(xs.size() >= k, "gmm: fewer values (" + std::to_string(xs.size()) + ") than components (" +
                              std::to_string(k) + ")");
  for (double x : xs) require(std::isfinite(x), "gmm: values must be finite");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;
  const double base_var = var > 0 ? var : 1.0;

  GmmModel g;
  g.variance_floor = 1e-6 * base_var;
  g.weight.assign(k, 1.0 / static_cast<double>(k));
  g.variance.assign(k, std::max(base_var, g.variance_floor));
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  Rng rng(seed);
  g.mean.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double q = (static_cast<double>(j) + 0.5) / static_cast<double>(k) * (n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(q));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    g.mean[j] = sorted[lo] + (q - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    if (k > 1) g.mean[j] += 1e-3 * std::sqrt(base_var) * normal01(rng);
  }
  g.log_likelihood.push_back(detail::gmm_log_likelihood(g, xs));

  std::vector<double> r, nk(k), sx(k), sxx(k);
  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(nk.begin(), nk.end(), 0.0);
    std::fill(sx.begin(), sx.end(), 0.0);
    for (double x : xs) {
      detail::gmm_responsibilities(g, x, r);
      for (std::size_t j = 0; j < k; ++j) {
        nk[j] += r[j];
        sx[j] += r[j] * x;
      }
    }
    std::vector<double> new_mean(k);
    for (std::size_t j = 0; j < k; ++j) new_mean[j] = nk[j] > 0 ? sx[j] / nk[j] : g.mean[j];
    std::fill(sxx.begin(), sxx.end(), 0.0);
    for (double x : xs) {
      detail::gmm_responsibilities(g, x, r);
      for (std::size_t j = 0; j < k; ++j) sxx[j] += r[j] * (x - new_mean[j]) * (x - new_mean[j]);
    }
    for (std::size_t j = 0; j < k; ++j) {
      g.weight[j] = nk[j] / n;
      if (nk[j] > 0) {
        g.mean[j] = new_mean[j];
        g.variance[j] = std::max(sxx[j] / nk[j], g.variance_floor);
      }
    }
    g.log_likelihood.push_back(detail::gmm_log_likelihood(g, xs));
  }
  return g;
}

inline std::vector<double> gmm_posterior(const GmmModel& g, double x) {
  require(std::isfinite(x), "gmm_posterior: value must be finite");
  std::vector<double> r;
  detail::gmm_responsibilities(g, x, r);
  return r;
}

} // namespace mtdtl::factors
