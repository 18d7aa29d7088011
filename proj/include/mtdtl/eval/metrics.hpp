#pragma once

#include <cmath>
#include <vector>

#include "mtdtl/core/error.hpp"

namespace mtdtl::eval {

inline double accuracy(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  require(pred.size() == truth.size() && !truth.empty(), "accuracy: length mismatch or empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

inline double r_squared(const std::vector<double>& pred, const std::vector<double>& truth) {
  require(pred.size() == truth.size() && !truth.empty(), "r_squared: length mismatch or empty input");
  double mean = 0;
  for (double v : truth) mean += v;
  mean /= static_cast<double>(truth.size());
  double res = 0, tot = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    tot += (truth[i] - mean) * (truth[i] - mean);
  }
  require(tot > 0, "r_squared: truth has zero variance");
  return 1.0 - res / tot;
}

/// Binary-relevance nDCG over the first k positions of `ranking`. Returns NaN for an empty relevant set.
inline double ndcg_at_k(const std::vector<std::size_t>& ranking, const std::vector<char>& relevant, std::size_t k) {
  require(k >= 1, "ndcg: k must be positive");
  std::size_t total = 0;
  for (char r : relevant) total += r != 0;
  if (total == 0) return std::nan("");
  double dcg = 0, ideal = 0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i)
    if (relevant.at(ranking[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  for (std::size_t i = 0; i < std::min(k, total); ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / ideal;
}

} // namespace mtdtl::eval
