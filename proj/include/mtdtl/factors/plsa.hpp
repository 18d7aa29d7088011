#pragma once

#include <cmath>
#include <vector>

#include "mtdtl/core/random.hpp"
#include "mtdtl/factors/label_matrix.hpp"

namespace mtdtl::factors {

struct PlsaModel {
  std::size_t k = 0;
  std::vector<std::vector<double>> topic_given_doc;   // docs x k
  std::vector<std::vector<double>> term_given_topic;  // k x terms
  std::vector<double> log_likelihood;                 // after init, then after every iteration
  double final_log_likelihood() const { return log_likelihood.empty() ? 0.0 : log_likelihood.back(); }
};

namespace detail {

inline void normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  if (s > 0)
    for (auto& x : v) x /= s;
}

inline double plsa_log_likelihood(const LabelMatrix& m, const PlsaModel& p) {
  double ll = 0.0;
  for (std::size_t d = 0; d < m.rows(); ++d)
    for (const auto& e : m.row(d)) {
      double s = 0.0;
      for (std::size_t z = 0; z < p.k; ++z) s += p.topic_given_doc[d][z] * p.term_given_topic[z][e.col];
      ll += e.value * std::log(s);
    }
  return ll;
}

}  // namespace detail

/// EM for pLSA, fixed iteration count, seeded uniform initialisation.
inline PlsaModel plsa_fit(const LabelMatrix& m, std::size_t k, std::size_t iters = 200, std::uint64_t seed = 0) {
  m.validate();
  require(k >= 1, "plsa: k must be positive");
  require(iters >= 1, "plsa: iteration count must be positive");
  require(k <= m.cols(), "plsa: k=" + std::to_string(k) + " exceeds the number of terms (" +
                             std::to_string(m.cols()) + ")");
  for (std::size_t d = 0; d < m.rows(); ++d)
    require(m.row_total(d) > 0.0, "plsa: item '" + m.item_ids[d] + "' has an all-zero label row");

  Rng rng(seed);
  PlsaModel p;
  p.k = k;
  p.topic_given_doc.assign(m.rows(), std::vector<double>(k));
  p.term_given_topic.assign(k, std::vector<double>(m.cols()));
  for (auto& row : p.topic_given_doc) {
    for (auto& v : row) v = 0.5 + uniform01(rng);
    detail::normalize(row);
  }
  for (auto& row : p.term_given_topic) {
    for (auto& v : row) v = 0.5 + uniform01(rng);
    detail::normalize(row);
  }
  p.log_likelihood.push_back(detail::plsa_log_likelihood(m, p));

  std::vector<double> post(k);
  std::vector<std::vector<double>> tw(k, std::vector<double>(m.cols()));
  for (std::size_t it = 0; it < iters; ++it) {
    for (auto& row : tw) std::fill(row.begin(), row.end(), 0.0);
    std::vector<std::vector<double>> td(m.rows(), std::vector<double>(k, 0.0));
    for (std::size_t d = 0; d < m.rows(); ++d)
      for (const auto& e : m.row(d)) {
        double s = 0.0;
        for (std::size_t z = 0; z < k; ++z) s += post[z] = p.topic_given_doc[d][z] * p.term_given_topic[z][e.col];
        for (std::size_t z = 0; z < k; ++z) {
          const double r = e.value * post[z] / s;
          tw[z][e.col] += r;
          td[d][z] += r;
        }
      }
    for (std::size_t z = 0; z < k; ++z) {
      p.term_given_topic[z] = tw[z];
      double s = 0.0;
      for (double v : tw[z]) s += v;
      if (s > 0.0) {
        for (auto& v : p.term_given_topic[z]) v /= s;
      } else {
        std::fill(p.term_given_topic[z].begin(), p.term_given_topic[z].end(), 1.0 / static_cast<double>(m.cols()));
      }
    }
    for (std::size_t d = 0; d < m.rows(); ++d) {
      p.topic_given_doc[d] = td[d];
      detail::normalize(p.topic_given_doc[d]);
    }
    p.log_likelihood.push_back(detail::plsa_log_likelihood(m, p));
  }
  return p;
}

/// Fold-in: EM over the topic mix of a new row with term tables frozen, started from uniform.
inline std::vector<double> plsa_infer(const PlsaModel& p, std::span<const Entry> row, std::size_t iters = 200) {
  double total = 0.0;
  for (const auto& e : row) {
    require(!p.term_given_topic.empty() && e.col < p.term_given_topic[0].size(), "plsa_infer: term outside vocabulary");
    require(std::isfinite(e.value) && e.value >= 0.0, "plsa_infer: counts must be non-negative");
    total += e.value;
  }
  require(total > 0.0, "plsa_infer: all-zero row");
  std::vector<double> mix(p.k, 1.0 / static_cast<double>(p.k)), acc(p.k), post(p.k);
  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& e : row) {
      if (e.value == 0.0) continue;
      double s = 0.0;
      for (std::size_t z = 0; z < p.k; ++z) s += post[z] = mix[z] * p.term_given_topic[z][e.col];
      if (s <= 0.0) continue;
      for (std::size_t z = 0; z < p.k; ++z) acc[z] += e.value * post[z] / s;
    }
    double s = 0.0;
    for (double v : acc) s += v;
    if (s <= 0.0) break;
    for (std::size_t z = 0; z < p.k; ++z) mix[z] = acc[z] / s;
  }
  return mix;
}

} // namespace mtdtl::factors
