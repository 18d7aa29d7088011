#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtdtl/core/tensor.hpp"
#include "mtdtl/factors/gmm.hpp"
#include "mtdtl/factors/label_matrix.hpp"
#include "mtdtl/factors/plsa.hpp"

namespace mtdtl::factors {

enum class Method { plsa, plsa_tfidf, gmm };

inline Method method_for(const std::string& source) {
  if (source == "self") throw InvalidArgument("factorize: 'self' is trained on pairs and has no factor labels");
  if (source == "year" || source == "bpm") return Method::gmm;
  if (source == "lyrics") return Method::plsa_tfidf;
  return Method::plsa;
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::plsa: return "plsa";
    case Method::plsa_tfidf: return "plsa+tfidf";
    case Method::gmm: return "gmm";
  }
  return "";
}

struct FactorConfig {
  std::size_t k = 50;
  std::size_t iterations = 200;
  std::uint64_t seed = 0;
};

struct FactorOutput {
  Tensor<float> z;               // tracks x k
  std::size_t uniform_rows = 0;  // tracks without usable labels, given the uniform distribution
  double log_likelihood = 0.0;
};

inline void write_row(Tensor<float>& z, std::size_t r, const std::vector<double>& p) {
  for (std::size_t j = 0; j < p.size(); ++j) z.at(r, j) = static_cast<float>(p[j]);
}

/// pLSA topic mixtures; `item_of_track[i]` names the label-matrix row for track i.
inline FactorOutput factorize_matrix(const LabelMatrix& raw, bool use_tfidf, const std::vector<std::string>& item_of_track,
                                     const FactorConfig& cfg) {
  const LabelMatrix weighted = use_tfidf ? tfidf(raw) : raw;
  LabelMatrix m;
  m.term_ids = weighted.term_ids;
  m.row_ptr = {0};
  for (std::size_t r = 0; r < weighted.rows(); ++r) {
    if (weighted.row_total(r) <= 0.0) continue;
    m.item_ids.push_back(weighted.item_ids[r]);
    for (const auto& e : weighted.row(r)) m.entries.push_back(e);
    m.row_ptr.push_back(m.entries.size());
  }
  require(m.rows() > 0, "factorize: no item has a non-empty label row");
  const auto model = plsa_fit(m, cfg.k, cfg.iterations, cfg.seed);
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < m.rows(); ++r) index.emplace(m.item_ids[r], r);
  FactorOutput out{Tensor<float>({item_of_track.size(), cfg.k}), 0, model.final_log_likelihood()};
  const std::vector<double> uniform(cfg.k, 1.0 / static_cast<double>(cfg.k));
  for (std::size_t i = 0; i < item_of_track.size(); ++i) {
    const auto it = index.find(item_of_track[i]);
    if (it == index.end()) {
      write_row(out.z, i, uniform);
      ++out.uniform_rows;
    } else {
      write_row(out.z, i, model.topic_given_doc[it->second]);
    }
  }
  return out;
}

/// GMM component posteriors of a scalar label per track.
inline FactorOutput factorize_scalars(const std::map<std::string, double>& values,
                                      const std::vector<std::string>& item_of_track, const FactorConfig& cfg) {
  std::vector<double> xs;
  for (const auto& id : item_of_track)
    if (const auto it = values.find(id); it != values.end()) xs.push_back(it->second);
  const auto g = gmm_fit(xs, cfg.k, cfg.iterations, cfg.seed);
  FactorOutput out{Tensor<float>({item_of_track.size(), cfg.k}), 0, g.final_log_likelihood()};
  const std::vector<double> uniform(cfg.k, 1.0 / static_cast<double>(cfg.k));
  for (std::size_t i = 0; i < item_of_track.size(); ++i) {
    const auto it = values.find(item_of_track[i]);
    if (it == values.end()) {
      write_row(out.z, i, uniform);
      ++out.uniform_rows;
    } else {
      write_row(out.z, i, gmm_posterior(g, it->second));
    }
  }
  return out;
}

} // namespace mtdtl::factors
