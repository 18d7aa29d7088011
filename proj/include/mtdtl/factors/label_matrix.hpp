#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtdtl/core/csv.hpp"
#include "mtdtl/core/error.hpp"

namespace mtdtl::factors {

struct Entry {
  std::size_t col;
  double value;
};

/// Sparse non-negative item x term matrix in CSR form.
struct LabelMatrix {
  std::vector<std::string> item_ids, term_ids;
  std::vector<std::size_t> row_ptr{0};
  std::vector<Entry> entries;

  std::size_t rows() const { return row_ptr.size() - 1; }
  std::size_t cols() const { return term_ids.size(); }
  std::size_t nnz() const { return entries.size(); }

  std::span<const Entry> row(std::size_t r) const {
    return {entries.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }

  double row_total(std::size_t r) const {
    double s = 0.0;
    for (const auto& e : row(r)) s += e.value;
    return s;
  }

  std::size_t item_index(const std::string& id) const {
    const auto it = std::find(item_ids.begin(), item_ids.end(), id);
    if (it == item_ids.end()) throw InvalidArgument("unknown item '" + id + "'");
    return static_cast<std::size_t>(it - item_ids.begin());
  }

  void validate() const {
    require(row_ptr.size() == item_ids.size() + 1 && row_ptr.back() == entries.size(), "label matrix is malformed");
    for (const auto& e : entries) {
      require(e.col < cols(), "label matrix column out of range");
      require(std::isfinite(e.value) && e.value >= 0.0, "label matrix entries must be finite and non-negative");
    }
  }
};

struct Triplet {
  std::string item, term;
  double count;
};

/// Items and terms are indexed in order of first appearance; duplicate pairs are summed.
inline LabelMatrix from_triplets(const std::vector<Triplet>& triplets) {
  std::map<std::string, std::size_t> item_index, term_index;
  LabelMatrix m;
  m.row_ptr.clear();
  std::vector<std::map<std::size_t, double>> rows;
  for (const auto& t : triplets) {
    require(std::isfinite(t.count) && t.count >= 0.0, "label count must be non-negative: " + t.item + "," + t.term);
    auto [it, fresh] = item_index.emplace(t.item, m.item_ids.size());
    if (fresh) {
      m.item_ids.push_back(t.item);
      rows.emplace_back();
    }
    auto [jt, fresh_term] = term_index.emplace(t.term, m.term_ids.size());
    if (fresh_term) m.term_ids.push_back(t.term);
    rows[it->second][jt->second] += t.count;
  }
  m.row_ptr.push_back(0);
  for (const auto& r : rows) {
    for (const auto& [c, v] : r)
      if (v > 0.0) m.entries.push_back({c, v});
    m.row_ptr.push_back(m.entries.size());
  }
  return m;
}

inline LabelMatrix read_triplets_csv(const std::filesystem::path& path) {
  const auto t = io::read_csv(path, {"item_id", "term_id", "count"});
  std::vector<Triplet> trips;
  trips.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    char* end = nullptr;
    const double v = std::strtod(r[2].c_str(), &end);
    if (end == r[2].c_str() || *end != '\0') throw IoError(path.string() + ": bad count '" + r[2] + "'");
    trips.push_back({r[0], r[1], v});
  }
  return from_triplets(trips);
}

inline void write_triplets_csv(const std::filesystem::path& path, const LabelMatrix& m) {
  io::CsvTable t{{"item_id", "term_id", "count"}, {}};
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (const auto& e : m.row(r)) t.rows.push_back({m.item_ids[r], m.term_ids[e.col], io::fmt_real(e.value)});
  io::write_csv(path, t);
}

/// tf * log(N / df); a term present in every row gets weight 0 and is dropped from storage.
inline LabelMatrix tfidf(const LabelMatrix& m) {
  m.validate();
  require(m.rows() > 0 && m.nnz() > 0, "tfidf: empty matrix");
  std::vector<std::size_t> df(m.cols(), 0);
  for (const auto& e : m.entries) ++df[e.col];
  const double N = static_cast<double>(m.rows());
  LabelMatrix out;
  out.item_ids = m.item_ids;
  out.term_ids = m.term_ids;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (const auto& e : m.row(r)) {
      const double w = e.value * std::log(N / static_cast<double>(df[e.col]));
      if (w > 0.0) out.entries.push_back({e.col, w});
    }
    out.row_ptr.push_back(out.entries.size());
  }
  return out;
}

/// Dense value lookup, mostly for tests and small tables.
inline double value_at(const LabelMatrix& m, std::size_t r, std::size_t c) {
  for (const auto& e : m.row(r))
    if (e.col == c) return e.value;
  return 0.0;
}

} // namespace mtdtl::factors
