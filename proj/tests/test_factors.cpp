#include <gtest/gtest.h>

#include <filesystem>

#include "mtdtl/factors/gmm.hpp"
#include "mtdtl/factors/label_matrix.hpp"
#include "mtdtl/factors/plsa.hpp"

using namespace mtdtl;
using namespace mtdtl::factors;

namespace {

LabelMatrix random_matrix(std::size_t docs, std::size_t terms, Rng& rng) {
  std::vector<Triplet> t;
  for (std::size_t d = 0; d < docs; ++d) {
    t.push_back({"d" + std::to_string(d), "w" + std::to_string(uniform_index(rng, terms)), 1.0});
    for (std::size_t w = 0; w < terms; ++w)
      if (uniform01(rng) < 0.3) t.push_back({"d" + std::to_string(d), "w" + std::to_string(w), 1.0 + uniform_index(rng, 5)});
  }
  for (std::size_t w = 0; w < terms; ++w) t.push_back({"d0", "w" + std::to_string(w), 1.0});
  return from_triplets(t);
}

double row_sum(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST(LabelMatrix, TripletsRoundTripThroughCsv) {
  const auto m = from_triplets({{"a", "x", 2}, {"b", "y", 1}, {"a", "y", 3}, {"a", "x", 1}});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 2u);
  EXPECT_DOUBLE_EQ(value_at(m, 0, 0), 3.0);
  const auto path = std::filesystem::temp_directory_path() / "mtdtl_triplets.csv";
  write_triplets_csv(path, m);
  const auto back = read_triplets_csv(path);
  EXPECT_EQ(back.item_ids, m.item_ids);
  EXPECT_DOUBLE_EQ(value_at(back, 0, 1), 3.0);
  std::filesystem::remove(path);
  EXPECT_THROW(from_triplets({{"a", "x", -1}}), InvalidArgument);
}

TEST(Tfidf, HandComputedToyTable) {
  // docs: d0 {a:2, b:1}, d1 {a:1, c:4}, d2 {a:3, b:2}
  const auto m = from_triplets({{"d0", "a", 2}, {"d0", "b", 1}, {"d1", "a", 1}, {"d1", "c", 4}, {"d2", "a", 3}, {"d2", "b", 2}});
  const auto t = tfidf(m);
  EXPECT_DOUBLE_EQ(value_at(t, 0, 0), 0.0);  // 'a' in every doc
  EXPECT_DOUBLE_EQ(value_at(t, 0, 1), 1.0 * std::log(3.0 / 2.0));
  EXPECT_DOUBLE_EQ(value_at(t, 1, 2), 4.0 * std::log(3.0));
  EXPECT_DOUBLE_EQ(value_at(t, 2, 1), 2.0 * std::log(3.0 / 2.0));
  const auto single = tfidf(from_triplets({{"d", "w", 3}}));
  EXPECT_DOUBLE_EQ(value_at(single, 0, 0), 0.0);
  EXPECT_THROW(tfidf(LabelMatrix{}), InvalidArgument);
}

TEST(Plsa, SingleTopicIsCorpusTermFrequency) {
  Rng rng(1);
  const auto m = random_matrix(12, 9, rng);
  const auto p = plsa_fit(m, 1, 5, 3);
  std::vector<double> totals(m.cols(), 0.0);
  double all = 0;
  for (const auto& e : m.entries) {
    totals[e.col] += e.value;
    all += e.value;
  }
  for (std::size_t d = 0; d < m.rows(); ++d) EXPECT_DOUBLE_EQ(p.topic_given_doc[d][0], 1.0);
  for (std::size_t w = 0; w < m.cols(); ++w) EXPECT_NEAR(p.term_given_topic[0][w], totals[w] / all, 1e-12);
  const std::vector<Entry> uniform_row{{0, 1}, {1, 1}, {2, 1}};
  EXPECT_EQ(plsa_infer(p, uniform_row), std::vector<double>{1.0});
}

TEST(Plsa, DisjointBlocksSeparate) {
  std::vector<Triplet> t;
  Rng rng(2);
  for (int d = 0; d < 20; ++d)
    for (int w = 0; w < 6; ++w)
      if (uniform01(rng) < 0.7 || w == d % 6)
        t.push_back({"d" + std::to_string(d), (d < 10 ? "a" : "b") + std::to_string(w), 1.0 + uniform_index(rng, 3)});
  const auto m = from_triplets(t);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = plsa_fit(m, 2, 200, seed);
    const std::size_t topic_a = p.topic_given_doc[0][0] > 0.5 ? 0 : 1;
    for (std::size_t d = 0; d < 20; ++d) {
      const std::size_t want = d < 10 ? topic_a : 1 - topic_a;
      EXPECT_GT(p.topic_given_doc[d][want], 0.99) << "seed " << seed << " doc " << d;
    }
    // a row made only of block-a terms folds into topic a
    const std::vector<Entry> row{{m.row(0)[0].col, 2.0}, {m.row(0)[1].col, 1.0}};
    EXPECT_GT(plsa_infer(p, row)[topic_a], 0.9);
  }
}

TEST(Plsa, FoldInOfTrainingRowMatchesItsFit) {
  Rng rng(3);
  const auto m = random_matrix(30, 15, rng);
  const auto p = plsa_fit(m, 4, 300, 1);
  for (std::size_t d = 0; d < m.rows(); d += 5) {
    const auto z = plsa_infer(p, m.row(d), 500);
    double l1 = 0;
    for (std::size_t k = 0; k < 4; ++k) l1 += std::abs(z[k] - p.topic_given_doc[d][k]);
    EXPECT_LT(l1, 0.05) << "doc " << d;
  }
}

TEST(Plsa, FiftyTopicsRowsAreDistributions) {
  Rng rng(4);
  const auto m = random_matrix(80, 120, rng);
  const auto p = plsa_fit(m, 50, 30, 9);
  for (const auto& row : p.topic_given_doc) {
    EXPECT_NEAR(row_sum(row), 1.0, 1e-9);
    for (double v : row) EXPECT_GE(v, 0.0);
  }
  for (const auto& row : p.term_given_topic) EXPECT_NEAR(row_sum(row), 1.0, 1e-9);
  EXPECT_NEAR(row_sum(plsa_infer(p, m.row(3))), 1.0, 1e-9);
}

TEST(Plsa, EmMonotoneAndReproducible) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto m = random_matrix(5 + uniform_index(rng, 10), 4 + uniform_index(rng, 8), rng);
    const std::size_t k = 1 + uniform_index(rng, 4);
    const auto p = plsa_fit(m, k, 40, seed);
    for (std::size_t i = 1; i < p.log_likelihood.size(); ++i)
      ASSERT_GE(p.log_likelihood[i] - p.log_likelihood[i - 1], -1e-9) << "seed " << seed << " iter " << i;
    const auto q = plsa_fit(m, k, 40, seed);
    EXPECT_EQ(p.log_likelihood, q.log_likelihood);
    EXPECT_EQ(p.topic_given_doc, q.topic_given_doc);
  }
}

TEST(Plsa, Errors) {
  const auto m = from_triplets({{"a", "x", 1}, {"b", "y", 1}});
  EXPECT_THROW(plsa_fit(m, 3), InvalidArgument);
  const auto zero = from_triplets({{"a", "x", 1}, {"b", "y", 0}});
  EXPECT_THROW(plsa_fit(zero, 1), InvalidArgument);
  const auto p = plsa_fit(m, 1, 2);
  EXPECT_THROW(plsa_infer(p, std::vector<Entry>{}), InvalidArgument);
}

TEST(Gmm, SingleComponentIsSampleMoments) {
  const std::vector<double> xs{1, 2, 4, 7, 11};
  const auto g = gmm_fit(xs, 1, 10);
  EXPECT_NEAR(g.mean[0], 5.0, 1e-12);
  EXPECT_NEAR(g.variance[0], (16 + 9 + 1 + 4 + 36) / 5.0, 1e-12);
  EXPECT_EQ(gmm_posterior(g, 3.0), std::vector<double>{1.0});
}

TEST(Gmm, RecoversTwoSeparatedClusters) {
  Rng rng(5);
  std::vector<double> xs;
  for (int i = 0; i < 300; ++i) xs.push_back(60 + 2 * normal01(rng));
  for (int i = 0; i < 200; ++i) xs.push_back(140 + 3 * normal01(rng));
  const auto g = gmm_fit(xs, 2, 100, 1);
  const double lo = std::min(g.mean[0], g.mean[1]), hi = std::max(g.mean[0], g.mean[1]);
  EXPECT_LT(std::abs(lo - 60) / 60, 0.05);
  EXPECT_LT(std::abs(hi - 140) / 140, 0.05);
  const std::size_t high = g.mean[0] > g.mean[1] ? 0 : 1;
  EXPECT_GT(gmm_posterior(g, hi)[high], 0.99);
}

TEST(Gmm, FiftyComponentsOnTempoValues) {
  Rng rng(6);
  std::vector<double> bpm;
  for (int i = 0; i < 1000; ++i) bpm.push_back(70 + 110 * uniform01(rng));
  const auto g = gmm_fit(bpm, 50, 50, 2);
  EXPECT_EQ(g.k(), 50u);
  EXPECT_NEAR(row_sum(g.weight), 1.0, 1e-9);
  for (double v : g.variance) EXPECT_GE(v, g.variance_floor);
  EXPECT_NEAR(row_sum(gmm_posterior(g, 100.0)), 1.0, 1e-9);
}

TEST(Gmm, SymmetricMidpoint) {
  GmmModel g;
  g.weight = {0.5, 0.5};
  g.mean = {-2, 2};
  g.variance = {1.5, 1.5};
  const auto r = gmm_posterior(g, 0.0);
  EXPECT_NEAR(r[0], 0.5, 1e-9);
  EXPECT_NEAR(r[1], 0.5, 1e-9);
}

TEST(Gmm, EmMonotoneAndReproducible) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 1000);
    std::vector<double> xs(10 + uniform_index(rng, 60));
    for (auto& x : xs) x = 10 * normal01(rng) + (uniform01(rng) < 0.5 ? 30 : 0);
    const std::size_t k = 1 + uniform_index(rng, 6);
    const auto g = gmm_fit(xs, k, 60, seed);
    for (std::size_t i = 1; i < g.log_likelihood.size(); ++i)
      ASSERT_GE(g.log_likelihood[i] - g.log_likelihood[i - 1], -1e-9) << "seed " << seed << " iter " << i;
    EXPECT_EQ(gmm_fit(xs, k, 60, seed).log_likelihood, g.log_likelihood);
    EXPECT_NEAR(row_sum(g.weight), 1.0, 1e-9);
  }
  EXPECT_THROW(gmm_fit({1.0}, 2), InvalidArgument);
}
