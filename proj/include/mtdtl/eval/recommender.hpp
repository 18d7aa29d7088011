#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mtdtl/core/error.hpp"
#include "mtdtl/core/random.hpp"
#include "mtdtl/eval/metrics.hpp"

namespace mtdtl::eval {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct AlsConfig {
  double alpha = 0.1;
  double lambda_v = 1e-5;
  double lambda_u = 1e-5;
  double lambda_w = 0.1;
  std::size_t rank = 50;
  std::size_t iterations = 15;
  std::uint64_t seed = 0;
};

struct AlsModel {
  MatrixXd U, V, W;
  std::vector<double> objective;  // after initialisation, then after each sweep
  // U and V start Gaussian, W as the ridge fit of the initial V
};

/// sum C (P - U V^T)^2 + lV/2 |V - XW|^2 + lU/2 |U|^2 + lW/2 |W|^2 with C = 1 + alpha R, P = [R > 0].
inline double als_objective(const MatrixXd& R, const MatrixXd& X, const AlsConfig& c, const MatrixXd& U,
                            const MatrixXd& V, const MatrixXd& W) {
  const MatrixXd P = (R.array() > 0).cast<double>();
  const MatrixXd C = (1.0 + c.alpha * R.array()).matrix();
  const MatrixXd E = P - U * V.transpose();
  return (C.array() * E.array().square()).sum() + 0.5 * c.lambda_v * (V - X * W).squaredNorm() +
         0.5 * c.lambda_u * U.squaredNorm() + 0.5 * c.lambda_w * W.squaredNorm();
}

/// Closed-form alternating updates in the order U, V, W. Per-row solves use the shared Gram matrix
/// plus a correction over the observed entries only.
inline AlsModel als_fit(const MatrixXd& R, const MatrixXd& X, const AlsConfig& c) {
  const auto users = R.rows(), items = R.cols(), r = static_cast<Eigen::Index>(c.rank);
  require(X.rows() == items, "als: feature rows must match item count");
  require(c.rank >= 1 && r <= std::min(users, items), "als: rank " + std::to_string(c.rank) +
                                                          " exceeds min(users, items)");
  require(c.lambda_v > 0 && c.lambda_u >= 0 && c.lambda_w >= 0 && c.alpha >= 0, "als: invalid hyperparameters");
  require((R.array() >= 0).all() && R.allFinite(), "als: interaction counts must be non-negative");
  Rng rng(c.seed);
  AlsModel m;
  m.U.resize(users, r);
  m.V.resize(items, r);
  for (Eigen::Index i = 0; i < m.U.size(); ++i) m.U.data()[i] = 0.1 * normal01(rng);
  for (Eigen::Index i = 0; i < m.V.size(); ++i) m.V.data()[i] = 0.1 * normal01(rng);

  std::vector<std::vector<Eigen::Index>> by_user(static_cast<std::size_t>(users)), by_item(static_cast<std::size_t>(items));
  for (Eigen::Index u = 0; u < users; ++u)
    for (Eigen::Index i = 0; i < items; ++i)
      if (R(u, i) > 0) {
        by_user[static_cast<std::size_t>(u)].push_back(i);
        by_item[static_cast<std::size_t>(i)].push_back(u);
      }
  const MatrixXd I = MatrixXd::Identity(r, r);
  const MatrixXd XtX = X.transpose() * X;
  const MatrixXd ridge = (XtX + (c.lambda_w / c.lambda_v) * MatrixXd::Identity(X.cols(), X.cols())).eval();
  const Eigen::LDLT<MatrixXd> ridge_solver(ridge);
  m.W = ridge_solver.solve(X.transpose() * m.V);
  m.objective.push_back(als_objective(R, X, c, m.U, m.V, m.W));

  for (std::size_t it = 0; it < c.iterations; ++it) {
    const MatrixXd VtV = m.V.transpose() * m.V;
    for (Eigen::Index u = 0; u < users; ++u) {
      MatrixXd A = VtV + 0.5 * c.lambda_u * I;
      VectorXd b = VectorXd::Zero(r);
      for (auto i : by_user[static_cast<std::size_t>(u)]) {
        const double conf = 1.0 + c.alpha * R(u, i);
        A.noalias() += (conf - 1.0) * m.V.row(i).transpose() * m.V.row(i);
        b.noalias() += conf * m.V.row(i).transpose();
      }
      m.U.row(u) = A.ldlt().solve(b).transpose();
    }
    const MatrixXd UtU = m.U.transpose() * m.U;
    const MatrixXd XW = X * m.W;
    for (Eigen::Index i = 0; i < items; ++i) {
      MatrixXd A = UtU + 0.5 * c.lambda_v * I;
      VectorXd b = 0.5 * c.lambda_v * XW.row(i).transpose();
      for (auto u : by_item[static_cast<std::size_t>(i)]) {
        const double conf = 1.0 + c.alpha * R(u, i);
        A.noalias() += (conf - 1.0) * m.U.row(u).transpose() * m.U.row(u);
        b.noalias() += conf * m.U.row(u).transpose();
      }
      m.V.row(i) = A.ldlt().solve(b).transpose();
    }
    m.W = ridge_solver.solve(X.transpose() * m.V);
    m.objective.push_back(als_objective(R, X, c, m.U, m.V, m.W));
  }
  return m;
}

/// Items sorted by descending score; ties keep the order of a seeded random permutation.
inline std::vector<std::size_t> rank_items(const std::vector<double>& scores, Rng& rng) {
  auto order = random_permutation(scores.size(), rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

struct ColdStartResult {
  double ndcg = 0.0;             // mean over evaluated users
  double random_ndcg = 0.0;      // mean over random rankings of the same users
  double p_value = 1.0;          // two-sided permutation test against random ranking
  std::size_t users_evaluated = 0;
  std::size_t users_no_heldout = 0;   // no held-out liked item: nDCG undefined
  std::size_t users_no_training = 0;  // all interactions fell on held-out items
};

/// Item-level hold-out: fit on the remaining items, score held-out items with U (X_held W)^T and rank
/// only those, averaging nDCG@k over users with at least one held-out liked item.
inline ColdStartResult cold_start_eval(const MatrixXd& R, const MatrixXd& X, const AlsConfig& cfg,
                                       double holdout = 0.2, std::uint64_t seed = 0, std::size_t k = 500,
                                       std::size_t permutations = 200) {
  require(holdout > 0 && holdout < 1, "cold start: holdout fraction must be in (0,1)");
  require(X.rows() == R.cols(), "cold start: feature rows must match item count");
  const auto items = static_cast<std::size_t>(R.cols());
  Rng rng(derive_seed(seed, 0x636f6c64));
  const auto perm = random_permutation(items, rng);
  const auto n_held = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(holdout * static_cast<double>(items))));
  require(n_held < items, "cold start: hold-out leaves no training items");
  std::vector<std::size_t> held(perm.begin(), perm.begin() + static_cast<long>(n_held));
  std::vector<std::size_t> kept(perm.begin() + static_cast<long>(n_held), perm.end());
  std::sort(held.begin(), held.end());
  std::sort(kept.begin(), kept.end());

  // features standardized with training-item statistics
  MatrixXd Xk(static_cast<Eigen::Index>(kept.size()), X.cols()), Xh(static_cast<Eigen::Index>(held.size()), X.cols());
  MatrixXd Rk(R.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    Xk.row(static_cast<Eigen::Index>(j)) = X.row(static_cast<Eigen::Index>(kept[j]));
    Rk.col(static_cast<Eigen::Index>(j)) = R.col(static_cast<Eigen::Index>(kept[j]));
  }
  for (std::size_t j = 0; j < held.size(); ++j) Xh.row(static_cast<Eigen::Index>(j)) = X.row(static_cast<Eigen::Index>(held[j]));
  const VectorXd mu = Xk.colwise().mean().transpose();
  VectorXd sd = ((Xk.rowwise() - mu.transpose()).array().square().colwise().mean()).sqrt().matrix().transpose();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (sd[j] < 1e-12) sd[j] = 1.0;
  Xk = ((Xk.rowwise() - mu.transpose()).array().rowwise() / sd.transpose().array()).matrix();
  Xh = ((Xh.rowwise() - mu.transpose()).array().rowwise() / sd.transpose().array()).matrix();

  AlsConfig c = cfg;
  c.rank = std::min<std::size_t>(cfg.rank, static_cast<std::size_t>(std::min(Rk.rows(), Rk.cols())));
  const auto model = als_fit(Rk, Xk, c);
  const MatrixXd scores = model.U * (Xh * model.W).transpose();

  ColdStartResult res;
  std::vector<std::vector<char>> relevant;
  Rng tie(derive_seed(seed, 0x746965));
  double total = 0.0;
  for (Eigen::Index u = 0; u < R.rows(); ++u) {
    if (Rk.row(u).maxCoeff() <= 0) ++res.users_no_training;
    std::vector<char> rel(held.size());
    bool any = false;
    for (std::size_t j = 0; j < held.size(); ++j) any |= (rel[j] = R(u, static_cast<Eigen::Index>(held[j])) > 0);
    if (!any) {
      ++res.users_no_heldout;
      continue;
    }
    std::vector<double> s(held.size());
    for (std::size_t j = 0; j < held.size(); ++j) s[j] = scores(u, static_cast<Eigen::Index>(j));
    total += ndcg_at_k(rank_items(s, tie), rel, k);
    relevant.push_back(std::move(rel));
  }
  res.users_evaluated = relevant.size();
  require(res.users_evaluated > 0, "cold start: no user has a held-out liked item");
  res.ndcg = total / static_cast<double>(res.users_evaluated);

  // null distribution of the mean nDCG under uniformly random rankings
  if (permutations == 0) {
    res.random_ndcg = res.p_value = std::nan("");
    return res;
  }
  Rng null_rng(derive_seed(seed, 0x6e756c6c));
  std::vector<double> null(permutations);
  for (auto& v : null) {
    double t = 0;
    for (const auto& rel : relevant) t += ndcg_at_k(random_permutation(held.size(), null_rng), rel, k);
    v = t / static_cast<double>(relevant.size());
  }
  res.random_ndcg = std::accumulate(null.begin(), null.end(), 0.0) / static_cast<double>(null.size());
  std::size_t extreme = 0;
  for (double v : null) extreme += std::abs(v - res.random_ndcg) >= std::abs(res.ndcg - res.random_ndcg);
  res.p_value = static_cast<double>(1 + extreme) / static_cast<double>(1 + permutations);
  return res;
}

} // namespace mtdtl::eval
