#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <set>
#include <vector>

#include "mtdtl/core/error.hpp"
#include "mtdtl/core/random.hpp"

namespace mtdtl::eval {

enum class Task { classification, regression };

struct ProbeConfig {
  std::size_t hidden = 256;
  std::size_t layers = 2;
  std::size_t iterations = 200;
  double learning_rate = 1e-3;
  double alpha = 1e-4;  // L2 penalty alpha/(2n) * ||W||^2, biases excluded
  std::uint64_t seed = 0;
};

struct ProbeOutput {
  std::vector<double> values;        // regression predictions
  std::vector<std::size_t> classes;  // classification predictions
};

/// Full-batch ReLU MLP trained with Adam; inputs (and regression targets) standardized on the training set.
class MlpProbe {
 public:
  using Mat = Eigen::MatrixXd;
  using Vec = Eigen::VectorXd;

  MlpProbe(Task task, ProbeConfig cfg = {}) : task_(task), cfg_(cfg) {}

  void fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
    require(!X.empty() && X.size() == y.size(), "probe: features and labels differ in count");
    const std::size_t n = X.size(), D = X[0].size();
    Mat x = to_matrix(X);
    mean_ = x.colwise().mean();
    sd_ = ((x.rowwise() - mean_.transpose()).array().square().colwise().mean()).sqrt().matrix();
    for (Eigen::Index j = 0; j < sd_.size(); ++j)
      if (sd_[j] < 1e-12) sd_[j] = 1.0;
    x = standardize(x);

    Mat target;
    if (task_ == Task::classification) {
      std::set<std::size_t> labels;
      for (double v : y) {
        require(v >= 0 && v == std::floor(v), "probe: class labels must be non-negative integers");
        labels.insert(static_cast<std::size_t>(v));
      }
      require(labels.size() >= 2, "probe: training set has a single class");
      classes_ = *labels.rbegin() + 1;
      target = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(classes_));
      for (std::size_t i = 0; i < n; ++i) target(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[i])) = 1.0;
    } else {
      double m = 0, s = 0;
      for (double v : y) m += v;
      m /= static_cast<double>(n);
      for (double v : y) s += (v - m) * (v - m);
      y_mean_ = m;
      y_sd_ = std::sqrt(s / static_cast<double>(n));
      if (y_sd_ < 1e-12) y_sd_ = 1.0;
      target.resize(static_cast<Eigen::Index>(n), 1);
      for (std::size_t i = 0; i < n; ++i) target(static_cast<Eigen::Index>(i), 0) = (y[i] - y_mean_) / y_sd_;
    }

    // Glorot-uniform weights, zero biases
    Rng rng(cfg_.seed);
    std::vector<std::size_t> dims{D};
    for (std::size_t l = 0; l < cfg_.layers; ++l) dims.push_back(cfg_.hidden);
    dims.push_back(static_cast<std::size_t>(target.cols()));
    W_.clear();
    b_.clear();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
      Mat w(static_cast<Eigen::Index>(dims[l]), static_cast<Eigen::Index>(dims[l + 1]));
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = bound * (2.0 * uniform01(rng) - 1.0);
      W_.push_back(w);
      b_.push_back(Vec::Zero(static_cast<Eigen::Index>(dims[l + 1])));
    }

    std::vector<Mat> mW, vW;
    std::vector<Vec> mb, vb;
    for (std::size_t l = 0; l < W_.size(); ++l) {
      mW.push_back(Mat::Zero(W_[l].rows(), W_[l].cols()));
      vW.push_back(mW.back());
      mb.push_back(Vec::Zero(b_[l].size()));
      vb.push_back(mb.back());
    }
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, nn = static_cast<double>(n);
    for (std::size_t it = 1; it <= cfg_.iterations; ++it) {
      std::vector<Mat> acts{x};
      for (std::size_t l = 0; l < W_.size(); ++l) {
        Mat z = (acts.back() * W_[l]).rowwise() + b_[l].transpose();
        if (l + 1 < W_.size()) z = z.cwiseMax(0.0);
        acts.push_back(std::move(z));
      }
      Mat delta;
      if (task_ == Task::classification) {
        Mat p = softmax(acts.back());
        delta = (p - target) / nn;
      } else {
        delta = (acts.back() - target) / nn;
      }
      const double c1 = 1 - std::pow(b1, static_cast<double>(it)), c2 = 1 - std::pow(b2, static_cast<double>(it));
      for (std::size_t l = W_.size(); l-- > 0;) {
        Mat gW = acts[l].transpose() * delta + (cfg_.alpha / nn) * W_[l];
        Vec gb = delta.colwise().sum().transpose();
        if (l > 0) delta = ((delta * W_[l].transpose()).array() * (acts[l].array() > 0).cast<double>()).matrix();
        mW[l] = b1 * mW[l] + (1 - b1) * gW;
        vW[l] = b2 * vW[l] + (1 - b2) * gW.cwiseProduct(gW);
        mb[l] = b1 * mb[l] + (1 - b1) * gb;
        vb[l] = b2 * vb[l] + (1 - b2) * gb.cwiseProduct(gb);
        W_[l] -= (cfg_.learning_rate * (mW[l] / c1).array() / ((vW[l] / c2).array().sqrt() + eps)).matrix();
        b_[l] -= (cfg_.learning_rate * (mb[l] / c1).array() / ((vb[l] / c2).array().sqrt() + eps)).matrix();
      }
    }
  }

  ProbeOutput predict(const std::vector<std::vector<double>>& X) const {
    require(!W_.empty(), "probe: predict before fit");
    Mat a = standardize(to_matrix(X));
    for (std::size_t l = 0; l < W_.size(); ++l) {
      a = (a * W_[l]).rowwise() + b_[l].transpose();
      if (l + 1 < W_.size()) a = a.cwiseMax(0.0);
    }
    ProbeOutput out;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (task_ == Task::classification) {
        Eigen::Index best;
        a.row(i).maxCoeff(&best);
        out.classes.push_back(static_cast<std::size_t>(best));
      } else {
        out.values.push_back(a(i, 0) * y_sd_ + y_mean_);
      }
    }
    return out;
  }

 private:
  static Mat to_matrix(const std::vector<std::vector<double>>& X) {
    Mat m(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(X.empty() ? 0 : X[0].size()));
    for (std::size_t i = 0; i < X.size(); ++i) {
      require(X[i].size() == static_cast<std::size_t>(m.cols()), "probe: feature rows differ in length");
      for (std::size_t j = 0; j < X[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[i][j];
    }
    return m;
  }
  Mat standardize(const Mat& x) const {
    require(x.cols() == mean_.size(), "probe: feature dimension differs from training");
    return ((x.rowwise() - mean_.transpose()).array().rowwise() / sd_.transpose().array()).matrix();
  }
  static Mat softmax(const Mat& z) {
    Mat p = (z.colwise() - z.rowwise().maxCoeff()).array().exp().matrix();
    return p.array().colwise() / p.rowwise().sum().array();
  }

  Task task_;
  ProbeConfig cfg_;
  Vec mean_, sd_;
  std::vector<Mat> W_;
  std::vector<Vec> b_;
  std::size_t classes_ = 0;
  double y_mean_ = 0, y_sd_ = 1;
};

} // namespace mtdtl::eval
