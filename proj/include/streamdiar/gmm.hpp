// Copyright 2026 The streamdiar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Diagonal-covariance GMM: posteriors, zero/first-order Baum-Welch statistics,
// and EM training initialized by binary mixture splitting.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "streamdiar/binary_io.hpp"
#include "streamdiar/error.hpp"
#include "streamdiar/types.hpp"

namespace streamdiar {

class DiagGmm {
 public:
  DiagGmm() = default;

  /// Takes ownership of the parameters and validates them.
  DiagGmm(Vector weights, Matrix means, Matrix variances)
      : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
    if (means_.rows() != weights_.size() || variances_.rows() != means_.rows() ||
        variances_.cols() != means_.cols() || weights_.size() == 0 || means_.cols() == 0)
      fail(ErrorCategory::kDimension, "inconsistent GMM parameter shapes");
    if ((weights_.array() <= 0.0).any()) fail(ErrorCategory::kData, "GMM weights must be positive");
    if ((variances_.array() <= 0.0).any()) fail(ErrorCategory::kData, "GMM variances must be positive");
    weights_ /= weights_.sum();
    precompute();
  }

  int num_components() const { return static_cast<int>(weights_.size()); }
  int dim() const { return static_cast<int>(means_.cols()); }
  const Vector& weights() const { return weights_; }
  const Matrix& means() const { return means_; }
  const Matrix& variances() const { return variances_; }

  /// log(w_k) + log N(x; mu_k, var_k) for every component, evaluated directly.
  Vector component_log_likelihoods(const Eigen::Ref<const Vector>& frame) const {
    check_dim(frame.size());
    Vector ll(num_components());
    for (int k = 0; k < num_components(); ++k) {
      const auto diff = frame.transpose() - means_.row(k);
      ll(k) = gconst_(k) - 0.5 * (diff.array().square() * inv_var_.row(k).array()).sum();
    }
    return ll;
  }

  /// Same quantity for every row of frames at once (T x K), via matrix products.
  Matrix frame_log_likelihoods(const Matrix& frames) const {
    check_dim(frames.cols());
    Matrix ll = frames.array().square().matrix() * inv_var_.transpose();
    ll *= -0.5;
    ll.noalias() += frames * mean_inv_var_.transpose();
    ll.rowwise() += (gconst_ - 0.5 * mean_sq_inv_var_).transpose();
    return ll;
  }

  void save(const std::filesystem::path& path) const {
    auto os = binio::open_out(path);
    binio::write_magic(os, "EMLG");
    binio::write(os, static_cast<std::uint32_t>(num_components()));
    binio::write(os, static_cast<std::uint32_t>(dim()));
    for (int k = 0; k < num_components(); ++k) binio::write(os, weights_(k));
    for (int k = 0; k < num_components(); ++k)
      for (int d = 0; d < dim(); ++d) binio::write(os, means_(k, d));
    for (int k = 0; k < num_components(); ++k)
      for (int d = 0; d < dim(); ++d) binio::write(os, variances_(k, d));
    binio::check_written(os, path);
  }

  static DiagGmm load(const std::filesystem::path& path) {
    auto is = binio::open_in(path);
    binio::expect_magic(is, "EMLG");
    const auto k = binio::read<std::uint32_t>(is);
    const auto d = binio::read<std::uint32_t>(is);
    Vector w(k);
    Matrix m(k, d), v(k, d);
    for (std::uint32_t i = 0; i < k; ++i) w(i) = binio::read<double>(is);
    for (std::uint32_t i = 0; i < k; ++i)
      for (std::uint32_t j = 0; j < d; ++j) m(i, j) = binio::read<double>(is);
    for (std::uint32_t i = 0; i < k; ++i)
      for (std::uint32_t j = 0; j < d; ++j) v(i, j) = binio::read<double>(is);
    DiagGmm g;
    g.weights_ = std::move(w);  // stored weights are already normalized; keep bits
    g.means_ = std::move(m);
    g.variances_ = std::move(v);
    g.precompute();
    return g;
  }

 private:
  void check_dim(Eigen::Index d) const {
    if (d != dim()) fail(ErrorCategory::kDimension, "frame dimension does not match the GMM");
  }

  void precompute() {
    const double log2pi = std::log(2.0 * std::numbers::pi);
    inv_var_ = variances_.cwiseInverse();
    mean_inv_var_ = means_.cwiseProduct(inv_var_);
    mean_sq_inv_var_ = means_.cwiseProduct(mean_inv_var_).rowwise().sum();
    gconst_.resize(num_components());
    for (int k = 0; k < num_components(); ++k)
      gconst_(k) = std::log(weights_(k)) - 0.5 * (dim() * log2pi + variances_.row(k).array().log().sum());
  }

  Vector weights_;
  Matrix means_;
  Matrix variances_;
  Matrix inv_var_;
  Matrix mean_inv_var_;
  Vector mean_sq_inv_var_;
  Vector gconst_;
};

inline double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

/// Responsibilities of each component for one frame; sums to 1.
inline Vector posteriors(const DiagGmm& gmm, const Eigen::Ref<const Vector>& frame) {
  Vector ll = gmm.component_log_likelihoods(frame);
  const double total = log_sum_exp(ll);
  return (ll.array() - total).exp();
}

/// Row-wise posteriors for a block of frames (T x K). Returns total log-likelihood.
inline double posteriors_batch(const DiagGmm& gmm, const Matrix& frames, Matrix& post) {
  post = gmm.frame_log_likelihoods(frames);
  double total = 0.0;
  for (Eigen::Index t = 0; t < post.rows(); ++t) {
    const double m = post.row(t).maxCoeff();
    auto row = post.row(t).array();
    row = (row - m).exp();
    const double s = row.sum();
    row /= s;
    total += m + std::log(s);
  }
  return total;
}

struct BaumWelchStats {
  Vector n;  // zero-order occupancies [K]
  Matrix f;  // first-order sums [K x D]
  std::int64_t frame_count = 0;

  static BaumWelchStats zero(int k, int d) { return {Vector::Zero(k), Matrix::Zero(k, d), 0}; }

  int num_components() const { return static_cast<int>(n.size()); }
  int dim() const { return static_cast<int>(f.cols()); }

  BaumWelchStats& operator+=(const BaumWelchStats& o) {
    if (o.n.size() != n.size() || o.f.cols() != f.cols())
      fail(ErrorCategory::kDimension, "cannot merge statistics of different shapes");
    n += o.n;
    f += o.f;
    frame_count += o.frame_count;
    return *this;
  }
};

inline BaumWelchStats merge_stats(const BaumWelchStats& a, const BaumWelchStats& b) {
  BaumWelchStats out = a;
  out += b;
  return out;
}

inline constexpr Eigen::Index kStatsChunk = 4096;

inline BaumWelchStats accumulate_stats(const DiagGmm& gmm, const FeatureMatrix& features) {
  if (!features.empty() && features.dim() != gmm.dim())
    fail(ErrorCategory::kDimension, "feature dimension does not match the GMM");
  auto stats = BaumWelchStats::zero(gmm.num_components(), gmm.dim());
  Matrix post;
  for (Eigen::Index start = 0; start < features.num_frames(); start += kStatsChunk) {
    const auto len = std::min(kStatsChunk, features.num_frames() - start);
    const Matrix block = features.frames.middleRows(start, len);
    posteriors_batch(gmm, block, post);
    stats.n += post.colwise().sum().transpose();
    stats.f.noalias() += post.transpose() * block;
  }
  stats.frame_count = features.num_frames();
  return stats;
}

struct GmmTrainOptions {
  int sweeps_per_split = 3;       // EM sweeps after each binary split
  double variance_floor_ratio = 1e-3;  // floor = ratio * global per-dim variance
  double split_offset = 0.1;      // mean perturbation, in standard deviations
};

struct GmmTraining {
  DiagGmm gmm;
  std::vector<double> log_likelihood;  // per final EM iteration, before its M-step
};

namespace detail {

struct EmAccum {
  Vector n;
  Matrix f;
  Matrix s;
  double loglik = 0.0;
};

inline EmAccum em_estep(const DiagGmm& gmm, const Matrix& data) {
  const int k = gmm.num_components();
  const auto d = data.cols();
  EmAccum acc{Vector::Zero(k), Matrix::Zero(k, d), Matrix::Zero(k, d), 0.0};
  Matrix post;
  for (Eigen::Index start = 0; start < data.rows(); start += kStatsChunk) {
    const auto len = std::min(kStatsChunk, data.rows() - start);
    const Matrix block = data.middleRows(start, len);
    acc.loglik += posteriors_batch(gmm, block, post);
    acc.n += post.colwise().sum().transpose();
    acc.f.noalias() += post.transpose() * block;
    acc.s.noalias() += post.transpose() * block.array().square().matrix();
  }
  return acc;
}

inline DiagGmm em_mstep(const DiagGmm& prev, const EmAccum& acc, const Vector& var_floor,
                        double total_frames) {
  const int k = prev.num_components();
  Vector w(k);
  Matrix m = prev.means();
  Matrix v = prev.variances();
  for (int i = 0; i < k; ++i) {
    const double occ = acc.n(i);
    w(i) = std::max(occ / total_frames, 1e-10);
    if (occ < 1e-8) continue;  // starved component keeps its parameters
    m.row(i) = acc.f.row(i) / occ;
    v.row(i) = (acc.s.row(i) / occ - m.row(i).cwiseProduct(m.row(i))).cwiseMax(var_floor.transpose());
  }
  return DiagGmm(std::move(w), std::move(m), std::move(v));
}

}  // namespace detail

/// Binary-split EM. Requires at least 10 frames per requested component.
inline GmmTraining train_gmm_em_traced(const FeatureMatrix& data, int num_components, int iters,
                                       std::uint64_t seed, const GmmTrainOptions& opt = {}) {
  if (num_components < 1) fail(ErrorCategory::kConfig, "GMM needs at least one component");
  if (data.num_frames() < 10LL * num_components)
    fail(ErrorCategory::kData, "insufficient data: need >= 10 frames per component, have " +
                                   std::to_string(data.num_frames()) + " for K=" +
                                   std::to_string(num_components));
  if (!data.all_finite()) fail(ErrorCategory::kData, "training data contains non-finite values");

  const Matrix& x = data.frames;
  const double n = static_cast<double>(x.rows());
  const Vector mean = x.colwise().mean().transpose();
  const Vector var = (x.array().square().colwise().mean().transpose() - mean.array().square()).matrix();
  Vector var_floor = (opt.variance_floor_ratio * var.array()).max(1e-12).matrix();

  Matrix means = mean.transpose();
  Matrix vars = var.cwiseMax(var_floor).transpose();
  DiagGmm gmm(Vector::Ones(1), means, vars);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  while (gmm.num_components() < num_components) {
    const int k = gmm.num_components();
    int target = 0;
    gmm.weights().maxCoeff(&target);
    Vector w(k + 1);
    Matrix m(k + 1, x.cols()), v(k + 1, x.cols());
    w.head(k) = gmm.weights();
    m.topRows(k) = gmm.means();
    v.topRows(k) = gmm.variances();
    Vector offset(x.cols());
    for (Eigen::Index d = 0; d < x.cols(); ++d)
      offset(d) = gauss(rng) * opt.split_offset * std::sqrt(v(target, d));
    w(target) *= 0.5;
    w(k) = w(target);
    m.row(k) = m.row(target) - offset.transpose();
    m.row(target) += offset.transpose();
    v.row(k) = v.row(target);
    gmm = DiagGmm(std::move(w), std::move(m), std::move(v));
    for (int s = 0; s < opt.sweeps_per_split; ++s)
      gmm = detail::em_mstep(gmm, detail::em_estep(gmm, x), var_floor, n);
  }

  GmmTraining out;
  for (int it = 0; it < iters; ++it) {
    const auto acc = detail::em_estep(gmm, x);
    out.log_likelihood.push_back(acc.loglik);
    gmm = detail::em_mstep(gmm, acc, var_floor, n);
  }
  out.gmm = std::move(gmm);
  return out;
}

inline DiagGmm train_gmm_em(const FeatureMatrix& data, int num_components, int iters, std::uint64_t seed,
                            const GmmTrainOptions& opt = {}) {
  return train_gmm_em_traced(data, num_components, iters, seed, opt).gmm;
}

/// Total log-likelihood of the data under the model.
inline double total_log_likelihood(const DiagGmm& gmm, const FeatureMatrix& data) {
  Matrix post;
  double total = 0.0;
  for (Eigen::Index start = 0; start < data.num_frames(); start += kStatsChunk) {
    const auto len = std::min(kStatsChunk, data.num_frames() - start);
    total += posteriors_batch(gmm, data.frames.middleRows(start, len), post);
  }
  return total;
}

}  // namespace streamdiar
