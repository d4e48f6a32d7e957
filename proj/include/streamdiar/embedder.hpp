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

// Speaker embeddings: context stacking, a label-informed linear transform
// (regularized LDA over UBM-argmax classes), centralized supervectors, and a
// feed-forward speaker classifier whose hidden layers collapse into a single
// affine projector at test time.

#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "streamdiar/binary_io.hpp"
#include "streamdiar/error.hpp"
#include "streamdiar/gmm.hpp"
#include "streamdiar/types.hpp"

namespace streamdiar {

// ---------------------------------------------------------------------------
// Context stacking and the discriminative transform

struct ContextConfig {
  std::vector<int> offsets{-6, -4, -2, 0, 2, 4, 6};

  void validate() const {
    if (offsets.empty() || std::find(offsets.begin(), offsets.end(), 0) == offsets.end())
      fail(ErrorCategory::kConfig, "context offsets must contain 0");
    for (std::size_t i = 1; i < offsets.size(); ++i)
      if (offsets[i] <= offsets[i - 1]) fail(ErrorCategory::kConfig, "context offsets must be strictly increasing");
  }
  int size() const { return static_cast<int>(offsets.size()); }
  int max_lookahead() const { return std::max(0, offsets.back()); }
};

/// Frame t becomes [x(t+o) for o in offsets], indices clamped to the stream.
inline FeatureMatrix stack_context(const FeatureMatrix& in, const ContextConfig& cfg = {}) {
  cfg.validate();
  if (in.empty()) fail(ErrorCategory::kEmptyInput, "stack_context needs at least one frame");
  const auto n = in.num_frames();
  const auto d = in.dim();
  Matrix out(n, d * cfg.size());
  for (Eigen::Index t = 0; t < n; ++t)
    for (int j = 0; j < cfg.size(); ++j) {
      const auto src = std::clamp<Eigen::Index>(t + cfg.offsets[static_cast<std::size_t>(j)], 0, n - 1);
      out.row(t).segment(j * d, d) = in.frames.row(src);
    }
  return FeatureMatrix(std::move(out), in.frame_shift, in.start_time);
}

/// Per-frame argmax of UBM posteriors, lowest index on ties.
inline std::vector<int> phonetic_labels(const DiagGmm& ubm, const FeatureMatrix& features) {
  std::vector<int> labels(static_cast<std::size_t>(features.num_frames()));
  for (Eigen::Index start = 0; start < features.num_frames(); start += kStatsChunk) {
    const auto len = std::min(kStatsChunk, features.num_frames() - start);
    const Matrix ll = ubm.frame_log_likelihoods(Matrix(features.frames.middleRows(start, len)));
    for (Eigen::Index t = 0; t < len; ++t) {
      Eigen::Index best = 0;
      ll.row(t).maxCoeff(&best);  // first maximum
      labels[static_cast<std::size_t>(start + t)] = static_cast<int>(best);
    }
  }
  return labels;
}

struct DiscriminativeTransform {
  Matrix projection;  // out_dim x in_dim

  int in_dim() const { return static_cast<int>(projection.cols()); }
  int out_dim() const { return static_cast<int>(projection.rows()); }

  FeatureMatrix apply(const FeatureMatrix& stacked) const {
    if (stacked.dim() != in_dim()) fail(ErrorCategory::kDimension, "transform input dimension mismatch");
    return FeatureMatrix(stacked.frames * projection.transpose(), stacked.frame_shift, stacked.start_time);
  }

  void save(const std::filesystem::path& path) const {
    auto os = binio::open_out(path);
    binio::write_magic(os, "EMLT");
    binio::write(os, static_cast<std::uint32_t>(out_dim()));
    binio::write(os, static_cast<std::uint32_t>(in_dim()));
    for (int r = 0; r < out_dim(); ++r)
      for (int c = 0; c < in_dim(); ++c) binio::write(os, projection(r, c));
    binio::check_written(os, path);
  }

  static DiscriminativeTransform load(const std::filesystem::path& path) {
    auto is = binio::open_in(path);
    binio::expect_magic(is, "EMLT");
    const auto out = binio::read<std::uint32_t>(is);
    const auto in = binio::read<std::uint32_t>(is);
    DiscriminativeTransform t{Matrix(out, in)};
    for (std::uint32_t r = 0; r < out; ++r)
      for (std::uint32_t c = 0; c < in; ++c) t.projection(r, c) = binio::read<double>(is);
    return t;
  }
};

/// Class statistics for LDA, accumulable over many files.
class ScatterAccumulator {
 public:
  explicit ScatterAccumulator(int dim) : dim_(dim), second_(Matrix::Zero(dim, dim)), sum_(Vector::Zero(dim)) {}

  void add(const FeatureMatrix& x, const std::vector<int>& labels) {
    if (x.dim() != dim_) fail(ErrorCategory::kDimension, "scatter accumulator dimension mismatch");
    if (static_cast<std::size_t>(x.num_frames()) != labels.size())
      fail(ErrorCategory::kDimension, "one label per frame required");
    second_.noalias() += x.frames.transpose() * x.frames;
    sum_ += x.frames.colwise().sum().transpose();
    for (Eigen::Index t = 0; t < x.num_frames(); ++t) {
      auto& cls = classes_[labels[static_cast<std::size_t>(t)]];
      if (cls.sum.size() == 0) cls.sum = Vector::Zero(dim_);
      cls.sum += x.frames.row(t).transpose();
      cls.count += 1;
    }
    count_ += x.num_frames();
  }

  std::size_t num_classes() const { return classes_.size(); }
  std::int64_t count() const { return count_; }

  /// Top out_dim eigenvectors of Sw^-1 Sb (generalized symmetric problem),
  /// Sw regularized by 1e-4 * trace(Sw) / D on the diagonal.
  DiscriminativeTransform solve(int out_dim) const {
    if (classes_.size() < 2) fail(ErrorCategory::kData, "LDA needs at least two classes");
    if (out_dim < 1 || out_dim > dim_) fail(ErrorCategory::kConfig, "LDA output dimension out of range");
    const double n = static_cast<double>(count_);
    const Vector mu = sum_ / n;
    Matrix sb = Matrix::Zero(dim_, dim_);
    for (const auto& [label, cls] : classes_) {
      const Vector diff = cls.sum / static_cast<double>(cls.count) - mu;
      sb.noalias() += static_cast<double>(cls.count) / n * diff * diff.transpose();
    }
    const Matrix total = second_ / n - mu * mu.transpose();
    Matrix sw = total - sb;
    sw = 0.5 * (sw + sw.transpose());
    sb = 0.5 * (sb + sb.transpose());
    const double lambda = 1e-4 * sw.trace() / dim_;
    if (!(lambda > 0.0)) fail(ErrorCategory::kData, "singular within-class scatter");
    sw.diagonal().array() += lambda;

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(sb, sw);
    if (solver.info() != Eigen::Success) fail(ErrorCategory::kData, "LDA eigen-solve failed (singular scatter)");
    const Eigen::MatrixXd& vecs = solver.eigenvectors();  // ascending eigenvalues
    DiscriminativeTransform t{Matrix(out_dim, dim_)};
    for (int r = 0; r < out_dim; ++r) {
      Vector v = vecs.col(dim_ - 1 - r);
      Eigen::Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0.0) v = -v;
      t.projection.row(r) = v.transpose();
    }
    return t;
  }

 private:
  struct ClassSum {
    Vector sum;
    std::int64_t count = 0;
  };
  int dim_;
  Matrix second_;
  Vector sum_;
  std::map<int, ClassSum> classes_;
  std::int64_t count_ = 0;
};

inline DiscriminativeTransform train_transform(const FeatureMatrix& stacked, const std::vector<int>& labels,
                                               int out_dim) {
  ScatterAccumulator acc(static_cast<int>(stacked.dim()));
  acc.add(stacked, labels);
  return acc.solve(out_dim);
}

// ---------------------------------------------------------------------------
// Supervectors

enum class SupervectorWeighting { kSqrtOccupancy, kNone };

struct Supervector {
  Vector s;  // K * D
  std::int64_t source_frames = 0;
};

inline constexpr double kOccupancyEpsilon = 1e-6;

/// Per component: (f_k / max(n_k, eps) - mu_k), optionally scaled by
/// sqrt(n_k / frame_count); blocks concatenated.
inline Supervector extract_supervector(const DiagGmm& ubm, const BaumWelchStats& stats,
                                       SupervectorWeighting weighting = SupervectorWeighting::kSqrtOccupancy) {
  if (stats.frame_count == 0) fail(ErrorCategory::kEmptyInput, "supervector of empty statistics");
  if (stats.num_components() != ubm.num_components() || stats.dim() != ubm.dim())
    fail(ErrorCategory::kDimension, "statistics do not match the UBM");
  const int k = ubm.num_components();
  const int d = ubm.dim();
  Supervector sv{Vector(static_cast<Eigen::Index>(k) * d), stats.frame_count};
  const double frames = static_cast<double>(stats.frame_count);
  for (int c = 0; c < k; ++c) {
    const double occ = stats.n(c);
    auto block = sv.s.segment(static_cast<Eigen::Index>(c) * d, d);
    block = (stats.f.row(c) / std::max(occ, kOccupancyEpsilon) - ubm.means().row(c)).transpose();
    if (weighting == SupervectorWeighting::kSqrtOccupancy) block *= std::sqrt(std::max(occ, 0.0) / frames);
  }
  return sv;
}

// ---------------------------------------------------------------------------
// Speaker network

/// g(x) = x for x >= -tau, alpha * x + (alpha - 1) * tau below (continuous at
/// -tau). Layers whose pre-activations stay above -tau compose affinely.
struct MergeableActivation {
  double alpha = 0.9;
  double tau = 10.0;

  static constexpr std::uint32_t kId = 1;  // "leaky-linear"

  double operator()(double x) const { return x >= -tau ? x : alpha * x + (alpha - 1.0) * tau; }
  double derivative(double x) const { return x >= -tau ? 1.0 : alpha; }
  bool linear(double x) const { return x >= -tau; }
};

struct SpeakerNetwork {
  std::vector<int> layer_dims;    // input, hidden..., classes
  std::vector<Matrix> weights;    // per layer, out x in
  std::vector<Vector> biases;
  MergeableActivation activation;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int num_hidden() const { return num_layers() - 1; }
  int input_dim() const { return layer_dims.front(); }
  int embedding_dim() const { return layer_dims[layer_dims.size() - 2]; }
  int num_classes() const { return layer_dims.back(); }

  /// Post-activation output of the last hidden layer, one row per input row.
  Matrix hidden(const Matrix& x) const {
    Matrix a = x;
    for (int l = 0; l < num_hidden(); ++l) {
      Matrix z = a * weights[static_cast<std::size_t>(l)].transpose();
      z.rowwise() += biases[static_cast<std::size_t>(l)].transpose();
      a = z.unaryExpr([&](double v) { return activation(v); });
    }
    return a;
  }

  Matrix logits(const Matrix& x) const {
    Matrix z = hidden(x) * weights.back().transpose();
    z.rowwise() += biases.back().transpose();
    return z;
  }

  void save(const std::filesystem::path& path) const {
    auto os = binio::open_out(path);
    binio::write_magic(os, "EMLN");
    binio::write(os, static_cast<std::uint32_t>(layer_dims.size()));
    for (int d : layer_dims) binio::write(os, static_cast<std::uint32_t>(d));
    for (int l = 0; l < num_layers(); ++l) {
      const auto& w = weights[static_cast<std::size_t>(l)];
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) binio::write(os, w(r, c));
      const auto& b = biases[static_cast<std::size_t>(l)];
      for (Eigen::Index r = 0; r < b.size(); ++r) binio::write(os, b(r));
    }
    binio::write(os, MergeableActivation::kId);
    binio::write(os, activation.alpha);
    binio::write(os, activation.tau);
    binio::check_written(os, path);
  }

  static SpeakerNetwork load(const std::filesystem::path& path) {
    auto is = binio::open_in(path);
    binio::expect_magic(is, "EMLN");
    SpeakerNetwork net;
    const auto count = binio::read<std::uint32_t>(is);
    if (count < 3) fail(ErrorCategory::kFormat, "network needs at least one hidden layer");
    for (std::uint32_t i = 0; i < count; ++i) net.layer_dims.push_back(static_cast<int>(binio::read<std::uint32_t>(is)));
    for (std::uint32_t l = 0; l + 1 < count; ++l) {
      Matrix w(net.layer_dims[l + 1], net.layer_dims[l]);
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = binio::read<double>(is);
      Vector b(net.layer_dims[l + 1]);
      for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = binio::read<double>(is);
      net.weights.push_back(std::move(w));
      net.biases.push_back(std::move(b));
    }
    if (binio::read<std::uint32_t>(is) != MergeableActivation::kId)
      fail(ErrorCategory::kUnsupported, "unknown activation id in network file");
    net.activation.alpha = binio::read<double>(is);
    net.activation.tau = binio::read<double>(is);
    return net;
  }
};

inline SpeakerNetwork init_network(const std::vector<int>& dims, const MergeableActivation& act, std::uint64_t seed) {
  if (dims.size() < 3) fail(ErrorCategory::kConfig, "network needs input, >= 1 hidden and output layer");
  for (int d : dims)
    if (d < 1) fail(ErrorCategory::kConfig, "layer widths must be positive");
  SpeakerNetwork net;
  net.layer_dims = dims;
  net.activation = act;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / (dims[l] + dims[l + 1]));  // Glorot uniform
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix w(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vector::Zero(dims[l + 1]));
  }
  return net;
}

struct NetworkGradient {
  double loss = 0.0;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// Mean softmax cross-entropy over the rows of x and its exact gradient.
inline NetworkGradient loss_and_gradient(const SpeakerNetwork& net, const Matrix& x, const std::vector<int>& labels) {
  const auto batch = x.rows();
  const auto layers = static_cast<std::size_t>(net.num_layers());
  std::vector<Matrix> pre(layers), post(layers + 1);
  post[0] = x;
  for (std::size_t l = 0; l < layers; ++l) {
    pre[l] = post[l] * net.weights[l].transpose();
    pre[l].rowwise() += net.biases[l].transpose();
    post[l + 1] = l + 1 < layers ? Matrix(pre[l].unaryExpr([&](double v) { return net.activation(v); })) : pre[l];
  }
  NetworkGradient g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  Matrix delta = pre.back();
  for (Eigen::Index r = 0; r < batch; ++r) {
    auto row = delta.row(r);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp().matrix();
    const double s = row.sum();
    row /= s;
    const int y = labels[static_cast<std::size_t>(r)];
    g.loss += -std::log(std::max(row(y), 1e-300));
    row(y) -= 1.0;
  }
  g.loss /= static_cast<double>(batch);
  delta /= static_cast<double>(batch);
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l] = delta.transpose() * post[l];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix back = delta * net.weights[l];
    delta = back.cwiseProduct(pre[l - 1].unaryExpr([&](double v) { return net.activation.derivative(v); }));
  }
  return g;
}

struct NetworkTrainOptions {
  int epochs = 30;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double lr_decay = 0.5;  // applied when an epoch fails to improve the loss
  int batch_size = 32;
  std::uint64_t seed = 1;
  MergeableActivation activation;
};

struct NetworkTraining {
  SpeakerNetwork net;
  std::vector<double> epoch_loss;  // entry 0: loss before any update
  double train_accuracy = 0.0;
  double outside_linear_fraction = 0.0;  // over all hidden pre-activations of the training set
};

inline double classification_accuracy(const SpeakerNetwork& net, const Matrix& x, const std::vector<int>& labels) {
  const Matrix z = net.logits(x);
  std::size_t ok = 0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    Eigen::Index arg = 0;
    z.row(r).maxCoeff(&arg);
    if (arg == labels[static_cast<std::size_t>(r)]) ++ok;
  }
  return z.rows() ? static_cast<double>(ok) / static_cast<double>(z.rows()) : 0.0;
}

/// Fraction of hidden pre-activations that fall below -tau.
inline double outside_linear_fraction(const SpeakerNetwork& net, const Matrix& x) {
  Matrix a = x;
  std::size_t outside = 0, total = 0;
  for (int l = 0; l < net.num_hidden(); ++l) {
    Matrix z = a * net.weights[static_cast<std::size_t>(l)].transpose();
    z.rowwise() += net.biases[static_cast<std::size_t>(l)].transpose();
    outside += static_cast<std::size_t>((z.array() < -net.activation.tau).count());
    total += static_cast<std::size_t>(z.size());
    a = z.unaryExpr([&](double v) { return net.activation(v); });
  }
  return total ? static_cast<double>(outside) / static_cast<double>(total) : 0.0;
}

inline double mean_loss(const SpeakerNetwork& net, const Matrix& x, const std::vector<int>& labels) {
  const Matrix z = net.logits(x);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double lse = log_sum_exp(z.row(r).transpose());
    loss += lse - z(r, labels[static_cast<std::size_t>(r)]);
  }
  return loss / static_cast<double>(z.rows());
}

/// Mini-batch SGD with momentum on softmax cross-entropy. x holds one
/// supervector per row, labels are class indices in [0, dims.back()).
inline NetworkTraining train_network(const Matrix& x, const std::vector<int>& labels, const std::vector<int>& dims,
                                     const NetworkTrainOptions& opt) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) fail(ErrorCategory::kDimension, "one label per example required");
  if (dims.empty() || x.cols() != dims.front()) fail(ErrorCategory::kDimension, "input width does not match layer_dims");
  std::map<int, int> per_class;
  for (int y : labels) {
    if (y < 0 || y >= dims.back()) fail(ErrorCategory::kData, "label outside [0, num_classes)");
    ++per_class[y];
  }
  if (per_class.size() < 2) fail(ErrorCategory::kData, "degenerate class distribution: need >= 2 classes");
  for (const auto& [y, c] : per_class)
    if (c < 2) fail(ErrorCategory::kData, "degenerate class distribution: class " + std::to_string(y) + " has < 2 examples");

  NetworkTraining out;
  out.net = init_network(dims, opt.activation, opt.seed);
  auto& net = out.net;
  std::vector<Matrix> vel_w;
  std::vector<Vector> vel_b;
  for (int l = 0; l < net.num_layers(); ++l) {
    vel_w.push_back(Matrix::Zero(net.weights[static_cast<std::size_t>(l)].rows(), net.weights[static_cast<std::size_t>(l)].cols()));
    vel_b.push_back(Vector::Zero(net.biases[static_cast<std::size_t>(l)].size()));
  }

  std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  double lr = opt.learning_rate;
  double best = mean_loss(net, x, labels);
  out.epoch_loss.push_back(best);
  const int bs = std::max(1, opt.batch_size);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(bs)) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(bs), order.size() - start);
      Matrix xb(static_cast<Eigen::Index>(len), x.cols());
      std::vector<int> yb(len);
      for (std::size_t i = 0; i < len; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = x.row(order[start + i]);
        yb[i] = labels[static_cast<std::size_t>(order[start + i])];
      }
      const auto g = loss_and_gradient(net, xb, yb);
      for (std::size_t l = 0; l < net.weights.size(); ++l) {
        vel_w[l] = opt.momentum * vel_w[l] - lr * g.weights[l];
        vel_b[l] = opt.momentum * vel_b[l] - lr * g.biases[l];
        net.weights[l] += vel_w[l];
        net.biases[l] += vel_b[l];
      }
    }
    const double loss = mean_loss(net, x, labels);
    out.epoch_loss.push_back(loss);
    if (loss >= best) lr *= opt.lr_decay;
    best = std::min(best, loss);
  }
  out.train_accuracy = classification_accuracy(net, x, labels);
  out.outside_linear_fraction = outside_linear_fraction(net, x);
  return out;
}

// ---------------------------------------------------------------------------
// Merged inference path

struct MergedProjector {
  Matrix m;  // embedding_dim x supervector_dim
  Vector b;

  int input_dim() const { return static_cast<int>(m.cols()); }
  int output_dim() const { return static_cast<int>(m.rows()); }

  void save(const std::filesystem::path& path) const {
    auto os = binio::open_out(path);
    binio::write_magic(os, "EMLM");
    binio::write(os, static_cast<std::uint32_t>(m.rows()));
    binio::write(os, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) binio::write(os, m(r, c));
    for (Eigen::Index r = 0; r < b.size(); ++r) binio::write(os, b(r));
    binio::check_written(os, path);
  }

  static MergedProjector load(const std::filesystem::path& path) {
    auto is = binio::open_in(path);
    binio::expect_magic(is, "EMLM");
    const auto rows = binio::read<std::uint32_t>(is);
    const auto cols = binio::read<std::uint32_t>(is);
    MergedProjector p{Matrix(rows, cols), Vector(rows)};
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) p.m(r, c) = binio::read<double>(is);
    for (std::uint32_t r = 0; r < rows; ++r) p.b(r) = binio::read<double>(is);
    return p;
  }
};

/// Composes the affine parts of all hidden layers; the classifier is dropped.
inline MergedProjector merge_network(const SpeakerNetwork& net) {
  MergedProjector p{net.weights[0], net.biases[0]};
  for (int l = 1; l < net.num_hidden(); ++l) {
    const auto& w = net.weights[static_cast<std::size_t>(l)];
    p.b = w * p.b + net.biases[static_cast<std::size_t>(l)];
    p.m = w * p.m;
  }
  return p;
}

struct SpeakerEmbedding {
  Vector e;  // unit norm
  std::int64_t source_frames = 0;
};

/// e = m s + b, then length-normalized. A zero result becomes the first basis vector.
inline SpeakerEmbedding embed(const MergedProjector& projector, const Supervector& sv) {
  if (sv.s.size() != projector.input_dim()) fail(ErrorCategory::kDimension, "supervector length does not match projector");
  SpeakerEmbedding out{projector.m * sv.s + projector.b, sv.source_frames};
  const double norm = out.e.norm();
  if (norm < 1e-12) {
    out.e.setZero();
    out.e(0) = 1.0;
  } else {
    out.e /= norm;
  }
  return out;
}

/// BaumWelchStats (speaker-UBM space) to unit embedding.
struct SpeakerEncoder {
  DiagGmm ubm;
  MergedProjector projector;
  SupervectorWeighting weighting = SupervectorWeighting::kSqrtOccupancy;

  SpeakerEmbedding operator()(const BaumWelchStats& stats) const {
    return embed(projector, extract_supervector(ubm, stats, weighting));
  }
};

}  // namespace streamdiar
