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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include "streamdiar/binary_io.hpp"
#include "streamdiar/error.hpp"
#include "streamdiar/types.hpp"

namespace streamdiar {

/// a.b / (|a| |b|), clamped to [-1, 1]. Zero-norm input is an error.
inline double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) fail(ErrorCategory::kDimension, "cosine of vectors with different lengths");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) fail(ErrorCategory::kData, "cosine of a zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

struct KMeansModel {
  Matrix centroids;  // C x D

  int num_clusters() const { return static_cast<int>(centroids.rows()); }
  int dim() const { return static_cast<int>(centroids.cols()); }

  /// Index of the nearest centroid (squared Euclidean), lowest index on ties.
  int assign(const Eigen::Ref<const Vector>& x) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_clusters(); ++c) {
      const double d = (centroids.row(c).transpose() - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }

  void save(const std::filesystem::path& path) const {
    auto os = binio::open_out(path);
    binio::write_magic(os, "EMLK");
    binio::write(os, static_cast<std::uint32_t>(num_clusters()));
    binio::write(os, static_cast<std::uint32_t>(dim()));
    for (int c = 0; c < num_clusters(); ++c)
      for (int d = 0; d < dim(); ++d) binio::write(os, centroids(c, d));
    binio::check_written(os, path);
  }

  static KMeansModel load(const std::filesystem::path& path) {
    auto is = binio::open_in(path);
    binio::expect_magic(is, "EMLK");
    const auto c = binio::read<std::uint32_t>(is);
    const auto d = binio::read<std::uint32_t>(is);
    KMeansModel m{Matrix(c, d)};
    for (std::uint32_t i = 0; i < c; ++i)
      for (std::uint32_t j = 0; j < d; ++j) m.centroids(i, j) = binio::read<double>(is);
    return m;
  }
};

struct KMeansResult {
  KMeansModel model;
  std::vector<int> assignment;
  std::vector<double> distortion;  // sum of squared distances after each assignment step
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded with
/// the point farthest from its current centroid.
inline KMeansResult kmeans_traced(const Matrix& data, int num_clusters, int iters, std::uint64_t seed) {
  const auto n = data.rows();
  if (num_clusters < 1) fail(ErrorCategory::kConfig, "kmeans needs at least one cluster");
  if (n < num_clusters) fail(ErrorCategory::kData, "kmeans needs at least as many points as clusters");

  std::mt19937_64 rng(seed);
  Matrix centroids(num_clusters, data.cols());
  {
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    Eigen::Index first = pick(rng);
    centroids.row(0) = data.row(first);
    taken[static_cast<std::size_t>(first)] = true;
    Vector d2 = (data.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < num_clusters; ++c) {
      const double total = d2.sum();
      Eigen::Index chosen = -1;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng);
        for (Eigen::Index i = 0; i < n; ++i) {
          r -= d2(i);
          if (r <= 0.0 && d2(i) > 0.0) {
            chosen = i;
            break;
          }
        }
        if (chosen < 0) d2.maxCoeff(&chosen);
      } else {
        // all remaining points coincide with chosen centroids; take the next unused index
        for (Eigen::Index i = 0; i < n; ++i)
          if (!taken[static_cast<std::size_t>(i)]) {
            chosen = i;
            break;
          }
      }
      taken[static_cast<std::size_t>(chosen)] = true;
      centroids.row(c) = data.row(chosen);
      d2 = d2.cwiseMin((data.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }
  }

  KMeansResult res;
  res.model.centroids = std::move(centroids);
  res.assignment.assign(static_cast<std::size_t>(n), -1);
  Vector dist(n);
  for (int it = 0; it < std::max(iters, 1); ++it) {
    bool changed = false;
    double distortion = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = res.model.assign(data.row(i).transpose());
      dist(i) = (data.row(i) - res.model.centroids.row(a)).squaredNorm();
      distortion += dist(i);
      if (a != res.assignment[static_cast<std::size_t>(i)]) changed = true;
      res.assignment[static_cast<std::size_t>(i)] = a;
    }
    res.distortion.push_back(distortion);
    res.iterations = it + 1;
    if (!changed && it > 0) break;

    Matrix sums = Matrix::Zero(num_clusters, data.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(num_clusters), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = res.assignment[static_cast<std::size_t>(i)];
      sums.row(a) += data.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    for (int c = 0; c < num_clusters; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.model.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        Eigen::Index far = 0;
        dist.maxCoeff(&far);
        res.model.centroids.row(c) = data.row(far);
        dist(far) = 0.0;
      }
    }
  }
  return res;
}

inline KMeansModel kmeans(const Matrix& data, int num_clusters, int iters, std::uint64_t seed) {
  return kmeans_traced(data, num_clusters, iters, seed).model;
}

}  // namespace streamdiar
