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

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <string>

#include "streamdiar/binary_io.hpp"
#include "streamdiar/error.hpp"

namespace streamdiar {

/// Row-major so that one row is one frame / one mixture component.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Time-major per-frame features. Row i is stamped start_time + i * frame_shift.
struct FeatureMatrix {
  Matrix frames;
  double frame_shift = 0.010;
  double start_time = 0.0;

  FeatureMatrix() = default;
  FeatureMatrix(Matrix f, double shift, double start = 0.0)
      : frames(std::move(f)), frame_shift(shift), start_time(start) {}

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
  bool empty() const { return frames.rows() == 0; }
  double time_of(Eigen::Index i) const { return start_time + static_cast<double>(i) * frame_shift; }

  bool all_finite() const { return frames.allFinite(); }

  /// Rows [first, first + count) as a new matrix with shifted start time.
  FeatureMatrix slice(Eigen::Index first, Eigen::Index count) const {
    if (first < 0 || count < 0 || first + count > num_frames())
      fail(ErrorCategory::kDimension, "frame slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                                          ") outside " + std::to_string(num_frames()) + " frames");
    return FeatureMatrix(frames.middleRows(first, count), frame_shift, time_of(first));
  }
};

// "EMLF" feature dump: u32 dim, u32 num_frames, f32 frame_shift, then f32 rows.
inline void save_features(const FeatureMatrix& fm, const std::filesystem::path& path) {
  auto os = binio::open_out(path);
  binio::write_magic(os, "EMLF");
  binio::write(os, static_cast<std::uint32_t>(fm.dim()));
  binio::write(os, static_cast<std::uint32_t>(fm.num_frames()));
  binio::write(os, static_cast<float>(fm.frame_shift));
  for (Eigen::Index r = 0; r < fm.num_frames(); ++r)
    for (Eigen::Index c = 0; c < fm.dim(); ++c) binio::write(os, static_cast<float>(fm.frames(r, c)));
  binio::check_written(os, path);
}

inline FeatureMatrix load_features(const std::filesystem::path& path) {
  auto is = binio::open_in(path);
  binio::expect_magic(is, "EMLF");
  const auto dim = binio::read<std::uint32_t>(is);
  const auto n = binio::read<std::uint32_t>(is);
  const auto shift = binio::read<float>(is);
  Matrix m(n, dim);
  for (std::uint32_t r = 0; r < n; ++r)
    for (std::uint32_t c = 0; c < dim; ++c) m(r, c) = binio::read<float>(is);
  return FeatureMatrix(std::move(m), shift);
}

}  // namespace streamdiar
