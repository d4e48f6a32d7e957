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

// Unsupervised speech/non-speech detection. Each block of frames is summarized
// by its normalized zero-order occupancy vector under a UBM; two K-means
// centroids of those vectors act as the speech and non-speech models.

#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <vector>

#include "streamdiar/binary_io.hpp"
#include "streamdiar/error.hpp"
#include "streamdiar/gmm.hpp"
#include "streamdiar/kmeans.hpp"
#include "streamdiar/types.hpp"

namespace streamdiar {

struct VadVector {
  Vector v;  // occupancies / frame count; a distribution over components
  std::int64_t block_index = 0;
  double start = 0.0;
  double end = 0.0;
  double mean_c0 = 0.0;  // mean of feature column 0 over the block
};

enum class BlockMode {
  kTraining,   // trailing partial block dropped
  kStreaming,  // trailing partial block kept
};

inline VadVector vad_vector(const DiagGmm& ubm, const FeatureMatrix& block, std::int64_t index = 0) {
  if (block.empty()) fail(ErrorCategory::kEmptyInput, "VAD vector of an empty block");
  const auto stats = accumulate_stats(ubm, block);
  VadVector out;
  out.v = stats.n / static_cast<double>(stats.frame_count);
  out.block_index = index;
  out.start = block.start_time;
  out.end = block.start_time + static_cast<double>(block.num_frames()) * block.frame_shift;
  out.mean_c0 = block.frames.col(0).mean();
  return out;
}

inline std::vector<VadVector> extract_vad_vectors(const DiagGmm& ubm, const FeatureMatrix& features,
                                                  int block_frames = 20,
                                                  BlockMode mode = BlockMode::kTraining) {
  if (block_frames < 1) fail(ErrorCategory::kConfig, "block_frames must be >= 1");
  std::vector<VadVector> out;
  const auto n = features.num_frames();
  for (Eigen::Index start = 0, idx = 0; start < n; start += block_frames, ++idx) {
    const auto len = std::min<Eigen::Index>(block_frames, n - start);
    if (len < block_frames && mode == BlockMode::kTraining) break;
    out.push_back(vad_vector(ubm, features.slice(start, len), idx));
  }
  return out;
}

struct VadModel {
  Vector speech_centroid;
  Vector nonspeech_centroid;
  int block_frames = 20;

  int num_components() const { return static_cast<int>(speech_centroid.size()); }

  void save(const std::filesystem::path& path) const {
    auto os = binio::open_out(path);
    binio::write_magic(os, "EMLV");
    binio::write(os, static_cast<std::uint32_t>(num_components()));
    binio::write(os, static_cast<std::uint32_t>(block_frames));
    for (int k = 0; k < num_components(); ++k) binio::write(os, speech_centroid(k));
    for (int k = 0; k < num_components(); ++k) binio::write(os, nonspeech_centroid(k));
    binio::check_written(os, path);
  }

  static VadModel load(const std::filesystem::path& path) {
    auto is = binio::open_in(path);
    binio::expect_magic(is, "EMLV");
    const auto k = binio::read<std::uint32_t>(is);
    VadModel m;
    m.block_frames = static_cast<int>(binio::read<std::uint32_t>(is));
    m.speech_centroid.resize(k);
    m.nonspeech_centroid.resize(k);
    for (std::uint32_t i = 0; i < k; ++i) m.speech_centroid(i) = binio::read<double>(is);
    for (std::uint32_t i = 0; i < k; ++i) m.nonspeech_centroid(i) = binio::read<double>(is);
    return m;
  }
};

inline constexpr std::size_t kMinVadTrainingVectors = 100;

/// Two-cluster K-means over VAD vectors. Clustering runs on unit-normalized
/// vectors, the geometry classify_block scores in; each stored centroid is
/// the mean raw VAD vector of its cluster. The cluster whose blocks have the
/// higher mean c0 (log-energy proxy) is named speech.
inline VadModel train_vad_from_vectors(const std::vector<VadVector>& vectors, std::uint64_t seed,
                                       int block_frames = 20, int kmeans_iters = 100) {
  if (vectors.size() < kMinVadTrainingVectors)
    fail(ErrorCategory::kData, "insufficient background data: " + std::to_string(vectors.size()) +
                                   " VAD vectors, need " + std::to_string(kMinVadTrainingVectors));
  const auto k = vectors.front().v.size();
  Matrix data(static_cast<Eigen::Index>(vectors.size()), k);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const double norm = vectors[i].v.norm();
    if (!(norm > 0.0)) fail(ErrorCategory::kData, "VAD vector with zero norm");
    data.row(static_cast<Eigen::Index>(i)) = vectors[i].v.transpose() / norm;
  }
  const auto res = kmeans_traced(data, 2, kmeans_iters, seed);

  double energy[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const int a = res.assignment[i];
    energy[a] += vectors[i].mean_c0;
    ++count[a];
  }
  for (int c = 0; c < 2; ++c) energy[c] = count[c] ? energy[c] / static_cast<double>(count[c]) : -1e300;
  const int speech = energy[1] > energy[0] ? 1 : 0;

  VadModel m;
  m.block_frames = block_frames;
  m.speech_centroid = Vector::Zero(static_cast<Eigen::Index>(k));
  m.nonspeech_centroid = Vector::Zero(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < vectors.size(); ++i)
    (res.assignment[i] == speech ? m.speech_centroid : m.nonspeech_centroid) += vectors[i].v;
  if (count[speech]) m.speech_centroid /= static_cast<double>(count[speech]);
  if (count[1 - speech]) m.nonspeech_centroid /= static_cast<double>(count[1 - speech]);
  if (m.speech_centroid.norm() == 0.0 || m.nonspeech_centroid.norm() == 0.0 ||
      cosine(m.speech_centroid, m.nonspeech_centroid) >= 1.0 - 1e-6)
    fail(ErrorCategory::kData, "VAD clusters collapsed; background data lacks speech/non-speech contrast");
  return m;
}

inline VadModel train_vad(const DiagGmm& ubm, const FeatureMatrix& background, std::uint64_t seed,
                          int block_frames = 20) {
  return train_vad_from_vectors(extract_vad_vectors(ubm, background, block_frames, BlockMode::kTraining),
                                seed, block_frames);
}

enum class VadLabel { kSpeech, kNonSpeech };

struct VadDecision {
  VadLabel label = VadLabel::kNonSpeech;
  double score_speech = 0.0;
  double score_nonspeech = 0.0;
  double start = 0.0;
  double end = 0.0;

  bool is_speech() const { return label == VadLabel::kSpeech; }
};

inline VadDecision classify_block(const VadModel& model, const VadVector& vec) {
  if (vec.v.size() != model.num_components())
    fail(ErrorCategory::kDimension, "VAD vector length does not match the VAD model");
  VadDecision d;
  d.score_speech = cosine(vec.v, model.speech_centroid);
  d.score_nonspeech = cosine(vec.v, model.nonspeech_centroid);
  d.label = d.score_speech >= d.score_nonspeech ? VadLabel::kSpeech : VadLabel::kNonSpeech;
  d.start = vec.start;
  d.end = vec.end;
  return d;
}

/// start,end,label,score_speech,score_nonspeech
inline void write_vad_csv_row(std::ostream& os, const VadDecision& d) {
  os << d.start << ',' << d.end << ',' << (d.is_speech() ? "speech" : "nonspeech") << ','
     << d.score_speech << ',' << d.score_nonspeech << '\n';
}

}  // namespace streamdiar
