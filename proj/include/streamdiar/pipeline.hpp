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

// Training stages and the streaming front-to-back diarization path.
//
// A model bundle is a directory:
//   vad_ubm.gmm      UBM over VAD features
//   vad.model        speech / non-speech centroids
//   phone_ubm.gmm    UBM over raw speaker features (phonetic classes)
//   transform.bin    context-stacked LDA projection
//   speaker_ubm.gmm  UBM over transformed speaker features
//   network.bin      trained speaker network
//   projector.bin    merged inference projector
//   manifest.txt     key = value training metadata, sorted, no timestamps

#pragma once

#include <algorithm>
#include <cmath>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "streamdiar/config.hpp"
#include "streamdiar/diarizer.hpp"
#include "streamdiar/embedder.hpp"
#include "streamdiar/error.hpp"
#include "streamdiar/features.hpp"
#include "streamdiar/gmm.hpp"
#include "streamdiar/log.hpp"
#include "streamdiar/scoring.hpp"
#include "streamdiar/vad.hpp"
#include "streamdiar/wav.hpp"

namespace streamdiar {

namespace fs = std::filesystem;

namespace bundle_files {
inline constexpr const char* kVadUbm = "vad_ubm.gmm";
inline constexpr const char* kVad = "vad.model";
inline constexpr const char* kPhoneUbm = "phone_ubm.gmm";
inline constexpr const char* kTransform = "transform.bin";
inline constexpr const char* kSpeakerUbm = "speaker_ubm.gmm";
inline constexpr const char* kNetwork = "network.bin";
inline constexpr const char* kProjector = "projector.bin";
inline constexpr const char* kManifest = "manifest.txt";
}  // namespace bundle_files

/// Sorted key = value metadata; rewriting with the same content is byte-identical.
class Manifest {
 public:
  static Manifest load(const fs::path& dir) {
    Manifest m;
    std::ifstream is(dir / bundle_files::kManifest);
    std::string line;
    while (std::getline(is, line)) {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) m.kv_[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return m;
  }

  template <typename T>
  void set(const std::string& key, const T& value) {
    std::ostringstream os;
    os.precision(10);
    os << value;
    kv_[key] = os.str();
  }

  std::string get(const std::string& key) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? std::string() : it->second;
  }

  void save(const fs::path& dir) const {
    fs::create_directories(dir);
    std::ofstream os(dir / bundle_files::kManifest, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCategory::kIo, "cannot write manifest in " + dir.string());
    for (const auto& [k, v] : kv_) os << k << " = " << v << '\n';
  }

 private:
  std::map<std::string, std::string> kv_;
};

inline void require_stage(const fs::path& dir, const char* file, const char* stage) {
  if (!fs::exists(dir / file))
    fail(ErrorCategory::kState, "incomplete model bundle: missing " + (dir / file).string() + " (run " + stage + " first)");
}

/// A WAV path, a directory searched recursively for *.wav, or a text file
/// listing one path per line. Result is sorted for directories.
inline std::vector<fs::path> list_wavs(const fs::path& input) {
  if (!fs::exists(input)) fail(ErrorCategory::kIo, "no such file or directory: " + input.string());
  std::vector<fs::path> out;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::recursive_directory_iterator(input))
      if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
    std::sort(out.begin(), out.end());
  } else if (input.extension() == ".wav") {
    out.push_back(input);
  } else {
    std::ifstream is(input);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      fs::path p(line);
      if (p.is_relative()) p = input.parent_path() / p;
      out.push_back(p);
    }
  }
  if (out.empty()) fail(ErrorCategory::kEmptyInput, "no WAV files found in " + input.string());
  return out;
}

inline FeatureMatrix concat_rows(const std::vector<FeatureMatrix>& parts) {
  Eigen::Index rows = 0;
  Eigen::Index dim = -1;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (dim >= 0 && p.dim() != dim) fail(ErrorCategory::kDimension, "feature dimension changes between files");
    dim = p.dim();
    rows += p.num_frames();
  }
  if (rows == 0) fail(ErrorCategory::kEmptyInput, "no training frames collected");
  Matrix m(rows, dim);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    m.middleRows(at, p.num_frames()) = p.frames;
    at += p.num_frames();
  }
  return FeatureMatrix(std::move(m), parts.front().frame_shift);
}

inline FeatureMatrix select_rows(const FeatureMatrix& fm, const std::vector<Eigen::Index>& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), fm.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = fm.frames.row(rows[i]);
  return FeatureMatrix(std::move(m), fm.frame_shift);
}

inline FeatureMatrix subsample(const FeatureMatrix& fm, int every) {
  if (every <= 1) return fm;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index t = 0; t < fm.num_frames(); t += every) rows.push_back(t);
  return select_rows(fm, rows);
}

inline FeatureStreams file_features(const PipelineConfig& cfg, const fs::path& wav) {
  return extract_features(ingest_wav(wav, cfg.features.frame.sample_rate), cfg.features);
}

/// Block-level VAD over a whole feature stream; the trailing partial block is kept.
inline std::vector<VadDecision> classify_stream(const DiagGmm& vad_ubm, const VadModel& vad, const FeatureMatrix& fm,
                                                int block_frames) {
  std::vector<VadDecision> out;
  for (const auto& v : extract_vad_vectors(vad_ubm, fm, block_frames, BlockMode::kStreaming))
    out.push_back(classify_block(vad, v));
  return out;
}

inline std::vector<Eigen::Index> speech_frames(const std::vector<VadDecision>& decisions, Eigen::Index num_frames,
                                               int block_frames) {
  std::vector<Eigen::Index> rows;
  for (std::size_t b = 0; b < decisions.size(); ++b) {
    if (!decisions[b].is_speech()) continue;
    const Eigen::Index first = static_cast<Eigen::Index>(b) * block_frames;
    const Eigen::Index last = std::min<Eigen::Index>(first + block_frames, num_frames);
    for (Eigen::Index t = first; t < last; ++t) rows.push_back(t);
  }
  return rows;
}

inline FeatureMatrix transformed_speaker_stream(const PipelineConfig& cfg, const DiscriminativeTransform& tr,
                                                const FeatureMatrix& speaker) {
  return tr.apply(stack_context(speaker, cfg.context));
}

// ---------------------------------------------------------------------------
// Training stages

enum class FeatureSpace { kVad, kSpeaker };

inline void train_ubm_stage(const PipelineConfig& cfg, FeatureSpace space, const fs::path& data, const fs::path& bundle) {
  cfg.validate();
  const auto wavs = list_wavs(data);
  std::vector<FeatureMatrix> parts;
  Manifest man = Manifest::load(bundle);
  if (space == FeatureSpace::kVad) {
    for (const auto& w : wavs) parts.push_back(subsample(file_features(cfg, w).vad, cfg.ubm_subsample));
  } else {
    require_stage(bundle, bundle_files::kTransform, "train-transform");
    require_stage(bundle, bundle_files::kVad, "train-vad");
    const auto vad_ubm = DiagGmm::load(bundle / bundle_files::kVadUbm);
    const auto vad = VadModel::load(bundle / bundle_files::kVad);
    const auto tr = DiscriminativeTransform::load(bundle / bundle_files::kTransform);
    for (const auto& w : wavs) {
      const auto f = file_features(cfg, w);
      const auto dec = classify_stream(vad_ubm, vad, f.vad, cfg.block_frames);
      const auto rows = speech_frames(dec, f.speaker.num_frames(), cfg.block_frames);
      if (rows.empty()) continue;
      parts.push_back(subsample(select_rows(transformed_speaker_stream(cfg, tr, f.speaker), rows), cfg.ubm_subsample));
    }
  }
  const auto data_fm = concat_rows(parts);
  SD_LOG_INFO("training UBM on ", data_fm.num_frames(), " frames of dim ", data_fm.dim());
  const auto trained = train_gmm_em_traced(data_fm, cfg.ubm_components, cfg.ubm_iters, cfg.seed, cfg.gmm_options());
  const char* file = space == FeatureSpace::kVad ? bundle_files::kVadUbm : bundle_files::kSpeakerUbm;
  const std::string prefix = space == FeatureSpace::kVad ? "vad_ubm." : "speaker_ubm.";
  fs::create_directories(bundle);
  trained.gmm.save(bundle / file);
  man.set(prefix + "components", trained.gmm.num_components());
  man.set(prefix + "dim", trained.gmm.dim());
  man.set(prefix + "frames", data_fm.num_frames());
  man.set(prefix + "files", wavs.size());
  man.set(prefix + "seed", cfg.seed);
  man.set(prefix + "log_likelihood", trained.log_likelihood.empty() ? 0.0 : trained.log_likelihood.back());
  man.save(bundle);
}

inline void train_vad_stage(const PipelineConfig& cfg, const fs::path& data, const fs::path& bundle) {
  cfg.validate();
  require_stage(bundle, bundle_files::kVadUbm, "train-ubm --space vad");
  const auto ubm = DiagGmm::load(bundle / bundle_files::kVadUbm);
  std::vector<VadVector> vectors;
  for (const auto& w : list_wavs(data)) {
    auto v = extract_vad_vectors(ubm, file_features(cfg, w).vad, cfg.block_frames, BlockMode::kTraining);
    vectors.insert(vectors.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  const auto model = train_vad_from_vectors(vectors, cfg.seed, cfg.block_frames, cfg.vad_kmeans_iters);
  model.save(bundle / bundle_files::kVad);
  Manifest man = Manifest::load(bundle);
  man.set("vad.vectors", vectors.size());
  man.set("vad.block_frames", cfg.block_frames);
  man.set("vad.centroid_cosine", cosine(model.speech_centroid, model.nonspeech_centroid));
  man.set("vad.seed", cfg.seed);
  man.save(bundle);
}

/// Phonetic UBM on raw speaker features of speech frames, then LDA of the
/// context-stacked features against that UBM's argmax classes.
inline void train_transform_stage(const PipelineConfig& cfg, const fs::path& data, const fs::path& bundle) {
  cfg.validate();
  require_stage(bundle, bundle_files::kVad, "train-vad");
  const auto vad_ubm = DiagGmm::load(bundle / bundle_files::kVadUbm);
  const auto vad = VadModel::load(bundle / bundle_files::kVad);
  const auto wavs = list_wavs(data);

  std::vector<FeatureMatrix> parts;
  for (const auto& w : wavs) {
    const auto f = file_features(cfg, w);
    const auto rows = speech_frames(classify_stream(vad_ubm, vad, f.vad, cfg.block_frames), f.speaker.num_frames(),
                                    cfg.block_frames);
    if (!rows.empty()) parts.push_back(subsample(select_rows(f.speaker, rows), cfg.ubm_subsample));
  }
  const auto speech = concat_rows(parts);
  parts.clear();
  SD_LOG_INFO("training phonetic UBM on ", speech.num_frames(), " frames");
  const auto phone = train_gmm_em(speech, cfg.phone_ubm_components, cfg.ubm_iters, cfg.seed, cfg.gmm_options());
  phone.save(bundle / bundle_files::kPhoneUbm);

  ScatterAccumulator acc(cfg.features.speaker_dim() * cfg.context.size());
  for (const auto& w : wavs) {
    const auto f = file_features(cfg, w);
    const auto rows = speech_frames(classify_stream(vad_ubm, vad, f.vad, cfg.block_frames), f.speaker.num_frames(),
                                    cfg.block_frames);
    if (rows.empty()) continue;
    const auto labels = phonetic_labels(phone, f.speaker);
    std::vector<int> sel;
    sel.reserve(rows.size());
    for (auto r : rows) sel.push_back(labels[static_cast<std::size_t>(r)]);
    acc.add(select_rows(stack_context(f.speaker, cfg.context), rows), sel);
  }
  const auto tr = acc.solve(cfg.transform_dim);
  tr.save(bundle / bundle_files::kTransform);
  Manifest man = Manifest::load(bundle);
  man.set("transform.in_dim", tr.in_dim());
  man.set("transform.out_dim", tr.out_dim());
  man.set("transform.classes", acc.num_classes());
  man.set("transform.frames", acc.count());
  man.set("phone_ubm.components", phone.num_components());
  man.set("phone_ubm.dim", phone.dim());
  man.set("transform.seed", cfg.seed);
  man.save(bundle);
}

/// Supervectors over fixed-length runs of consecutive speech blocks.
inline std::vector<Supervector> chunk_supervectors(const PipelineConfig& cfg, const DiagGmm& vad_ubm, const VadModel& vad,
                                                   const DiscriminativeTransform& tr, const DiagGmm& spk_ubm,
                                                   const fs::path& wav) {
  const auto f = file_features(cfg, wav);
  const auto dec = classify_stream(vad_ubm, vad, f.vad, cfg.block_frames);
  const auto tfm = transformed_speaker_stream(cfg, tr, f.speaker);
  std::vector<BaumWelchStats> blocks;
  for (std::size_t b = 0; b < dec.size(); ++b) {
    if (!dec[b].is_speech()) continue;
    const Eigen::Index first = static_cast<Eigen::Index>(b) * cfg.block_frames;
    const Eigen::Index len = std::min<Eigen::Index>(cfg.block_frames, tfm.num_frames() - first);
    blocks.push_back(accumulate_stats(spk_ubm, tfm.slice(first, len)));
  }
  const auto chunk = static_cast<std::size_t>(std::max(1, cfg.diarizer.blocks_for(cfg.train_chunk)));
  const auto hop = static_cast<std::size_t>(std::max(1, cfg.diarizer.blocks_for(cfg.train_chunk_hop)));
  std::vector<Supervector> out;
  auto emit = [&](std::size_t first, std::size_t last) {
    BaumWelchStats s = blocks[first];
    for (std::size_t i = first + 1; i < last; ++i) s += blocks[i];
    out.push_back(extract_supervector(spk_ubm, s, cfg.supervector_weighting));
  };
  if (blocks.size() < chunk) {
    if (blocks.size() * 2 >= chunk) emit(0, blocks.size());
    return out;
  }
  for (std::size_t s = 0; s + chunk <= blocks.size(); s += hop) emit(s, s + chunk);
  return out;
}

struct EmbedderTrainingSummary {
  std::vector<std::string> speakers;
  std::size_t examples = 0;
  NetworkTraining training;
};

/// data_dir holds one subdirectory per speaker; the directory name is the label.
inline EmbedderTrainingSummary train_embedder_stage(const PipelineConfig& cfg, const fs::path& data_dir,
                                                    const fs::path& bundle) {
  cfg.validate();
  require_stage(bundle, bundle_files::kSpeakerUbm, "train-ubm --space speaker");
  require_stage(bundle, bundle_files::kTransform, "train-transform");
  const auto vad_ubm = DiagGmm::load(bundle / bundle_files::kVadUbm);
  const auto vad = VadModel::load(bundle / bundle_files::kVad);
  const auto tr = DiscriminativeTransform::load(bundle / bundle_files::kTransform);
  const auto spk_ubm = DiagGmm::load(bundle / bundle_files::kSpeakerUbm);

  if (!fs::is_directory(data_dir)) fail(ErrorCategory::kIo, "speaker data directory not found: " + data_dir.string());
  EmbedderTrainingSummary out;
  for (const auto& e : fs::directory_iterator(data_dir))
    if (e.is_directory()) out.speakers.push_back(e.path().filename().string());
  std::sort(out.speakers.begin(), out.speakers.end());
  if (out.speakers.size() < 2) fail(ErrorCategory::kData, "embedder training needs at least 2 speaker directories");

  std::vector<Vector> rows;
  std::vector<int> labels;
  for (std::size_t s = 0; s < out.speakers.size(); ++s) {
    for (const auto& w : list_wavs(data_dir / out.speakers[s])) {
      for (auto& sv : chunk_supervectors(cfg, vad_ubm, vad, tr, spk_ubm, w)) {
        rows.push_back(std::move(sv.s));
        labels.push_back(static_cast<int>(s));
      }
    }
  }
  if (rows.empty()) fail(ErrorCategory::kEmptyInput, "no speech chunks found for embedder training");
  Matrix x(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  rows.clear();
  out.examples = labels.size();

  std::vector<int> dims = cfg.layer_dims;
  dims.back() = static_cast<int>(out.speakers.size());
  if (x.cols() != dims.front())
    fail(ErrorCategory::kDimension, "supervector length " + std::to_string(x.cols()) + " differs from layer_dims[0]");
  SD_LOG_INFO("training speaker network on ", out.examples, " chunks from ", out.speakers.size(), " speakers");
  out.training = train_network(x, labels, dims, cfg.network_options());
  const auto projector = merge_network(out.training.net);
  out.training.net.save(bundle / bundle_files::kNetwork);
  projector.save(bundle / bundle_files::kProjector);

  Manifest man = Manifest::load(bundle);
  std::string dims_s;
  for (std::size_t i = 0; i < dims.size(); ++i) dims_s += (i ? " " : "") + std::to_string(dims[i]);
  man.set("embedder.layer_dims", dims_s);
  man.set("embedder.speakers", out.speakers.size());
  man.set("embedder.examples", out.examples);
  man.set("embedder.epochs", cfg.epochs);
  man.set("embedder.seed", cfg.seed);
  man.set("embedder.final_loss", out.training.epoch_loss.back());
  man.set("embedder.train_accuracy", out.training.train_accuracy);
  man.set("embedder.outside_linear_fraction", out.training.outside_linear_fraction);
  man.set("projector.rows", projector.output_dim());
  man.set("projector.cols", projector.input_dim());
  man.save(bundle);
  return out;
}

// ---------------------------------------------------------------------------
// Inference

/// Everything the streaming path needs, immutable once loaded.
struct Bundle {
  DiagGmm vad_ubm;
  VadModel vad;
  DiscriminativeTransform transform;
  DiagGmm speaker_ubm;
  MergedProjector projector;

  static Bundle load(const fs::path& dir, const PipelineConfig& cfg) {
    require_stage(dir, bundle_files::kVadUbm, "train-ubm --space vad");
    require_stage(dir, bundle_files::kVad, "train-vad");
    require_stage(dir, bundle_files::kTransform, "train-transform");
    require_stage(dir, bundle_files::kSpeakerUbm, "train-ubm --space speaker");
    require_stage(dir, bundle_files::kProjector, "train-embedder");
    Bundle b{DiagGmm::load(dir / bundle_files::kVadUbm), VadModel::load(dir / bundle_files::kVad),
             DiscriminativeTransform::load(dir / bundle_files::kTransform),
             DiagGmm::load(dir / bundle_files::kSpeakerUbm), MergedProjector::load(dir / bundle_files::kProjector)};
    if (b.vad_ubm.dim() != cfg.features.vad_dim() || b.vad.num_components() != b.vad_ubm.num_components())
      fail(ErrorCategory::kDimension, "VAD models do not match the configured feature dimension");
    if (b.transform.in_dim() != cfg.features.speaker_dim() * cfg.context.size())
      fail(ErrorCategory::kDimension, "transform input width does not match the configured context");
    if (b.speaker_ubm.dim() != b.transform.out_dim())
      fail(ErrorCategory::kDimension, "speaker UBM does not match the transform output");
    if (b.projector.input_dim() != b.speaker_ubm.num_components() * b.speaker_ubm.dim())
      fail(ErrorCategory::kDimension, "projector input does not match the speaker UBM supervector length");
    return b;
  }
};

struct DiarizeSinks {
  std::function<void(const LabeledSegment&)> segment;
  std::function<void(const DecisionEvent&)> event;
  std::function<void(const VadDecision&)> vad;
};

/// Audio in, labeled segments out, block by block. Memory is bounded by the
/// context window, one block and the diarizer's pending buffer.
class StreamingDiarizer {
 public:
  StreamingDiarizer(const PipelineConfig& cfg, const Bundle& bundle, DiarizeSinks sinks)
      : cfg_(cfg),
        bundle_(&bundle),
        sinks_(std::move(sinks)),
        fx_(cfg.features),
        diar_(cfg.diarizer,
              [b = &bundle, w = cfg.supervector_weighting](const BaumWelchStats& s) {
                return embed(b->projector, extract_supervector(b->speaker_ubm, s, w));
              }),
        lookahead_(cfg.context.max_lookahead()),
        lookbehind_(std::max(0, -cfg.context.offsets.front())),
        stacked_(cfg.block_frames, cfg.features.speaker_dim() * cfg.context.size()) {
    cfg.validate();
  }

  void push(std::span<const float> samples) {
    fx_.push(samples);
    drain();
  }

  void finish() {
    if (finished_) return;
    fx_.finish();
    drain();
    finished_ = true;
    while (next_stack_ < received_) stack_next();
    const int min_frames = static_cast<int>(std::ceil(0.5 * cfg_.block_frames - 1e-9));
    if (stacked_count_ > 0 && stacked_count_ >= min_frames) process_block(stacked_count_);
    emit(diar_.finalize());
    flush_events();
  }

  const OnlineDiarizer& diarizer() const { return diar_; }
  std::int64_t frames() const { return received_; }
  std::int64_t blocks() const { return block_index_; }
  const std::set<std::string>& labels() const { return labels_; }

 private:
  void drain() {
    while (fx_.ready() > 0) {
      auto p = fx_.pop();
      vad_rows_.push_back(std::move(p.vad));
      raw_.push_back(std::move(p.speaker));
      ++received_;
      while (next_stack_ + lookahead_ < received_) stack_next();
    }
  }

  const Vector& raw_at(std::int64_t t) const { return raw_[static_cast<std::size_t>(t - raw_base_)]; }

  void stack_next() {
    const std::int64_t t = next_stack_++;
    const auto d = static_cast<Eigen::Index>(cfg_.features.speaker_dim());
    for (int j = 0; j < cfg_.context.size(); ++j) {
      const auto src = std::clamp<std::int64_t>(t + cfg_.context.offsets[static_cast<std::size_t>(j)], 0, received_ - 1);
      stacked_.row(stacked_count_).segment(j * d, d) = raw_at(src).transpose();
    }
    ++stacked_count_;
    while (raw_base_ < next_stack_ - lookbehind_) {
      raw_.pop_front();
      ++raw_base_;
    }
    if (stacked_count_ == cfg_.block_frames) process_block(cfg_.block_frames);
  }

  void process_block(int len) {
    const double shift = cfg_.features.frame.frame_shift;
    const double start = static_cast<double>(block_index_ * cfg_.block_frames) * shift;
    const double end = start + len * shift;
    Matrix vm(len, cfg_.features.vad_dim());
    for (int i = 0; i < len; ++i) vm.row(i) = vad_rows_[static_cast<std::size_t>(i)].transpose();
    const auto vv = vad_vector(bundle_->vad_ubm, FeatureMatrix(std::move(vm), shift, start), block_index_);
    const auto dec = classify_block(bundle_->vad, vv);
    if (sinks_.vad) sinks_.vad(dec);
    BaumWelchStats stats;
    if (dec.is_speech()) {
      const auto tfm = bundle_->transform.apply(FeatureMatrix(stacked_.topRows(len), shift, start));
      stats = accumulate_stats(bundle_->speaker_ubm, tfm);
    }
    emit(diar_.process_block(dec.is_speech(), stats, start, end));
    flush_events();
    vad_rows_.erase(vad_rows_.begin(), vad_rows_.begin() + len);
    stacked_count_ = 0;
    ++block_index_;
  }

  void emit(const std::vector<LabeledSegment>& segs) {
    for (const auto& s : segs) {
      labels_.insert(s.speaker);
      if (sinks_.segment) sinks_.segment(s);
    }
  }

  void flush_events() {
    if (sinks_.event)
      for (const auto& e : diar_.events()) sinks_.event(e);
    diar_.clear_events();
  }

  PipelineConfig cfg_;
  const Bundle* bundle_;
  DiarizeSinks sinks_;
  StreamingFeatureExtractor fx_;
  OnlineDiarizer diar_;
  int lookahead_;
  int lookbehind_;
  std::deque<Vector> vad_rows_;
  std::deque<Vector> raw_;
  std::int64_t raw_base_ = 0;
  std::int64_t received_ = 0;
  std::int64_t next_stack_ = 0;
  Matrix stacked_;
  int stacked_count_ = 0;
  std::int64_t block_index_ = 0;
  std::set<std::string> labels_;
  bool finished_ = false;
};

inline nlohmann::ordered_json event_json(const std::string& file_id, const DecisionEvent& e) {
  // Times are sums of block lengths; round away the accumulated ulps.
  const auto ms = [](double t) { return std::round(t * 1000.0) / 1000.0; };
  nlohmann::ordered_json j;
  j["file_id"] = file_id;
  j["time"] = ms(e.time);
  j["span_start"] = ms(e.span_start);
  j["span_end"] = ms(e.span_end);
  j["speech"] = ms(e.speech);
  j["path"] = to_string(e.path);
  j["speakers"] = e.speakers;
  j["score"] = e.score;
  j["updated"] = e.updated;
  j["num_models"] = e.num_models;
  return j;
}

struct DiarizeResult {
  std::string file_id;
  double audio_seconds = 0.0;
  double processing_seconds = 0.0;
  std::int64_t segments = 0;
  std::int64_t decisions = 0;
  std::size_t speakers = 0;

  double rtf() const { return audio_seconds > 0.0 ? processing_seconds / audio_seconds : 0.0; }
};

struct DiarizeOutputs {
  std::ostream* rttm = nullptr;    // one line per labeled segment, flushed per decision
  std::ostream* events = nullptr;  // JSON lines
  std::ostream* vad_csv = nullptr;
};

/// Streams one WAV file through the full path. The clock covers reading,
/// resampling, features, VAD, statistics and decisions; model loading is not
/// included.
inline DiarizeResult diarize_file(const PipelineConfig& cfg, const Bundle& bundle, const fs::path& wav,
                                  const DiarizeOutputs& out, std::size_t chunk_frames = 4000) {
  DiarizeResult r;
  r.file_id = wav.stem().string();
  const auto t0 = std::chrono::steady_clock::now();
  WavReader reader(wav);
  const int rate = cfg.features.frame.sample_rate;
  std::optional<LinearResampler> resampler;
  if (reader.sample_rate() != rate) resampler.emplace(reader.sample_rate(), rate);

  DiarizeSinks sinks;
  sinks.segment = [&](const LabeledSegment& s) {
    ++r.segments;
    if (out.rttm) *out.rttm << format_rttm_line(r.file_id, Turn{s.start, s.end - s.start, s.speaker});
  };
  sinks.event = [&](const DecisionEvent& e) {
    ++r.decisions;
    if (out.rttm) out.rttm->flush();
    if (out.events) *out.events << event_json(r.file_id, e).dump() << '\n';
  };
  if (out.vad_csv) sinks.vad = [&](const VadDecision& d) { write_vad_csv_row(*out.vad_csv, d); };

  StreamingDiarizer sd(cfg, bundle, sinks);
  std::vector<float> chunk;
  std::vector<float> resampled;
  std::uint64_t samples = 0;
  for (;;) {
    chunk.clear();
    if (reader.read(chunk, chunk_frames) == 0) break;
    if (resampler) {
      resampled.clear();
      resampler->process(chunk, resampled);
      samples += resampled.size();
      sd.push(resampled);
    } else {
      samples += chunk.size();
      sd.push(chunk);
    }
  }
  sd.finish();
  if (out.rttm) out.rttm->flush();
  const auto t1 = std::chrono::steady_clock::now();
  r.processing_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.audio_seconds = static_cast<double>(samples) / rate;
  r.speakers = sd.labels().size();
  return r;
}

/// Diarizes a list of files with up to `jobs` worker threads. Each worker owns
/// its diarizer state; per-file outputs are assembled in input order so the
/// result does not depend on scheduling.
inline std::vector<DiarizeResult> diarize_files(const PipelineConfig& cfg, const Bundle& bundle,
                                                const std::vector<fs::path>& wavs, const DiarizeOutputs& out,
                                                int jobs = 1) {
  std::vector<DiarizeResult> results(wavs.size());
  if (jobs <= 1 || wavs.size() <= 1) {
    for (std::size_t i = 0; i < wavs.size(); ++i) results[i] = diarize_file(cfg, bundle, wavs[i], out);
    return results;
  }
  struct Buffers {
    std::ostringstream rttm, events, vad;
  };
  std::vector<Buffers> bufs(wavs.size());
  std::vector<std::exception_ptr> errors(wavs.size());
  std::size_t next = 0;
  std::mutex m;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(m);
        if (next >= wavs.size()) return;
        i = next++;
      }
      try {
        DiarizeOutputs o{out.rttm ? &bufs[i].rttm : nullptr, out.events ? &bufs[i].events : nullptr,
                         out.vad_csv ? &bufs[i].vad : nullptr};
        results[i] = diarize_file(cfg, bundle, wavs[i], o);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::min<int>(jobs, static_cast<int>(wavs.size())); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < wavs.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    if (out.rttm) *out.rttm << bufs[i].rttm.str();
    if (out.events) *out.events << bufs[i].events.str();
    if (out.vad_csv) *out.vad_csv << bufs[i].vad.str();
  }
  return results;
}

// ---------------------------------------------------------------------------
// Scoring over RTTM sets

struct FileScore {
  DerReport der;
  double jer = 0.0;
};

struct ScoreSummary {
  std::vector<FileScore> files;
  DerReport pooled;
  double pooled_jer = 0.0;  // mean over files
};

/// Scores every file id in the union of both sets. Ids present on only one
/// side are an error listing the offenders.
inline ScoreSummary score_sets(const TimelineSet& ref, const TimelineSet& hyp, const DerOptions& der_opt,
                               const JerOptions& jer_opt, bool allow_missing_hyp = true) {
  std::vector<std::string> only_hyp, only_ref;
  for (const auto& [id, _] : hyp)
    if (!ref.count(id)) only_hyp.push_back(id);
  for (const auto& [id, _] : ref)
    if (!hyp.count(id)) only_ref.push_back(id);
  if (!only_hyp.empty() || (!allow_missing_hyp && !only_ref.empty())) {
    std::string msg = "file id mismatch between reference and hypothesis:";
    for (const auto& id : only_hyp) msg += " hyp-only=" + id;
    if (!allow_missing_hyp)
      for (const auto& id : only_ref) msg += " ref-only=" + id;
    fail(ErrorCategory::kData, msg);
  }
  ScoreSummary s;
  std::vector<DerReport> reports;
  for (const auto& [id, r] : ref) {
    Timeline h;
    h.file_id = id;
    if (auto it = hyp.find(id); it != hyp.end()) h = it->second;
    FileScore fsc{score_der(r, h, der_opt), score_jer(r, h, jer_opt)};
    reports.push_back(fsc.der);
    s.files.push_back(std::move(fsc));
  }
  if (reports.empty()) fail(ErrorCategory::kEmptyInput, "reference contains no files");
  s.pooled = pool_reports(reports);
  double jer = 0.0;
  for (const auto& f : s.files) jer += f.jer;
  s.pooled_jer = jer / static_cast<double>(s.files.size());
  return s;
}

}  // namespace streamdiar
