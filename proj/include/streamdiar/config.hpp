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

// PipelineConfig: every tunable of the system in one place, read from and
// written to a "key = value" text file.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "streamdiar/diarizer.hpp"
#include "streamdiar/embedder.hpp"
#include "streamdiar/error.hpp"
#include "streamdiar/features.hpp"
#include "streamdiar/gmm.hpp"
#include "streamdiar/scoring.hpp"

namespace streamdiar {

struct PipelineConfig {
  FeatureConfig features;

  // UBMs (VAD space, raw speaker space for phonetic labels, transformed speaker space)
  int ubm_components = 64;
  int phone_ubm_components = 64;
  int ubm_iters = 10;
  int ubm_split_sweeps = 3;
  int ubm_subsample = 1;  // keep every n-th frame for UBM training
  double variance_floor_ratio = 1e-3;

  // VAD
  int block_frames = 20;
  int vad_kmeans_iters = 100;

  // Embedder
  ContextConfig context;
  int transform_dim = 60;
  std::vector<int> layer_dims{3840, 1200, 600, 600, 300, 300, 5000};
  double activation_alpha = 0.9;
  double activation_tau = 10.0;
  int epochs = 30;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double lr_decay = 0.5;
  int batch_size = 32;
  double train_chunk = 2.4;      // seconds of speech per training supervector
  double train_chunk_hop = 0.6;  // hop between training chunks
  SupervectorWeighting supervector_weighting = SupervectorWeighting::kSqrtOccupancy;

  DiarizerConfig diarizer;

  // Scoring
  double collar = 0.25;
  bool score_overlap = true;
  CollarMode collar_mode = CollarMode::kAllComponents;
  double jer_collar = 0.0;

  std::uint64_t seed = 1;

  GmmTrainOptions gmm_options() const {
    GmmTrainOptions o;
    o.sweeps_per_split = ubm_split_sweeps;
    o.variance_floor_ratio = variance_floor_ratio;
    return o;
  }

  MergeableActivation activation() const { return {activation_alpha, activation_tau}; }

  NetworkTrainOptions network_options() const {
    NetworkTrainOptions o;
    o.epochs = epochs;
    o.learning_rate = learning_rate;
    o.momentum = momentum;
    o.lr_decay = lr_decay;
    o.batch_size = batch_size;
    o.seed = seed;
    o.activation = activation();
    return o;
  }

  DerOptions der_options() const { return {collar, score_overlap, collar_mode}; }

  void validate() const {
    features.frame.validate();
    context.validate();
    diarizer.validate();
    if (ubm_components < 1 || phone_ubm_components < 1) fail(ErrorCategory::kConfig, "UBM component counts must be >= 1");
    if (ubm_subsample < 1) fail(ErrorCategory::kConfig, "ubm_subsample must be >= 1");
    if (block_frames < 1) fail(ErrorCategory::kConfig, "block_frames must be >= 1");
    if (std::abs(block_frames * features.frame.frame_shift - diarizer.segment_length) > 1e-9)
      fail(ErrorCategory::kConfig, "block_frames * frame_shift must equal segment_length");
    if (transform_dim < 1 || transform_dim > features.speaker_dim() * context.size())
      fail(ErrorCategory::kConfig, "transform_dim out of range");
    if (layer_dims.size() < 3) fail(ErrorCategory::kConfig, "layer_dims needs input, hidden and output widths");
    if (layer_dims.front() != ubm_components * transform_dim)
      fail(ErrorCategory::kConfig, "layer_dims[0] must equal ubm_components * transform_dim (" +
                                       std::to_string(ubm_components * transform_dim) + ")");
    if (!(activation_alpha > 0.0) || activation_tau < 0.0) fail(ErrorCategory::kConfig, "invalid activation parameters");
    if (collar < 0.0) fail(ErrorCategory::kConfig, "collar must be >= 0");
  }
};

namespace config_detail {

// Shortest %g form that reads back to the same double.
inline std::string fmt_double(double v) {
  char buf[40];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (...) {
  }
  fail(ErrorCategory::kConfig, "config key '" + key + "': expected a number, got '" + v + "'");
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos == v.size()) return d;
  } catch (...) {
  }
  fail(ErrorCategory::kConfig, "config key '" + key + "': expected an integer, got '" + v + "'");
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCategory::kConfig, "config key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(static_cast<int>(to_int(key, item)));
  if (out.empty()) fail(ErrorCategory::kConfig, "config key '" + key + "': empty list");
  return out;
}

inline std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  const char* key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

#define SD_DOUBLE(name, member)                                                  \
  Field {                                                                        \
    name, [](const PipelineConfig& c) { return fmt_double(c.member); },          \
        [](PipelineConfig& c, const std::string& v) { c.member = to_double(name, v); } \
  }
#define SD_INT(name, member)                                                              \
  Field {                                                                                 \
    name, [](const PipelineConfig& c) { return std::to_string(c.member); },               \
        [](PipelineConfig& c, const std::string& v) {                                     \
          c.member = static_cast<decltype(c.member)>(to_int(name, v));                    \
        }                                                                                 \
  }
#define SD_BOOL(name, member)                                                          \
  Field {                                                                              \
    name, [](const PipelineConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](PipelineConfig& c, const std::string& v) { c.member = to_bool(name, v); }   \
  }

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SD_INT("sample_rate", features.frame.sample_rate),
      SD_DOUBLE("window_length", features.frame.window_length),
      SD_DOUBLE("frame_shift", features.frame.frame_shift),
      SD_DOUBLE("pre_emphasis", features.mfcc.pre_emphasis),
      SD_INT("mel_filters", features.mfcc.mel_filters),
      SD_DOUBLE("energy_floor", features.mfcc.energy_floor),
      SD_DOUBLE("mel_low_freq", features.mfcc.low_freq),
      SD_DOUBLE("mel_high_freq", features.mfcc.high_freq),
      SD_INT("vad_coeffs", features.vad_coeffs),
      SD_INT("speaker_coeffs", features.speaker_coeffs),
      SD_DOUBLE("norm_window", features.norm_window),
      Field{"norm_mode",
            [](const PipelineConfig& c) {
              return std::string(c.features.norm_mode == NormMode::kCausal ? "causal" : "centered");
            },
            [](PipelineConfig& c, const std::string& v) {
              if (v == "causal") c.features.norm_mode = NormMode::kCausal;
              else if (v == "centered") c.features.norm_mode = NormMode::kCentered;
              else fail(ErrorCategory::kConfig, "norm_mode must be causal or centered");
            }},
      SD_BOOL("normalize_speaker_features", features.normalize_speaker),
      SD_INT("ubm_components", ubm_components),
      SD_INT("phone_ubm_components", phone_ubm_components),
      SD_INT("ubm_iters", ubm_iters),
      SD_INT("ubm_split_sweeps", ubm_split_sweeps),
      SD_INT("ubm_subsample", ubm_subsample),
      SD_DOUBLE("variance_floor_ratio", variance_floor_ratio),
      SD_INT("block_frames", block_frames),
      SD_INT("vad_kmeans_iters", vad_kmeans_iters),
      Field{"context_offsets", [](const PipelineConfig& c) { return join(c.context.offsets); },
            [](PipelineConfig& c, const std::string& v) { c.context.offsets = to_int_list("context_offsets", v); }},
      SD_INT("transform_dim", transform_dim),
      Field{"layer_dims", [](const PipelineConfig& c) { return join(c.layer_dims); },
            [](PipelineConfig& c, const std::string& v) { c.layer_dims = to_int_list("layer_dims", v); }},
      SD_DOUBLE("activation_alpha", activation_alpha),
      SD_DOUBLE("activation_tau", activation_tau),
      SD_INT("epochs", epochs),
      SD_DOUBLE("learning_rate", learning_rate),
      SD_DOUBLE("momentum", momentum),
      SD_DOUBLE("lr_decay", lr_decay),
      SD_INT("batch_size", batch_size),
      SD_DOUBLE("train_chunk", train_chunk),
      SD_DOUBLE("train_chunk_hop", train_chunk_hop),
      Field{"supervector_weighting",
            [](const PipelineConfig& c) {
              return std::string(c.supervector_weighting == SupervectorWeighting::kSqrtOccupancy ? "sqrt_occupancy"
                                                                                                 : "none");
            },
            [](PipelineConfig& c, const std::string& v) {
              if (v == "sqrt_occupancy") c.supervector_weighting = SupervectorWeighting::kSqrtOccupancy;
              else if (v == "none") c.supervector_weighting = SupervectorWeighting::kNone;
              else fail(ErrorCategory::kConfig, "supervector_weighting must be sqrt_occupancy or none");
            }},
      SD_DOUBLE("segment_length", diarizer.segment_length),
      SD_DOUBLE("max_speech", diarizer.max_speech),
      SD_DOUBLE("max_nonspeech", diarizer.max_nonspeech),
      SD_DOUBLE("theta0", diarizer.theta0),
      SD_DOUBLE("delta_reliable", diarizer.delta_reliable),
      SD_DOUBLE("tau_split", diarizer.tau_split),
      SD_DOUBLE("threshold_adapt_rate", diarizer.threshold_adapt_rate),
      SD_INT("max_speakers", diarizer.max_speakers),
      SD_DOUBLE("collar", collar),
      SD_BOOL("score_overlap", score_overlap),
      Field{"collar_mode",
            [](const PipelineConfig& c) {
              return std::string(c.collar_mode == CollarMode::kAllComponents ? "all" : "keep_fa");
            },
            [](PipelineConfig& c, const std::string& v) {
              if (v == "all") c.collar_mode = CollarMode::kAllComponents;
              else if (v == "keep_fa") c.collar_mode = CollarMode::kKeepFalseAlarm;
              else fail(ErrorCategory::kConfig, "collar_mode must be all or keep_fa");
            }},
      SD_DOUBLE("jer_collar", jer_collar),
      SD_INT("seed", seed),
  };
  return table;
}

#undef SD_DOUBLE
#undef SD_INT
#undef SD_BOOL

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace config_detail

inline void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : config_detail::fields())
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  fail(ErrorCategory::kConfig, "unknown config key '" + key + "'");
}

inline std::string get_config_value(const PipelineConfig& cfg, const std::string& key) {
  for (const auto& f : config_detail::fields())
    if (key == f.key) return f.get(cfg);
  fail(ErrorCategory::kConfig, "unknown config key '" + key + "'");
}

/// Applies "key = value" lines on top of cfg. '#' starts a comment.
inline void parse_config(std::istream& is, PipelineConfig& cfg, const std::string& source = "<config>") {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCategory::kConfig, source + ":" + std::to_string(lineno) + ": expected key = value");
    set_config_value(cfg, config_detail::trim(line.substr(0, eq)), config_detail::trim(line.substr(eq + 1)));
  }
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCategory::kIo, "cannot open config: " + path.string());
  PipelineConfig cfg;
  parse_config(is, cfg, path.string());
  cfg.validate();
  return cfg;
}

inline std::string dump_config(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& f : config_detail::fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace streamdiar
