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

// Online speaker labelling over fixed-length blocks.
//
// Speech blocks accumulate Baum-Welch statistics in a pending buffer. A
// decision fires when the buffer holds max_speech of speech, when
// max_nonspeech of consecutive non-speech follows buffered speech, or when the
// oldest buffered block would otherwise wait longer than
// max_speech + max_nonspeech. At a decision the buffer embedding is matched
// against the speaker models; unmatched buffers go through the two-halves test
// before a new model is created.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "streamdiar/embedder.hpp"
#include "streamdiar/error.hpp"
#include "streamdiar/gmm.hpp"
#include "streamdiar/kmeans.hpp"

namespace streamdiar {

struct DiarizerConfig {
  double segment_length = 0.2;
  double max_speech = 2.4;
  double max_nonspeech = 0.6;
  double theta0 = 0.5;
  double delta_reliable = 0.1;
  double tau_split = 0.4;
  double threshold_adapt_rate = 0.1;
  int max_speakers = 50;

  int blocks_for(double seconds) const { return static_cast<int>(std::lround(seconds / segment_length)); }

  void validate() const {
    auto multiple = [&](double v) {
      const double r = v / segment_length;
      return r >= 1.0 - 1e-9 && std::abs(r - std::round(r)) < 1e-6;
    };
    if (!(segment_length > 0.0)) fail(ErrorCategory::kConfig, "segment_length must be positive");
    if (!multiple(max_speech)) fail(ErrorCategory::kConfig, "max_speech must be a multiple of segment_length");
    if (!multiple(max_nonspeech)) fail(ErrorCategory::kConfig, "max_nonspeech must be a multiple of segment_length");
    if (!(theta0 > 0.0 && theta0 < 1.0)) fail(ErrorCategory::kConfig, "theta0 must lie in (0, 1)");
    if (!(tau_split >= 0.0 && tau_split < 1.0)) fail(ErrorCategory::kConfig, "tau_split must lie in [0, 1)");
    if (!(threshold_adapt_rate >= 0.0 && threshold_adapt_rate <= 1.0))
      fail(ErrorCategory::kConfig, "threshold_adapt_rate must lie in [0, 1]");
    if (delta_reliable < 0.0) fail(ErrorCategory::kConfig, "delta_reliable must be >= 0");
    if (max_speakers < 1) fail(ErrorCategory::kConfig, "max_speakers must be >= 1");
  }
};

struct SpeakerModel {
  std::string id;
  Vector centroid;  // unit norm
  double threshold = 0.5;
  std::int64_t n_updates = 0;
  std::int64_t total_frames = 0;
  std::int64_t created = 0;  // creation order, for eviction
};

struct LabeledSegment {
  double start = 0.0;
  double end = 0.0;
  std::string speaker;
};

struct PendingBlock {
  double start = 0.0;
  double end = 0.0;
  BaumWelchStats stats;
};

struct PendingBuffer {
  std::vector<PendingBlock> blocks;  // speech blocks only, in stream order
  BaumWelchStats stats;              // sum of blocks[i].stats
  double speech_duration = 0.0;
  double consecutive_nonspeech = 0.0;

  bool empty() const { return blocks.empty(); }
};

enum class DecisionPath { kMatch, kNew, kSplitAssign };

inline const char* to_string(DecisionPath p) {
  switch (p) {
    case DecisionPath::kMatch: return "match";
    case DecisionPath::kNew: return "new";
    case DecisionPath::kSplitAssign: return "split-assign";
  }
  return "?";
}

/// One record per decision, for the JSON-lines event log.
struct DecisionEvent {
  double time = 0.0;  // stream time at which the decision fired
  double span_start = 0.0;
  double span_end = 0.0;
  double speech = 0.0;
  DecisionPath path = DecisionPath::kMatch;
  std::vector<std::string> speakers;  // labels assigned (two for a split)
  double score = 0.0;                 // best match score, or half-vs-half similarity
  bool updated = false;
  int num_models = 0;
};

using StatsEncoder = std::function<SpeakerEmbedding(const BaumWelchStats&)>;

/// Applies the reliable-score update in place.
inline void update_model(SpeakerModel& model, const SpeakerEmbedding& e, double score, std::int64_t stats_frames,
                         const DiarizerConfig& cfg) {
  if (score < model.threshold + cfg.delta_reliable - 1e-12)
    fail(ErrorCategory::kState, "model update requires score >= threshold + delta_reliable");
  const double n = static_cast<double>(model.n_updates);
  Vector c = (n * model.centroid + e.e) / (n + 1.0);
  const double norm = c.norm();
  if (norm > 0.0) model.centroid = c / norm;
  model.threshold = (1.0 - cfg.threshold_adapt_rate) * model.threshold +
                    cfg.threshold_adapt_rate * (score - cfg.delta_reliable);
  model.threshold = std::clamp(model.threshold, -1.0 + 1e-9, 1.0 - 1e-9);
  model.n_updates += 1;
  model.total_frames += stats_frames;
}

class OnlineDiarizer {
 public:
  OnlineDiarizer(DiarizerConfig cfg, StatsEncoder encoder)
      : cfg_(std::move(cfg)), encoder_(std::move(encoder)) {
    cfg_.validate();
  }

  const DiarizerConfig& config() const { return cfg_; }
  const std::vector<SpeakerModel>& models() const { return models_; }
  const PendingBuffer& buffer() const { return buffer_; }
  const std::vector<DecisionEvent>& events() const { return events_; }
  bool finalized() const { return finalized_; }
  std::int64_t decisions() const { return decisions_; }

  /// Test hook: install a model directly.
  void add_model(SpeakerModel m) {
    m.created = created_++;
    models_.push_back(std::move(m));
  }

  /// Drops recorded decision events (the caller has consumed them).
  void clear_events() { events_.clear(); }

  /// Consumes one classified block. Non-speech content is discarded.
  std::vector<LabeledSegment> process_block(bool is_speech, const BaumWelchStats& stats, double start, double end) {
    if (finalized_) fail(ErrorCategory::kState, "diarizer already finalized");
    if (!(end > start)) fail(ErrorCategory::kData, "block must have positive duration");
    now_ = end;
    const double len = end - start;
    if (is_speech) {
      if (buffer_.empty()) {
        buffer_.stats = stats;
      } else {
        buffer_.stats += stats;
      }
      buffer_.blocks.push_back({start, end, stats});
      buffer_.speech_duration += len;
      buffer_.consecutive_nonspeech = 0.0;
    } else {
      buffer_.consecutive_nonspeech += len;
    }
    if (buffer_.empty()) return {};
    const double eps = 1e-9;
    const bool speech_full = buffer_.speech_duration >= cfg_.max_speech - eps;
    const bool pause = buffer_.consecutive_nonspeech >= cfg_.max_nonspeech - eps;
    const bool too_old = end - buffer_.blocks.front().start >= cfg_.max_speech + cfg_.max_nonspeech - eps;
    if (speech_full || pause || too_old) return decide();
    return {};
  }

  /// Labels the buffered speech and clears the buffer.
  std::vector<LabeledSegment> decide() {
    if (buffer_.empty()) return {};
    ++decisions_;
    DecisionEvent ev;
    ev.time = now_;
    ev.span_start = buffer_.blocks.front().start;
    ev.span_end = buffer_.blocks.back().end;
    ev.speech = buffer_.speech_duration;

    std::vector<std::string> labels;
    const SpeakerEmbedding e = encoder_(buffer_.stats);
    const auto best = best_match(e.e);
    if (best && best->score > models_[best->index].threshold) {
      auto& model = models_[best->index];
      labels.assign(buffer_.blocks.size(), model.id);
      ev.path = DecisionPath::kMatch;
      ev.score = best->score;
      ev.speakers = {model.id};
      if (best->score >= model.threshold + cfg_.delta_reliable) {
        update_model(model, e, best->score, buffer_.stats.frame_count, cfg_);
        ev.updated = true;
      }
    } else {
      labels = split_test(e, ev);
    }
    ev.num_models = static_cast<int>(models_.size());
    events_.push_back(std::move(ev));
    auto segments = segments_for(labels);
    buffer_ = PendingBuffer{};
    return segments;
  }

  /// Flushes whatever is buffered and closes the stream.
  std::vector<LabeledSegment> finalize() {
    if (finalized_) return {};
    auto out = decide();
    finalized_ = true;
    return out;
  }

  /// Index of the first half when the buffer is split at the midpoint of its
  /// accumulated speech: blocks starting before the midpoint go to the first half.
  static std::size_t split_point(const PendingBuffer& buf) {
    const double half = 0.5 * buf.speech_duration;
    double acc = 0.0;
    std::size_t i = 0;
    for (; i < buf.blocks.size(); ++i) {
      if (acc >= half - 1e-9) break;
      acc += buf.blocks[i].end - buf.blocks[i].start;
    }
    return i;
  }

 private:
  struct Match {
    std::size_t index = 0;
    double score = 0.0;
  };

  std::optional<Match> best_match(const Vector& e) const {
    std::optional<Match> best;
    for (std::size_t i = 0; i < models_.size(); ++i) {
      const double s = cosine(e, models_[i].centroid);
      if (!best || s > best->score) best = Match{i, s};
    }
    return best;
  }

  std::string create_model(const SpeakerEmbedding& e, std::int64_t frames) {
    SpeakerModel m;
    m.id = "spk" + std::to_string(next_label_++);
    m.centroid = e.e.normalized();
    m.threshold = cfg_.theta0;
    m.n_updates = 1;
    m.total_frames = frames;
    m.created = created_++;
    models_.push_back(m);
    evict_beyond_cap(m.created);
    return m.id;
  }

  void evict_beyond_cap(std::int64_t keep_created) {
    while (static_cast<int>(models_.size()) > cfg_.max_speakers) {
      std::size_t victim = models_.size();
      for (std::size_t i = 0; i < models_.size(); ++i) {
        if (models_[i].created == keep_created) continue;
        if (victim == models_.size() || models_[i].n_updates < models_[victim].n_updates ||
            (models_[i].n_updates == models_[victim].n_updates && models_[i].created < models_[victim].created))
          victim = i;
      }
      if (victim == models_.size()) break;
      models_.erase(models_.begin() + static_cast<std::ptrdiff_t>(victim));
    }
  }

  BaumWelchStats sum_blocks(std::size_t first, std::size_t last) const {
    BaumWelchStats s = buffer_.blocks[first].stats;
    for (std::size_t i = first + 1; i < last; ++i) s += buffer_.blocks[i].stats;
    return s;
  }

  std::vector<std::string> split_test(const SpeakerEmbedding& full, DecisionEvent& ev) {
    const std::size_t n = buffer_.blocks.size();
    const std::size_t mid = split_point(buffer_);
    if (mid == 0 || mid >= n) {
      // A single block cannot be halved.
      if (models_.empty()) {
        const auto id = create_model(full, buffer_.stats.frame_count);
        ev.path = DecisionPath::kNew;
        ev.speakers = {id};
        return std::vector<std::string>(n, id);
      }
      const auto best = best_match(full.e);
      ev.path = DecisionPath::kSplitAssign;
      ev.score = best->score;
      ev.speakers = {models_[best->index].id};
      return std::vector<std::string>(n, models_[best->index].id);
    }

    const SpeakerEmbedding ea = encoder_(sum_blocks(0, mid));
    const SpeakerEmbedding eb = encoder_(sum_blocks(mid, n));
    const double sim = cosine(ea.e, eb.e);
    ev.score = sim;
    if (sim >= cfg_.tau_split) {
      const auto id = create_model(full, buffer_.stats.frame_count);
      ev.path = DecisionPath::kNew;
      ev.speakers = {id};
      return std::vector<std::string>(n, id);
    }

    ev.path = DecisionPath::kSplitAssign;
    std::string la, lb;
    if (models_.empty()) {
      la = create_model(ea, sum_blocks(0, mid).frame_count);
      lb = create_model(eb, sum_blocks(mid, n).frame_count);
    } else {
      la = models_[best_match(ea.e)->index].id;
      lb = models_[best_match(eb.e)->index].id;
    }
    ev.speakers = {la, lb};
    std::vector<std::string> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < mid ? la : lb;
    return labels;
  }

  std::vector<LabeledSegment> segments_for(const std::vector<std::string>& labels) const {
    std::vector<LabeledSegment> out;
    for (std::size_t i = 0; i < buffer_.blocks.size(); ++i) {
      const auto& b = buffer_.blocks[i];
      if (!out.empty() && out.back().speaker == labels[i] && std::abs(out.back().end - b.start) < 1e-9) {
        out.back().end = b.end;
      } else {
        out.push_back({b.start, b.end, labels[i]});
      }
    }
    return out;
  }

  DiarizerConfig cfg_;
  StatsEncoder encoder_;
  std::vector<SpeakerModel> models_;
  PendingBuffer buffer_;
  std::vector<DecisionEvent> events_;
  double now_ = 0.0;
  std::int64_t decisions_ = 0;
  std::int64_t next_label_ = 0;
  std::int64_t created_ = 0;
  bool finalized_ = false;
};

}  // namespace streamdiar
