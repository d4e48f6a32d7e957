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

// MFCC front end: framing, mel filterbank, DCT, regression deltas and
// sliding-window mean normalization, in batch and streaming form.

#pragma once

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <deque>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "streamdiar/error.hpp"
#include "streamdiar/types.hpp"
#include "streamdiar/wav.hpp"

namespace streamdiar {

struct FrameConfig {
  double window_length = 0.025;
  double frame_shift = 0.010;
  int sample_rate = 16000;

  int window_samples() const { return static_cast<int>(std::lround(window_length * sample_rate)); }
  int shift_samples() const { return static_cast<int>(std::lround(frame_shift * sample_rate)); }

  void validate() const {
    if (!(frame_shift > 0.0) || window_length < frame_shift)
      fail(ErrorCategory::kConfig, "frame config needs window_length >= frame_shift > 0");
    if (sample_rate <= 0) fail(ErrorCategory::kConfig, "sample_rate must be positive");
  }
};

struct MfccConfig {
  double pre_emphasis = 0.97;
  int mel_filters = 40;
  double energy_floor = 1e-10;
  double low_freq = 20.0;
  double high_freq = 0.0;  // <= 0 means Nyquist
};

inline std::int64_t count_frames(std::int64_t num_samples, int window_samples, int shift_samples) {
  if (num_samples < window_samples) return 0;
  return (num_samples - window_samples) / shift_samples + 1;
}

inline std::vector<double> hamming_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (int i = 0; i < n; ++i) w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  return w;
}

/// Pre-emphasis (frame-local, first sample uses itself as predecessor) then Hamming.
inline void window_frame(std::span<const float> raw, std::span<const double> window,
                         double pre_emphasis, std::span<double> out) {
  const std::size_t n = raw.size();
  for (std::size_t i = n; i-- > 1;) out[i] = raw[i] - pre_emphasis * raw[i - 1];
  out[0] = raw[0] - pre_emphasis * raw[0];
  for (std::size_t i = 0; i < n; ++i) out[i] *= window[i];
}

/// Returns one pre-emphasized, Hamming-windowed frame per row.
inline Matrix frame_signal(const AudioBuffer& audio, const FrameConfig& cfg,
                           double pre_emphasis = 0.97) {
  cfg.validate();
  const int win = cfg.window_samples();
  const int shift = cfg.shift_samples();
  const auto n = count_frames(static_cast<std::int64_t>(audio.samples.size()), win, shift);
  if (n == 0) fail(ErrorCategory::kEmptyInput, "audio shorter than one analysis window");
  const auto window = hamming_window(win);
  Matrix frames(n, win);
  std::vector<double> tmp(static_cast<std::size_t>(win));
  for (std::int64_t f = 0; f < n; ++f) {
    std::span<const float> raw(audio.samples.data() + f * shift, static_cast<std::size_t>(win));
    window_frame(raw, window, pre_emphasis, tmp);
    for (int i = 0; i < win; ++i) frames(f, i) = tmp[static_cast<std::size_t>(i)];
  }
  return frames;
}

inline double hz_to_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

/// Triangular filters equally spaced on the mel scale, evaluated on FFT bins.
class MelFilterbank {
 public:
  MelFilterbank(int fft_size, int sample_rate, int num_filters, double low_hz, double high_hz)
      : fft_size_(fft_size), weights_(num_filters, fft_size / 2 + 1) {
    if (high_hz <= 0.0) high_hz = sample_rate / 2.0;
    if (num_filters < 1 || low_hz < 0.0 || high_hz <= low_hz)
      fail(ErrorCategory::kConfig, "invalid mel filterbank range");
    const double mel_lo = hz_to_mel(low_hz);
    const double mel_hi = hz_to_mel(high_hz);
    const double step = (mel_hi - mel_lo) / (num_filters + 1);
    weights_.setZero();
    centers_.resize(static_cast<std::size_t>(num_filters));
    for (int m = 0; m < num_filters; ++m) {
      const double left = mel_lo + m * step;
      const double center = left + step;
      const double right = center + step;
      centers_[static_cast<std::size_t>(m)] = mel_to_hz(center);
      for (int k = 0; k <= fft_size / 2; ++k) {
        const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / fft_size);
        if (mel > left && mel < right)
          weights_(m, k) = mel <= center ? (mel - left) / step : (right - mel) / step;
      }
    }
  }

  int num_filters() const { return static_cast<int>(weights_.rows()); }
  int fft_size() const { return fft_size_; }
  double center_hz(int m) const { return centers_.at(static_cast<std::size_t>(m)); }
  const Matrix& weights() const { return weights_; }

  Vector apply(const Vector& power_spectrum) const { return weights_ * power_spectrum; }

 private:
  int fft_size_;
  Matrix weights_;
  std::vector<double> centers_;
};

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Orthonormal DCT-II, rows = cepstral coefficients.
inline Matrix dct_matrix(int num_coeffs, int num_inputs) {
  Matrix d(num_coeffs, num_inputs);
  for (int i = 0; i < num_coeffs; ++i) {
    const double scale = i == 0 ? std::sqrt(1.0 / num_inputs) : std::sqrt(2.0 / num_inputs);
    for (int m = 0; m < num_inputs; ++m)
      d(i, m) = scale * std::cos(std::numbers::pi * i * (m + 0.5) / num_inputs);
  }
  return d;
}

/// FFT + filterbank + log, shared by every cepstral stream of one front end.
class LogMelAnalyzer {
 public:
  LogMelAnalyzer(int window_samples, int sample_rate, const MfccConfig& cfg)
      : fft_size_(next_pow2(window_samples)),
        bank_(fft_size_, sample_rate, cfg.mel_filters, cfg.low_freq, cfg.high_freq),
        floor_(cfg.energy_floor),
        padded_(fft_size_),
        power_(fft_size_ / 2 + 1) {}

  const MelFilterbank& filterbank() const { return bank_; }

  /// Power spectrum of one windowed frame (zero padded to the FFT size).
  const Vector& power_spectrum(std::span<const double> windowed) {
    std::fill(padded_.begin(), padded_.end(), 0.0);
    std::copy(windowed.begin(), windowed.end(), padded_.begin());
    fft_.fwd(spectrum_, padded_);
    for (int k = 0; k <= fft_size_ / 2; ++k) power_(k) = std::norm(spectrum_[static_cast<std::size_t>(k)]);
    return power_;
  }

  Vector log_mel(std::span<const double> windowed) {
    Vector e = bank_.apply(power_spectrum(windowed));
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = std::log(std::max(e(i), floor_));
    return e;
  }

 private:
  int fft_size_;
  MelFilterbank bank_;
  double floor_;
  Eigen::FFT<double> fft_;
  std::vector<double> padded_;
  std::vector<std::complex<double>> spectrum_;
  Vector power_;
};

/// Cepstra c0..c(num_coeffs-1) for each windowed frame (one per row).
inline FeatureMatrix mfcc(const Matrix& windowed_frames, int num_coeffs, const FrameConfig& frame_cfg,
                          const MfccConfig& cfg = {}) {
  if (num_coeffs < 1 || num_coeffs > cfg.mel_filters)
    fail(ErrorCategory::kConfig, "num_coeffs must lie in [1, mel_filters]");
  LogMelAnalyzer analyzer(static_cast<int>(windowed_frames.cols()), frame_cfg.sample_rate, cfg);
  const Matrix dct = dct_matrix(num_coeffs, cfg.mel_filters);
  Matrix out(windowed_frames.rows(), num_coeffs);
  std::vector<double> row(static_cast<std::size_t>(windowed_frames.cols()));
  for (Eigen::Index f = 0; f < windowed_frames.rows(); ++f) {
    for (Eigen::Index i = 0; i < windowed_frames.cols(); ++i) row[static_cast<std::size_t>(i)] = windowed_frames(f, i);
    out.row(f) = (dct * analyzer.log_mel(row)).transpose();
  }
  return FeatureMatrix(std::move(out), frame_cfg.frame_shift);
}

inline constexpr int kDeltaWindow = 2;

/// Regression delta of row t from rows t-2..t+2, indices clamped to the stream.
template <typename RowAt>
Vector delta_at(RowAt&& row_at, std::int64_t t, std::int64_t last) {
  double norm = 0.0;
  Vector d;
  for (int n = 1; n <= kDeltaWindow; ++n) {
    const auto plus = std::min(t + n, last);
    const auto minus = std::max<std::int64_t>(t - n, 0);
    Vector term = n * (row_at(plus) - row_at(minus));
    d = d.size() == 0 ? term : Vector(d + term);
    norm += 2.0 * n * n;
  }
  return d / norm;
}

/// [c, delta(c)] per frame.
inline FeatureMatrix append_deltas(const FeatureMatrix& in) {
  if (in.empty()) fail(ErrorCategory::kEmptyInput, "append_deltas needs at least one frame");
  const auto n = in.num_frames();
  const auto d = in.dim();
  Matrix out(n, 2 * d);
  auto row_at = [&](std::int64_t i) -> Vector { return in.frames.row(i).transpose(); };
  for (Eigen::Index t = 0; t < n; ++t) {
    out.row(t).head(d) = in.frames.row(t);
    out.row(t).tail(d) = delta_at(row_at, t, n - 1).transpose();
  }
  return FeatureMatrix(std::move(out), in.frame_shift, in.start_time);
}

enum class NormMode {
  kCentered,  // frames within +-window/2, truncated at stream edges
  kCausal,    // trailing window ending at the current frame
};

struct NormWindow {
  int before = 0;
  int after = 0;
};

inline NormWindow norm_window(double window_seconds, double frame_shift, NormMode mode) {
  if (!(window_seconds > 0.0)) fail(ErrorCategory::kConfig, "normalization window must be positive");
  if (mode == NormMode::kCentered) {
    const int half = static_cast<int>(std::lround(window_seconds / (2.0 * frame_shift)));
    return {half, half};
  }
  const int w = std::max(1, static_cast<int>(std::lround(window_seconds / frame_shift)));
  return {w - 1, 0};
}

/// Subtracts from each frame the per-coefficient mean of its window.
inline FeatureMatrix sliding_mean_normalize(const FeatureMatrix& in, double window_seconds = 3.0,
                                            NormMode mode = NormMode::kCentered) {
  const auto win = norm_window(window_seconds, in.frame_shift, mode);
  const auto n = in.num_frames();
  Matrix prefix = Matrix::Zero(n + 1, in.dim());
  for (Eigen::Index t = 0; t < n; ++t) prefix.row(t + 1) = prefix.row(t) + in.frames.row(t);
  Matrix out(n, in.dim());
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, t - win.before);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, t + win.after);
    out.row(t) = in.frames.row(t) - (prefix.row(hi + 1) - prefix.row(lo)) / static_cast<double>(hi - lo + 1);
  }
  return FeatureMatrix(std::move(out), in.frame_shift, in.start_time);
}

/// Streaming form of sliding_mean_normalize. Centered mode delays output by
/// window/2; causal mode emits each frame as soon as it is pushed.
class StreamingMeanNormalizer {
 public:
  StreamingMeanNormalizer(Eigen::Index dim, double window_seconds, double frame_shift, NormMode mode)
      : win_(norm_window(window_seconds, frame_shift, mode)), sum_(Vector::Zero(dim)) {}

  template <typename Sink>
  void push(const Vector& row, Sink&& sink) {
    rows_.push_back(row);
    sum_ += row;
    ++pushed_;
    while (next_ + win_.after < pushed_) emit(sink);
  }

  template <typename Sink>
  void finish(Sink&& sink) {
    while (next_ < pushed_) emit(sink);
  }

  std::int64_t latency_frames() const { return win_.after; }

 private:
  // rows_ holds frames [first_, pushed_); the window of next_ is
  // [max(0, next_ - before), min(pushed_ - 1, next_ + after)].
  template <typename Sink>
  void emit(Sink& sink) {
    const std::int64_t lo = std::max<std::int64_t>(0, next_ - win_.before);
    while (first_ < lo) {
      sum_ -= rows_.front();
      rows_.pop_front();
      ++first_;
    }
    const auto count = static_cast<double>(rows_.size());
    const Vector& cur = rows_[static_cast<std::size_t>(next_ - first_)];
    sink(Vector(cur - sum_ / count));
    ++next_;
  }

  NormWindow win_;
  Vector sum_;
  std::deque<Vector> rows_;
  std::int64_t first_ = 0;
  std::int64_t next_ = 0;
  std::int64_t pushed_ = 0;
};

/// Streaming regression deltas: emits [c, delta] once two frames of lookahead exist.
class StreamingDeltas {
 public:
  template <typename Sink>
  void push(const Vector& row, Sink&& sink) {
    rows_.push_back(row);
    ++pushed_;
    while (next_ + kDeltaWindow < pushed_) emit(sink, pushed_ - 1);
  }

  template <typename Sink>
  void finish(Sink&& sink) {
    while (next_ < pushed_) emit(sink, pushed_ - 1);
  }

 private:
  template <typename Sink>
  void emit(Sink& sink, std::int64_t last) {
    auto row_at = [&](std::int64_t i) -> const Vector& { return rows_[static_cast<std::size_t>(i - first_)]; };
    const Vector& c = row_at(next_);
    Vector out(2 * c.size());
    out << c, delta_at(row_at, next_, last);
    sink(out);
    ++next_;
    while (first_ < next_ - kDeltaWindow) {
      rows_.pop_front();
      ++first_;
    }
  }

  std::deque<Vector> rows_;
  std::int64_t first_ = 0;
  std::int64_t next_ = 0;
  std::int64_t pushed_ = 0;
};

/// Everything the two feature streams need.
struct FeatureConfig {
  FrameConfig frame;
  MfccConfig mfcc;
  int vad_coeffs = 16;
  int speaker_coeffs = 30;
  double norm_window = 3.0;
  NormMode norm_mode = NormMode::kCausal;
  bool normalize_speaker = true;

  int vad_dim() const { return 2 * vad_coeffs; }
  int speaker_dim() const { return 2 * speaker_coeffs; }
};

/// Output of the front end for one frame index.
struct FramePair {
  Vector vad;
  Vector speaker;
};

/// Audio samples in, aligned VAD and speaker feature frames out. Both streams
/// share framing, FFT and filterbank; only the DCT length differs.
class StreamingFeatureExtractor {
 public:
  explicit StreamingFeatureExtractor(const FeatureConfig& cfg)
      : cfg_(cfg),
        win_samples_(cfg.frame.window_samples()),
        shift_samples_(cfg.frame.shift_samples()),
        window_(hamming_window(win_samples_)),
        analyzer_(win_samples_, cfg.frame.sample_rate, cfg.mfcc),
        dct_vad_(dct_matrix(cfg.vad_coeffs, cfg.mfcc.mel_filters)),
        dct_spk_(dct_matrix(cfg.speaker_coeffs, cfg.mfcc.mel_filters)),
        norm_vad_(cfg.vad_dim(), cfg.norm_window, cfg.frame.frame_shift, cfg.norm_mode),
        norm_spk_(cfg.speaker_dim(), cfg.norm_window, cfg.frame.frame_shift, cfg.norm_mode),
        windowed_(static_cast<std::size_t>(win_samples_)) {
    cfg.frame.validate();
    if (cfg.vad_coeffs > cfg.mfcc.mel_filters || cfg.speaker_coeffs > cfg.mfcc.mel_filters)
      fail(ErrorCategory::kConfig, "cepstral count exceeds mel filter count");
  }

  void push(std::span<const float> samples) {
    if (finished_) fail(ErrorCategory::kState, "feature extractor already finished");
    pending_.insert(pending_.end(), samples.begin(), samples.end());
    std::size_t offset = 0;
    while (pending_.size() - offset >= static_cast<std::size_t>(win_samples_)) {
      analyze(std::span<const float>(pending_.data() + offset, static_cast<std::size_t>(win_samples_)));
      offset += static_cast<std::size_t>(shift_samples_);
    }
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(offset));
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    delta_vad_.finish([&](const Vector& v) { to_norm_vad(v); });
    delta_spk_.finish([&](const Vector& v) { to_norm_spk(v); });
    norm_vad_.finish([&](const Vector& v) { ready_vad_.push_back(v); });
    if (cfg_.normalize_speaker)
      norm_spk_.finish([&](const Vector& v) { ready_spk_.push_back(v); });
  }

  bool finished() const { return finished_; }
  std::int64_t frames_analyzed() const { return analyzed_; }

  /// Frames whose features are final and aligned in both streams.
  std::size_t ready() const { return std::min(ready_vad_.size(), ready_spk_.size()); }

  FramePair pop() {
    FramePair p{std::move(ready_vad_.front()), std::move(ready_spk_.front())};
    ready_vad_.pop_front();
    ready_spk_.pop_front();
    return p;
  }

 private:
  void analyze(std::span<const float> raw) {
    window_frame(raw, window_, cfg_.mfcc.pre_emphasis, windowed_);
    const Vector logmel = analyzer_.log_mel(windowed_);
    delta_vad_.push(dct_vad_ * logmel, [&](const Vector& v) { to_norm_vad(v); });
    delta_spk_.push(dct_spk_ * logmel, [&](const Vector& v) { to_norm_spk(v); });
    ++analyzed_;
  }

  void to_norm_vad(const Vector& v) {
    norm_vad_.push(v, [&](const Vector& o) { ready_vad_.push_back(o); });
  }
  void to_norm_spk(const Vector& v) {
    if (cfg_.normalize_speaker)
      norm_spk_.push(v, [&](const Vector& o) { ready_spk_.push_back(o); });
    else
      ready_spk_.push_back(v);
  }

  FeatureConfig cfg_;
  int win_samples_;
  int shift_samples_;
  std::vector<double> window_;
  LogMelAnalyzer analyzer_;
  Matrix dct_vad_;
  Matrix dct_spk_;
  StreamingDeltas delta_vad_;
  StreamingDeltas delta_spk_;
  StreamingMeanNormalizer norm_vad_;
  StreamingMeanNormalizer norm_spk_;
  std::vector<float> pending_;
  std::vector<double> windowed_;
  std::deque<Vector> ready_vad_;
  std::deque<Vector> ready_spk_;
  std::int64_t analyzed_ = 0;
  bool finished_ = false;
};

struct FeatureStreams {
  FeatureMatrix vad;
  FeatureMatrix speaker;
};

/// Whole-buffer extraction. Runs the streaming extractor so that training
/// features and online features are computed identically.
inline FeatureStreams extract_features(const AudioBuffer& audio, const FeatureConfig& cfg) {
  if (audio.sample_rate != cfg.frame.sample_rate)
    fail(ErrorCategory::kConfig, "audio sample rate differs from the pipeline rate");
  const auto n = count_frames(static_cast<std::int64_t>(audio.samples.size()),
                              cfg.frame.window_samples(), cfg.frame.shift_samples());
  if (n == 0) fail(ErrorCategory::kEmptyInput, "audio shorter than one analysis window");
  StreamingFeatureExtractor fx(cfg);
  fx.push(audio.samples);
  fx.finish();
  FeatureStreams out{FeatureMatrix(Matrix(n, cfg.vad_dim()), cfg.frame.frame_shift),
                     FeatureMatrix(Matrix(n, cfg.speaker_dim()), cfg.frame.frame_shift)};
  for (std::int64_t t = 0; t < n; ++t) {
    auto p = fx.pop();
    out.vad.frames.row(t) = p.vad.transpose();
    out.speaker.frames.row(t) = p.speaker.transpose();
  }
  return out;
}

}  // namespace streamdiar
