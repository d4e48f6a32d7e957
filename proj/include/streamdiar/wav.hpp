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

// RIFF/WAVE reading (PCM16 and float32, any channel count) with downmix,
// chunked reading for streaming use, and a streaming linear resampler.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "streamdiar/binary_io.hpp"
#include "streamdiar/error.hpp"

namespace streamdiar {

struct AudioBuffer {
  std::vector<float> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 16000;
  int channel_count = 1;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class WavSampleFormat { kPcm16, kFloat32 };

/// Incremental WAV reader. Holds only the file handle and a scratch buffer.
class WavReader {
 public:
  explicit WavReader(const std::filesystem::path& path) : path_(path) {
    is_.open(path, std::ios::binary);
    if (!is_) fail(ErrorCategory::kIo, "cannot open audio file: " + path.string());
    parse_header();
  }

  int sample_rate() const { return sample_rate_; }
  int channels() const { return channels_; }
  WavSampleFormat format() const { return format_; }
  std::uint64_t total_frames() const { return total_frames_; }
  std::uint64_t frames_left() const { return total_frames_ - frames_read_; }

  /// Reads up to max_frames sample frames, downmixed to mono, appended to out.
  std::size_t read(std::vector<float>& out, std::size_t max_frames) {
    const std::size_t n = static_cast<std::size_t>(
        std::min<std::uint64_t>(max_frames, frames_left()));
    if (n == 0) return 0;
    const std::size_t bytes_per_frame = static_cast<std::size_t>(channels_) * bytes_per_sample();
    raw_.resize(n * bytes_per_frame);
    is_.read(reinterpret_cast<char*>(raw_.data()), static_cast<std::streamsize>(raw_.size()));
    const std::size_t got_frames = static_cast<std::size_t>(is_.gcount()) / bytes_per_frame;
    out.reserve(out.size() + got_frames);
    const float inv_channels = 1.0f / static_cast<float>(channels_);
    for (std::size_t f = 0; f < got_frames; ++f) {
      const unsigned char* p = raw_.data() + f * bytes_per_frame;
      float acc = 0.0f;
      for (int c = 0; c < channels_; ++c) acc += sample_at(p, c);
      out.push_back(channels_ == 1 ? acc : acc * inv_channels);
    }
    frames_read_ += got_frames;
    if (got_frames < n) total_frames_ = frames_read_;  // truncated file
    return got_frames;
  }

 private:
  std::size_t bytes_per_sample() const { return format_ == WavSampleFormat::kPcm16 ? 2 : 4; }

  float sample_at(const unsigned char* frame, int channel) const {
    if (format_ == WavSampleFormat::kPcm16) {
      std::int16_t v;
      std::memcpy(&v, frame + 2 * channel, 2);
      return static_cast<float>(v) / 32768.0f;
    }
    float v;
    std::memcpy(&v, frame + 4 * channel, 4);
    return v;
  }

  void parse_header() {
    char riff[4];
    is_.read(riff, 4);
    if (!is_ || std::string(riff, 4) != "RIFF") bad("missing RIFF tag");
    read_u32();
    char wave[4];
    is_.read(wave, 4);
    if (!is_ || std::string(wave, 4) != "WAVE") bad("missing WAVE tag");

    bool have_fmt = false;
    std::uint16_t audio_format = 0, bits = 0;
    while (true) {
      char id[4];
      is_.read(id, 4);
      if (!is_) bad(have_fmt ? "missing data chunk" : "missing fmt chunk");
      const std::uint32_t size = read_u32();
      const std::string tag(id, 4);
      if (tag == "fmt ") {
        if (size < 16) bad("fmt chunk too small");
        audio_format = read_u16();
        channels_ = read_u16();
        sample_rate_ = static_cast<int>(read_u32());
        read_u32();  // byte rate
        read_u16();  // block align
        bits = read_u16();
        std::uint32_t consumed = 16;
        if (audio_format == 0xFFFE && size >= 40) {
          read_u16();  // cbSize
          read_u16();  // valid bits
          read_u32();  // channel mask
          audio_format = read_u16();  // first two bytes of the subformat GUID
          consumed = 26;
        }
        is_.seekg(size - consumed + (size & 1u), std::ios::cur);
        have_fmt = true;
      } else if (tag == "data") {
        if (!have_fmt) bad("data chunk before fmt chunk");
        if (audio_format == 1 && bits == 16) {
          format_ = WavSampleFormat::kPcm16;
        } else if (audio_format == 3 && bits == 32) {
          format_ = WavSampleFormat::kFloat32;
        } else {
          fail(ErrorCategory::kUnsupported,
               path_.string() + ": unsupported codec (format " + std::to_string(audio_format) +
                   ", " + std::to_string(bits) + " bits); need PCM16 or float32");
        }
        if (channels_ < 1) bad("zero channels");
        if (sample_rate_ < 1) bad("zero sample rate");
        const auto data_start = is_.tellg();
        is_.seekg(0, std::ios::end);
        const auto file_end = is_.tellg();
        is_.seekg(data_start);
        const std::uint64_t available = static_cast<std::uint64_t>(file_end - data_start);
        const std::uint64_t bytes = std::min<std::uint64_t>(size, available);
        total_frames_ = bytes / (static_cast<std::uint64_t>(channels_) * bytes_per_sample());
        if (total_frames_ == 0) fail(ErrorCategory::kEmptyInput, path_.string() + ": zero-length audio");
        return;
      } else {
        is_.seekg(size + (size & 1u), std::ios::cur);
      }
    }
  }

  std::uint32_t read_u32() {
    std::uint32_t v = 0;
    is_.read(reinterpret_cast<char*>(&v), 4);
    if (!is_) bad("truncated header");
    return v;
  }
  std::uint16_t read_u16() {
    std::uint16_t v = 0;
    is_.read(reinterpret_cast<char*>(&v), 2);
    if (!is_) bad("truncated header");
    return v;
  }
  [[noreturn]] void bad(const std::string& why) {
    fail(ErrorCategory::kFormat, path_.string() + ": not a RIFF/WAVE file (" + why + ")");
  }

  std::filesystem::path path_;
  std::ifstream is_;
  int sample_rate_ = 0;
  int channels_ = 0;
  WavSampleFormat format_ = WavSampleFormat::kPcm16;
  std::uint64_t total_frames_ = 0;
  std::uint64_t frames_read_ = 0;
  std::vector<unsigned char> raw_;
};

/// Linear-interpolation resampler usable on a stream of chunks.
/// Output sample j sits at input position j * in_rate / out_rate; a sample is
/// emitted once both neighbours are available, so n inputs yield
/// floor((n - 1) * out_rate / in_rate) + 1 outputs.
class LinearResampler {
 public:
  LinearResampler(int in_rate, int out_rate)
      : in_rate_(in_rate), out_rate_(out_rate) {
    if (in_rate <= 0 || out_rate <= 0) fail(ErrorCategory::kConfig, "sample rates must be positive");
  }

  void process(std::span<const float> in, std::vector<float>& out) {
    if (in_rate_ == out_rate_) {
      out.insert(out.end(), in.begin(), in.end());
      return;
    }
    pending_.insert(pending_.end(), in.begin(), in.end());
    const std::int64_t last = consumed_ + static_cast<std::int64_t>(pending_.size()) - 1;
    while (true) {
      // Exact integer position: next_ * in_rate / out_rate.
      const std::int64_t num = next_ * in_rate_;
      const std::int64_t base = num / out_rate_;
      const std::int64_t rem = num % out_rate_;
      if (base > last || (rem != 0 && base + 1 > last)) break;
      const float a = pending_[static_cast<std::size_t>(base - consumed_)];
      float v = a;
      if (rem != 0) {
        const float b = pending_[static_cast<std::size_t>(base + 1 - consumed_)];
        const double frac = static_cast<double>(rem) / out_rate_;
        v = static_cast<float>(a + (b - a) * frac);
      }
      out.push_back(v);
      ++next_;
    }
    // Drop inputs no longer reachable by future outputs.
    const std::int64_t keep_from = (next_ * in_rate_) / out_rate_;
    if (keep_from > consumed_) {
      const auto drop = static_cast<std::size_t>(std::min<std::int64_t>(
          keep_from - consumed_, static_cast<std::int64_t>(pending_.size())));
      pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(drop));
      consumed_ += static_cast<std::int64_t>(drop);
    }
  }

 private:
  std::int64_t in_rate_, out_rate_;
  std::int64_t next_ = 0;      // index of the next output sample
  std::int64_t consumed_ = 0;  // input index of pending_[0]
  std::vector<float> pending_;
};

inline AudioBuffer ingest_wav(const std::filesystem::path& path, int target_rate = 16000) {
  WavReader reader(path);
  std::vector<float> mono;
  mono.reserve(static_cast<std::size_t>(reader.total_frames()));
  while (reader.read(mono, 1 << 16) > 0) {
  }
  AudioBuffer buf;
  buf.channel_count = 1;
  buf.sample_rate = target_rate;
  if (reader.sample_rate() == target_rate) {
    buf.samples = std::move(mono);
  } else {
    LinearResampler rs(reader.sample_rate(), target_rate);
    rs.process(mono, buf.samples);
  }
  return buf;
}

/// Writes mono audio. PCM16 output is clipped to [-1, 1).
inline void write_wav(const std::filesystem::path& path, std::span<const float> samples,
                      int sample_rate, WavSampleFormat format = WavSampleFormat::kPcm16,
                      int channels = 1) {
  auto os = binio::open_out(path);
  const std::uint32_t bps = format == WavSampleFormat::kPcm16 ? 2 : 4;
  const std::uint32_t frames = static_cast<std::uint32_t>(samples.size() / channels);
  const std::uint32_t data_bytes = frames * bps * static_cast<std::uint32_t>(channels);
  os.write("RIFF", 4);
  binio::write<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  binio::write<std::uint32_t>(os, 16);
  binio::write<std::uint16_t>(os, format == WavSampleFormat::kPcm16 ? 1 : 3);
  binio::write<std::uint16_t>(os, static_cast<std::uint16_t>(channels));
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(sample_rate));
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(sample_rate) * bps * channels);
  binio::write<std::uint16_t>(os, static_cast<std::uint16_t>(bps * channels));
  binio::write<std::uint16_t>(os, static_cast<std::uint16_t>(bps * 8));
  os.write("data", 4);
  binio::write<std::uint32_t>(os, data_bytes);
  for (std::size_t i = 0; i < static_cast<std::size_t>(frames) * channels; ++i) {
    if (format == WavSampleFormat::kPcm16) {
      const float c = std::clamp(samples[i], -1.0f, 32767.0f / 32768.0f);
      binio::write(os, static_cast<std::int16_t>(std::lround(c * 32768.0f)));
    } else {
      binio::write(os, samples[i]);
    }
  }
  binio::check_written(os, path);
}

/// Streams mono PCM16 samples to disk and patches the header sizes on close.
class WavWriter {
 public:
  WavWriter(const std::filesystem::path& path, int sample_rate)
      : path_(path), os_(binio::open_out(path)) {
    write_wav_header(0, sample_rate);
  }
  ~WavWriter() {
    try {
      close();
    } catch (...) {
    }
  }

  void write(std::span<const float> samples) {
    for (float s : samples) {
      const float c = std::clamp(s, -1.0f, 32767.0f / 32768.0f);
      binio::write(os_, static_cast<std::int16_t>(std::lround(c * 32768.0f)));
    }
    frames_ += samples.size();
  }

  void close() {
    if (!os_.is_open()) return;
    os_.seekp(0);
    write_wav_header(static_cast<std::uint32_t>(frames_ * 2), rate_);
    binio::check_written(os_, path_);
    os_.close();
  }

 private:
  void write_wav_header(std::uint32_t data_bytes, int rate) {
    rate_ = rate;
    os_.write("RIFF", 4);
    binio::write<std::uint32_t>(os_, 36 + data_bytes);
    os_.write("WAVEfmt ", 8);
    binio::write<std::uint32_t>(os_, 16);
    binio::write<std::uint16_t>(os_, 1);
    binio::write<std::uint16_t>(os_, 1);
    binio::write<std::uint32_t>(os_, static_cast<std::uint32_t>(rate));
    binio::write<std::uint32_t>(os_, static_cast<std::uint32_t>(rate) * 2);
    binio::write<std::uint16_t>(os_, 2);
    binio::write<std::uint16_t>(os_, 16);
    os_.write("data", 4);
    binio::write<std::uint32_t>(os_, data_bytes);
  }

  std::filesystem::path path_;
  std::ofstream os_;
  std::size_t frames_ = 0;
  int rate_ = 16000;
};

}  // namespace streamdiar
