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

// Synthetic multi-speaker audio for desk-scale testing.
//
// A "voice" is a glottal pulse train plus aspiration noise, shaped by a
// speaker-specific spectral tilt and a cascade of formant resonators. Vowel
// targets are shared across voices and scaled by a per-voice vocal-tract
// factor plus per-formant offsets, so voices differ in spectral envelope while
// sharing a phonetic inventory. Silence is low-level background noise.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "streamdiar/error.hpp"
#include "streamdiar/scoring.hpp"
#include "streamdiar/wav.hpp"

namespace streamdiar {

struct VoiceParams {
  double f0 = 120.0;
  double tract_scale = 1.0;
  std::array<double, 4> formant_offset{};  // Hz, added after scaling
  std::array<double, 4> bandwidth{80.0, 100.0, 120.0, 150.0};
  double tilt = 0.5;        // one-pole low-pass coefficient
  double noise_mix = 0.1;   // aspiration share of the excitation
  double level = 0.1;       // target RMS
};

/// Voices are a deterministic function of (pool seed, index, separation).
inline VoiceParams make_voice(std::uint64_t pool_seed, int index, double separation) {
  std::mt19937_64 rng(pool_seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(index) * 7919ULL + 17ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  VoiceParams v;
  v.f0 = 95.0 + 140.0 * u01(rng);
  v.tract_scale = 1.0 + 0.18 * separation * u(rng);
  for (auto& o : v.formant_offset) o = 120.0 * separation * u(rng);
  for (std::size_t i = 0; i < v.bandwidth.size(); ++i) v.bandwidth[i] *= 0.7 + 0.6 * u01(rng);
  v.tilt = std::clamp(0.45 + 0.35 * separation * u(rng), 0.05, 0.9);
  v.noise_mix = 0.05 + 0.25 * u01(rng);
  v.level = 0.08 * (0.8 + 0.4 * u01(rng));
  return v;
}

namespace synth_detail {

// F1..F3 targets of five vowels; F4 is fixed.
inline constexpr std::array<std::array<double, 3>, 5> kVowels{{
    {730.0, 1090.0, 2440.0},
    {270.0, 2290.0, 3010.0},
    {300.0, 870.0, 2240.0},
    {530.0, 1840.0, 2480.0},
    {570.0, 840.0, 2410.0},
}};

struct Resonator {
  double a1 = 0.0, a2 = 0.0, gain = 1.0;
  double y1 = 0.0, y2 = 0.0;

  void tune(double freq, double bw, int rate) {
    const double r = std::exp(-std::numbers::pi * bw / rate);
    const double theta = 2.0 * std::numbers::pi * freq / rate;
    a1 = 2.0 * r * std::cos(theta);
    a2 = -r * r;
    gain = 1.0 - r;
  }
  double step(double x) {
    const double y = gain * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace synth_detail

/// Renders `seconds` of continuous speech-like sound for one voice, scaled to
/// the voice's target RMS. Deterministic in (voice, seed).
inline std::vector<float> render_voice(const VoiceParams& v, double seconds, int rate, std::uint64_t seed) {
  using namespace synth_detail;
  const auto n = static_cast<std::size_t>(std::max(0.0, std::round(seconds * rate)));
  std::vector<double> out(n, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> vowel_pick(0, static_cast<int>(kVowels.size()) - 1);

  std::array<Resonator, 4> res;
  double tilt_state = 0.0;
  double phase = 0.0;
  std::size_t i = 0;
  while (i < n) {
    const auto syl = static_cast<std::size_t>((0.12 + 0.13 * u01(rng)) * rate);
    const auto& vw = kVowels[static_cast<std::size_t>(vowel_pick(rng))];
    for (std::size_t f = 0; f < 4; ++f) {
      const double base = f < 3 ? vw[f] : 3500.0;
      const double freq = std::clamp(base * v.tract_scale + v.formant_offset[f], 150.0, 0.45 * rate);
      res[f].tune(freq, v.bandwidth[f], rate);
    }
    const double f0 = v.f0 * (0.92 + 0.16 * u01(rng));
    for (std::size_t k = 0; k < syl && i < n; ++k, ++i) {
      phase += f0 / rate;
      double pulse = 0.0;
      if (phase >= 1.0) {
        phase -= 1.0;
        pulse = 1.0;
      }
      double x = (1.0 - v.noise_mix) * pulse * 8.0 + v.noise_mix * gauss(rng);
      tilt_state = (1.0 - v.tilt) * x + v.tilt * tilt_state;
      x = tilt_state;
      for (auto& r : res) x = r.step(x) * 4.0;
      const double env = 0.45 + 0.55 * std::sin(std::numbers::pi * static_cast<double>(k) / static_cast<double>(syl));
      out[i] = x * env;
    }
  }
  double energy = 0.0;
  for (double s : out) energy += s * s;
  const double rms = n ? std::sqrt(energy / static_cast<double>(n)) : 0.0;
  const double scale = rms > 0.0 ? v.level / rms : 0.0;
  std::vector<float> f(n);
  for (std::size_t k = 0; k < n; ++k) f[k] = static_cast<float>(out[k] * scale);
  return f;
}

struct SyntheticSpec {
  int num_speakers = 3;
  double turn_min = 1.5;
  double turn_max = 6.0;
  double silence_ratio = 0.2;
  double overlap_ratio = 0.0;
  double duration = 120.0;
  std::uint64_t seed = 1;
  double separation = 1.0;      // spread of spectral envelopes between voices
  int speaker_offset = 0;       // first voice index in the pool
  std::uint64_t voice_seed = 2020;
  double noise_level = 0.002;   // background RMS
  int sample_rate = 16000;

  void validate() const {
    if (num_speakers < 1) fail(ErrorCategory::kConfig, "num_speakers must be >= 1");
    if (!(duration > 0.0)) fail(ErrorCategory::kConfig, "duration must be > 0");
    if (!(silence_ratio >= 0.0 && silence_ratio < 1.0)) fail(ErrorCategory::kConfig, "silence_ratio must lie in [0, 1)");
    if (!(overlap_ratio >= 0.0 && overlap_ratio < 1.0)) fail(ErrorCategory::kConfig, "overlap_ratio must lie in [0, 1)");
    if (!(turn_min > 0.0 && turn_max >= turn_min)) fail(ErrorCategory::kConfig, "need 0 < turn_min <= turn_max");
  }
};

struct SynthTurn {
  double start = 0.0;
  double duration = 0.0;
  int voice = 0;  // pool index
};

inline std::string voice_label(int voice) { return "voice" + std::to_string(voice); }

/// Lays out turns so that speech covers (1 - silence_ratio) of the duration.
inline std::vector<SynthTurn> plan_conversation(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> len(spec.turn_min, spec.turn_max);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  const double speech_total = (1.0 - spec.silence_ratio) * spec.duration;
  std::vector<double> lengths;
  double acc = 0.0;
  while (acc < speech_total - 1e-9) {
    double l = std::min(len(rng), speech_total - acc);
    if (l < 0.3 && !lengths.empty()) {
      lengths.back() += l;
    } else {
      lengths.push_back(l);
    }
    acc += l;
  }

  std::vector<double> gaps(lengths.size() + 1);
  double gsum = 0.0;
  for (auto& g : gaps) {
    g = expo(rng);
    gsum += g;
  }
  const double silence_total = spec.duration - speech_total;
  for (auto& g : gaps) g = gsum > 0.0 ? g / gsum * silence_total : 0.0;

  std::vector<SynthTurn> turns;
  double t = gaps[0];
  int prev = -1;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    int who = static_cast<int>(u01(rng) * spec.num_speakers) % spec.num_speakers;
    if (spec.num_speakers > 1 && who == prev) who = (who + 1 + static_cast<int>(u01(rng) * (spec.num_speakers - 1))) % spec.num_speakers;
    if (who == prev && spec.num_speakers > 1) who = (who + 1) % spec.num_speakers;
    double start = t;
    if (i > 0 && spec.overlap_ratio > 0.0 && u01(rng) < spec.overlap_ratio) {
      const auto& p = turns.back();
      const double shift = std::min(0.5 * p.duration, 1.0) * (0.3 + 0.7 * u01(rng));
      start = std::max(p.start + 0.1, p.start + p.duration - shift);
    }
    turns.push_back({start, lengths[i], spec.speaker_offset + who});
    prev = who;
    t = start + lengths[i] + gaps[i + 1];
  }
  return turns;
}

inline Timeline turns_to_timeline(const std::vector<SynthTurn>& turns, const std::string& file_id) {
  Timeline tl;
  tl.file_id = file_id;
  for (const auto& t : turns) tl.turns.push_back({t.start, t.duration, voice_label(t.voice)});
  return tl;
}

/// Mixes turns over background noise, writing the WAV in one-second chunks.
/// Each turn is rendered when the write position reaches it, so memory is
/// bounded by the longest turn.
inline void render_to_wav(const std::vector<SynthTurn>& turns, double duration, const SyntheticSpec& spec,
                          const std::filesystem::path& wav_path) {
  const int rate = spec.sample_rate;
  const auto total = static_cast<std::int64_t>(std::round(duration * rate));
  WavWriter writer(wav_path, rate);
  std::mt19937_64 noise_rng(spec.seed ^ 0xB5297A4D3F84D5B5ULL);
  std::normal_distribution<double> gauss(0.0, spec.noise_level);

  struct Active {
    std::int64_t begin;
    std::vector<float> samples;
  };
  std::vector<Active> active;
  std::size_t next_turn = 0;
  const std::int64_t chunk = rate;
  std::vector<float> buf;
  for (std::int64_t pos = 0; pos < total; pos += chunk) {
    const std::int64_t end = std::min(total, pos + chunk);
    buf.assign(static_cast<std::size_t>(end - pos), 0.0f);
    for (auto& s : buf) s = static_cast<float>(gauss(noise_rng));
    while (next_turn < turns.size() && static_cast<std::int64_t>(std::round(turns[next_turn].start * rate)) < end) {
      const auto& t = turns[next_turn];
      const auto voice = make_voice(spec.voice_seed, t.voice, spec.separation);
      active.push_back({static_cast<std::int64_t>(std::round(t.start * rate)),
                        render_voice(voice, t.duration, rate, spec.seed * 1000003ULL + next_turn)});
      ++next_turn;
    }
    for (const auto& a : active) {
      const std::int64_t lo = std::max(pos, a.begin);
      const std::int64_t hi = std::min(end, a.begin + static_cast<std::int64_t>(a.samples.size()));
      for (std::int64_t k = lo; k < hi; ++k)
        buf[static_cast<std::size_t>(k - pos)] += a.samples[static_cast<std::size_t>(k - a.begin)];
    }
    std::erase_if(active, [&](const Active& a) { return a.begin + static_cast<std::int64_t>(a.samples.size()) <= end; });
    writer.write(buf);
  }
  writer.close();
}

/// Conversation WAV plus its reference timeline.
inline Timeline synthesize_conversation(const SyntheticSpec& spec, const std::filesystem::path& wav_path,
                                        const std::string& file_id) {
  const auto turns = plan_conversation(spec);
  double end = spec.duration;
  for (const auto& t : turns) end = std::max(end, t.start + t.duration);
  render_to_wav(turns, end, spec, wav_path);
  return turns_to_timeline(turns, file_id);
}

struct CorpusSpec {
  int num_speakers = 10;
  int utterances_per_speaker = 2;
  double utterance_speech = 48.0;  // seconds of speech per recording
  double run_length = 3.0;         // mean length of one speech run
  std::uint64_t seed = 7;
  double separation = 1.0;
  int speaker_offset = 0;
  std::uint64_t voice_seed = 2020;
  double noise_level = 0.002;
  int sample_rate = 16000;
};

/// Single-speaker recordings in one directory per voice (directory name is
/// the speaker label): alternating silence and speech runs, with a reference
/// RTTM covering every file.
inline TimelineSet synthesize_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  TimelineSet refs;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int s = 0; s < spec.num_speakers; ++s) {
    const int voice = spec.speaker_offset + s;
    const auto dir = out_dir / voice_label(voice);
    std::filesystem::create_directories(dir);
    for (int k = 0; k < spec.utterances_per_speaker; ++k) {
      const int runs = std::max(1, static_cast<int>(std::lround(spec.utterance_speech / spec.run_length)));
      std::vector<SynthTurn> turns;
      double t = 0.5 + u01(rng);
      for (int r = 0; r < runs; ++r) {
        const double len = spec.utterance_speech / runs * (0.8 + 0.4 * u01(rng));
        turns.push_back({t, len, voice});
        t += len + 0.5 + u01(rng);
      }
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03d", voice_label(voice).c_str(), k);
      SyntheticSpec render;
      render.seed = spec.seed * 7907ULL + static_cast<std::uint64_t>(s) * 131ULL + static_cast<std::uint64_t>(k);
      render.separation = spec.separation;
      render.voice_seed = spec.voice_seed;
      render.noise_level = spec.noise_level;
      render.sample_rate = spec.sample_rate;
      render_to_wav(turns, t, render, dir / (std::string(name) + ".wav"));
      refs[name] = turns_to_timeline(turns, name);
    }
  }
  return refs;
}

}  // namespace streamdiar
