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

// streamdiar: train, run, score and benchmark the streaming diarizer.

#include <sys/resource.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "streamdiar/config.hpp"
#include "streamdiar/error.hpp"
#include "streamdiar/pipeline.hpp"
#include "streamdiar/synth.hpp"

namespace sd = streamdiar;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
};

sd::PipelineConfig make_config(const Globals& g) {
  sd::PipelineConfig cfg = g.config_path.empty() ? sd::PipelineConfig{} : sd::load_config(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) sd::fail(sd::ErrorCategory::kUsage, "--set expects key=value, got '" + kv + "'");
    sd::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
  cfg.validate();
  return cfg;
}

std::ofstream open_text(const std::string& path) {
  if (!path.empty() && fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) sd::fail(sd::ErrorCategory::kIo, "cannot open " + path + " for writing");
  return os;
}

long peak_rss_kb() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return ru.ru_maxrss;
}

int exit_code(sd::ErrorCategory c) { return 10 + static_cast<int>(c); }

nlohmann::ordered_json report_json(const sd::DerReport& r, double jer) {
  nlohmann::ordered_json j;
  j["file_id"] = r.file_id;
  j["ms"] = r.ms;
  j["fa"] = r.fa;
  j["sc"] = r.sc;
  j["der"] = r.der;
  j["jer"] = jer;
  j["scored_time"] = r.scored_time;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming speaker diarization with GMM-UBM statistics"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file");
  app.add_option("--set", g.overrides, "override one configuration key (key=value)");
  app.add_option("--seed", g.seed, "override the configured seed");

  std::string data, bundle, space = "vad";
  auto* c_ubm = app.add_subcommand("train-ubm", "train a UBM on VAD or transformed speaker features");
  c_ubm->add_option("--space", space, "vad | speaker")->check(CLI::IsMember({"vad", "speaker"}));
  c_ubm->add_option("--data", data, "WAV directory or list")->required();
  c_ubm->add_option("--bundle", bundle, "model bundle directory")->required();

  auto* c_vad = app.add_subcommand("train-vad", "cluster VAD vectors into speech / non-speech");
  c_vad->add_option("--data", data)->required();
  c_vad->add_option("--bundle", bundle)->required();

  auto* c_tr = app.add_subcommand("train-transform", "phonetic UBM and discriminative transform");
  c_tr->add_option("--data", data)->required();
  c_tr->add_option("--bundle", bundle)->required();

  auto* c_emb = app.add_subcommand("train-embedder", "speaker network and merged projector");
  c_emb->add_option("--data", data, "directory with one subdirectory per speaker")->required();
  c_emb->add_option("--bundle", bundle)->required();

  auto* c_all = app.add_subcommand("train", "run every training stage in order on one corpus");
  c_all->add_option("--data", data, "directory with one subdirectory per speaker")->required();
  c_all->add_option("--bundle", bundle)->required();

  std::string input, output, events, vad_csv, timing;
  int jobs = 1;
  auto* c_dia = app.add_subcommand("diarize", "stream WAV files through the diarizer");
  c_dia->add_option("--bundle", bundle)->required();
  c_dia->add_option("--input", input, "WAV file, directory or list")->required();
  c_dia->add_option("--output", output, "RTTM output")->required();
  c_dia->add_option("--events", events, "JSON-lines decision log");
  c_dia->add_option("--vad-csv", vad_csv, "per-block VAD decisions");
  c_dia->add_option("--timing", timing, "JSON timing report");
  c_dia->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  std::string ref, hyp, json_out, collar_mode;
  double collar = -1.0;
  bool no_overlap = false;
  auto* c_score = app.add_subcommand("score", "DER and JER of a hypothesis RTTM");
  c_score->add_option("--ref", ref)->required();
  c_score->add_option("--hyp", hyp)->required();
  c_score->add_option("--collar", collar, "collar in seconds (default from config)");
  c_score->add_flag("--no-overlap", no_overlap, "exclude overlapped reference regions");
  c_score->add_option("--collar-mode", collar_mode, "all | keep-fa")->check(CLI::IsMember({"all", "keep-fa"}));
  c_score->add_option("--json", json_out, "write JSON report ('-' for stdout)");

  sd::SyntheticSpec spec;
  sd::CorpusSpec corpus;
  std::string out_dir, file_id = "conv";
  bool corpus_mode = false;
  auto* c_syn = app.add_subcommand("synth", "generate synthetic audio with reference RTTM");
  c_syn->add_option("--out", out_dir)->required();
  c_syn->add_flag("--corpus", corpus_mode, "per-speaker utterance directories instead of a conversation");
  auto* o_speakers = c_syn->add_option("--speakers", spec.num_speakers, "default 3, or 10 with --corpus");
  c_syn->add_option("--duration", spec.duration);
  c_syn->add_option("--turn-min", spec.turn_min);
  c_syn->add_option("--turn-max", spec.turn_max);
  c_syn->add_option("--silence-ratio", spec.silence_ratio);
  c_syn->add_option("--overlap-ratio", spec.overlap_ratio);
  c_syn->add_option("--separation", spec.separation);
  c_syn->add_option("--speaker-offset", spec.speaker_offset);
  c_syn->add_option("--file-id", file_id);
  c_syn->add_option("--utterances", corpus.utterances_per_speaker);
  c_syn->add_option("--utterance-speech", corpus.utterance_speech);

  double bench_seconds = 300.0;
  auto* c_bench = app.add_subcommand("bench", "real-time factor and peak memory of streaming diarization");
  c_bench->add_option("--bundle", bundle)->required();
  c_bench->add_option("--input", input, "WAV to process (default: synthesize one)");
  c_bench->add_option("--duration", bench_seconds, "seconds of synthetic audio when no input is given");
  c_bench->add_option("--work-dir", out_dir, "where to put the synthetic file");

  auto* c_dump = app.add_subcommand("dump-config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[" << sd::to_string(sd::ErrorCategory::kUsage) << "]: " << e.what() << '\n';
    return exit_code(sd::ErrorCategory::kUsage);
  }

  try {
    const sd::PipelineConfig cfg = make_config(g);

    if (*c_dump) {
      std::cout << sd::dump_config(cfg);
    } else if (*c_ubm) {
      sd::train_ubm_stage(cfg, space == "vad" ? sd::FeatureSpace::kVad : sd::FeatureSpace::kSpeaker, data, bundle);
    } else if (*c_vad) {
      sd::train_vad_stage(cfg, data, bundle);
    } else if (*c_tr) {
      sd::train_transform_stage(cfg, data, bundle);
    } else if (*c_emb || *c_all) {
      if (*c_all) {
        sd::train_ubm_stage(cfg, sd::FeatureSpace::kVad, data, bundle);
        sd::train_vad_stage(cfg, data, bundle);
        sd::train_transform_stage(cfg, data, bundle);
        sd::train_ubm_stage(cfg, sd::FeatureSpace::kSpeaker, data, bundle);
      }
      const auto s = sd::train_embedder_stage(cfg, data, bundle);
      std::printf("speakers=%zu examples=%zu train_accuracy=%.4f outside_linear=%.6f final_loss=%.6f\n",
                  s.speakers.size(), s.examples, s.training.train_accuracy, s.training.outside_linear_fraction,
                  s.training.epoch_loss.back());
    } else if (*c_dia) {
      const auto b = sd::Bundle::load(bundle, cfg);
      const auto wavs = sd::list_wavs(input);
      auto rttm = open_text(output);
      std::ofstream ev, vc;
      if (!events.empty()) ev = open_text(events);
      if (!vad_csv.empty()) vc = open_text(vad_csv);
      sd::DiarizeOutputs outs{&rttm, events.empty() ? nullptr : &ev, vad_csv.empty() ? nullptr : &vc};
      const auto results = sd::diarize_files(cfg, b, wavs, outs, jobs);
      double audio = 0.0, proc = 0.0;
      nlohmann::ordered_json tj;
      tj["files"] = nlohmann::ordered_json::array();
      for (const auto& r : results) {
        std::printf("%-24s audio=%8.2fs time=%7.3fs rtf=%.4f segments=%lld speakers=%zu\n", r.file_id.c_str(),
                    r.audio_seconds, r.processing_seconds, r.rtf(), static_cast<long long>(r.segments), r.speakers);
        audio += r.audio_seconds;
        proc += r.processing_seconds;
        tj["files"].push_back({{"file_id", r.file_id}, {"audio_seconds", r.audio_seconds},
                               {"processing_seconds", r.processing_seconds}, {"rtf", r.rtf()},
                               {"segments", r.segments}, {"speakers", r.speakers}});
      }
      const double pooled = audio > 0.0 ? proc / audio : 0.0;
      std::printf("%-24s audio=%8.2fs time=%7.3fs rtf=%.4f\n", "POOLED", audio, proc, pooled);
      tj["pooled_rtf"] = pooled;
      if (!timing.empty()) open_text(timing) << tj.dump(2) << '\n';
    } else if (*c_score) {
      auto der_opt = cfg.der_options();
      if (collar >= 0.0) der_opt.collar = collar;
      if (no_overlap) der_opt.score_overlap = false;
      if (collar_mode == "keep-fa") der_opt.collar_mode = sd::CollarMode::kKeepFalseAlarm;
      if (collar_mode == "all") der_opt.collar_mode = sd::CollarMode::kAllComponents;
      sd::JerOptions jer_opt;
      jer_opt.collar = cfg.jer_collar;
      const auto summary = sd::score_sets(sd::read_rttm(ref), sd::read_rttm(hyp), der_opt, jer_opt);
      // With --json - the table goes to stderr so stdout stays parseable.
      std::FILE* table = json_out == "-" ? stderr : stdout;
      std::fprintf(table, "%-24s %8s %8s %8s %8s %8s %10s\n", "file_id", "MS", "FA", "SC", "DER", "JER", "scored");
      nlohmann::ordered_json j;
      j["collar"] = der_opt.collar;
      j["files"] = nlohmann::ordered_json::array();
      for (const auto& f : summary.files) {
        std::fprintf(table, "%-24s %8.2f %8.2f %8.2f %8.2f %8.2f %10.3f\n", f.der.file_id.c_str(), f.der.ms, f.der.fa,
                    f.der.sc, f.der.der, f.jer, f.der.scored_time);
        j["files"].push_back(report_json(f.der, f.jer));
      }
      const auto& p = summary.pooled;
      std::fprintf(table, "%-24s %8.2f %8.2f %8.2f %8.2f %8.2f %10.3f\n", "POOLED", p.ms, p.fa, p.sc, p.der,
                  summary.pooled_jer, p.scored_time);
      auto pj = report_json(p, summary.pooled_jer);
      pj["file_id"] = "POOLED";
      j["pooled"] = pj;
      if (json_out == "-") {
        std::cout << j.dump(2) << '\n';
      } else if (!json_out.empty()) {
        open_text(json_out) << j.dump(2) << '\n';
      }
    } else if (*c_syn) {
      spec.seed = cfg.seed;
      if (corpus_mode) {
        if (o_speakers->count()) corpus.num_speakers = spec.num_speakers;
        corpus.seed = cfg.seed;
        corpus.separation = spec.separation;
        corpus.speaker_offset = spec.speaker_offset;
        const auto refs = sd::synthesize_corpus(corpus, out_dir);
        sd::write_rttm(fs::path(out_dir) / "reference.rttm", refs);
      } else {
        fs::create_directories(out_dir);
        const auto tl = sd::synthesize_conversation(spec, fs::path(out_dir) / (file_id + ".wav"), file_id);
        sd::write_rttm(fs::path(out_dir) / (file_id + ".rttm"), sd::TimelineSet{{file_id, tl}});
      }
    } else if (*c_bench) {
      const auto b = sd::Bundle::load(bundle, cfg);
      fs::path wav = input;
      if (wav.empty()) {
        const fs::path dir = out_dir.empty() ? fs::temp_directory_path() / "streamdiar_bench" : fs::path(out_dir);
        fs::create_directories(dir);
        wav = dir / "bench.wav";
        sd::SyntheticSpec s;
        s.duration = bench_seconds;
        s.seed = cfg.seed;
        sd::synthesize_conversation(s, wav, "bench");
      }
      const long rss_before = peak_rss_kb();
      const auto r = sd::diarize_file(cfg, b, wav, {});
      nlohmann::ordered_json j{{"file_id", r.file_id},
                               {"audio_seconds", r.audio_seconds},
                               {"processing_seconds", r.processing_seconds},
                               {"rtf", r.rtf()},
                               {"decisions", r.decisions},
                               {"speakers", r.speakers},
                               {"peak_rss_kb_before", rss_before},
                               {"peak_rss_kb", peak_rss_kb()}};
      std::cout << j.dump() << '\n';
    }
  } catch (const sd::Error& e) {
    std::cerr << "error[" << sd::to_string(e.category()) << "]: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
