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

// End-to-end runs of the command-line tool with a tiny model: exit codes,
// error categories, output formats.

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "streamdiar/scoring.hpp"
#include "streamdiar/wav.hpp"

namespace fs = std::filesystem;
namespace sd = streamdiar;

namespace {

struct CliResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("streamdiar_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "tiny.conf") << "ubm_components = 4\nphone_ubm_components = 4\nubm_iters = 3\n"
                                         "transform_dim = 20\nlayer_dims = 80,16,3\nepochs = 2\n";
    ASSERT_EQ(run({"synth", "--corpus", "--speakers", "3", "--utterances", "1", "--utterance-speech", "8",
                   "--out", (dir_ / "corpus").string()}).code, 0);
    const auto t = run({"train", "--data", (dir_ / "corpus").string(), "--bundle", (dir_ / "bundle").string()});
    ASSERT_EQ(t.code, 0) << t.err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static CliResult run(std::vector<std::string> args, bool with_config = true) {
    std::string cmd = STREAMDIAR_CLI;
    if (with_config) cmd += " --config '" + (dir_ / "tiny.conf").string() + "'";
    for (const auto& a : args) cmd += " '" + a + "'";
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    cmd += " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, UsageErrors) {
  auto r = run({});
  EXPECT_EQ(r.code, 18);
  EXPECT_NE(r.err.find("error[usage]"), std::string::npos);
  EXPECT_EQ(run({"diarize", "--bundle", "x"}).code, 18);
  EXPECT_EQ(run({"score", "--ref", "a", "--hyp", "b", "--collar-mode", "weird"}).code, 18);
  EXPECT_EQ(run({"--help"}, false).code, 0);
}

TEST_F(Cli, ErrorCategoriesMapToExitCodes) {
  auto r = run({"score", "--ref", (dir_ / "none.rttm").string(), "--hyp", (dir_ / "none.rttm").string()});
  EXPECT_EQ(r.code, 10);
  EXPECT_NE(r.err.find("error[io]"), std::string::npos);

  std::ofstream(dir_ / "bad.rttm") << "SPEAKER f 1 x 1 <NA> <NA> a <NA> <NA>\n";
  r = run({"score", "--ref", (dir_ / "bad.rttm").string(), "--hyp", (dir_ / "bad.rttm").string()});
  EXPECT_EQ(r.code, 11);
  EXPECT_NE(r.err.find("bad.rttm:1"), std::string::npos);

  r = run({"diarize", "--bundle", (dir_ / "no_bundle").string(), "--input", (dir_ / "x.wav").string(), "--output",
           (dir_ / "x.rttm").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_GE(r.code, 10);

  std::ofstream(dir_ / "broken.wav") << "RIFF....WAVEjunk";
  r = run({"diarize", "--bundle", (dir_ / "bundle").string(), "--input", (dir_ / "broken.wav").string(), "--output",
           (dir_ / "x.rttm").string()});
  EXPECT_EQ(r.code, 11) << r.err;

  r = run({"--set", "no_such_key=1", "dump-config"});
  EXPECT_EQ(r.code, 16);
}

TEST_F(Cli, DumpConfigReflectsOverrides) {
  const auto r = run({"--set", "theta0=0.3", "dump-config"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("theta0 = 0.3\n"), std::string::npos);
  EXPECT_NE(r.out.find("layer_dims = 80,16,3\n"), std::string::npos);
}

TEST_F(Cli, SilenceGivesEmptyRttm) {
  sd::write_wav(dir_ / "silence.wav", std::vector<float>(16000 * 5, 0.0f), 16000);
  const auto r = run({"diarize", "--bundle", (dir_ / "bundle").string(), "--input",
                      (dir_ / "silence.wav").string(), "--output", (dir_ / "silence.rttm").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(dir_ / "silence.rttm"));
  EXPECT_EQ(fs::file_size(dir_ / "silence.rttm"), 0u);
}

TEST_F(Cli, DiarizeAndScoreProduceWellFormedOutputs) {
  ASSERT_EQ(run({"synth", "--out", (dir_ / "conv").string(), "--duration", "20", "--file-id", "c1"}).code, 0);
  const auto hyp = dir_ / "c1.hyp.rttm";
  auto r = run({"diarize", "--bundle", (dir_ / "bundle").string(), "--input", (dir_ / "conv" / "c1.wav").string(),
                "--output", hyp.string(), "--events", (dir_ / "ev.jsonl").string(), "--vad-csv",
                (dir_ / "v.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;

  // Canonical RTTM: reparsing and rewriting is the identity.
  const auto text = slurp(hyp);
  std::istringstream is(text);
  std::ostringstream again;
  sd::write_rttm(again, sd::parse_rttm(is));
  EXPECT_EQ(again.str(), text);

  // One JSON object per line, times non-decreasing, model counts non-decreasing.
  std::ifstream ev(dir_ / "ev.jsonl");
  std::string line;
  double last = -1;
  int lines = 0;
  while (std::getline(ev, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("file_id"), "c1");
    EXPECT_GE(j.at("time").get<double>(), last);
    EXPECT_LE(j.at("span_start").get<double>(), j.at("span_end").get<double>());
    last = j.at("time").get<double>();
    ++lines;
  }
  EXPECT_GT(lines, 0);

  // 100 blocks of 0.2 s.
  std::ifstream csv(dir_ / "v.csv");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 100);

  r = run({"score", "--ref", (dir_ / "conv" / "c1.rttm").string(), "--hyp", hyp.string(), "--json", "-"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const auto& p = j.at("pooled");
  const double der = p.at("der"), ms = p.at("ms"), fa = p.at("fa"), sc = p.at("sc");
  EXPECT_NEAR(der, ms + fa + sc, 1e-9);
  EXPECT_NE(r.err.find("POOLED"), std::string::npos);

  r = run({"score", "--ref", (dir_ / "conv" / "c1.rttm").string(), "--hyp", (dir_ / "conv" / "c1.rttm").string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("0.00"), std::string::npos);
}

TEST_F(Cli, RerunsAreByteIdentical) {
  const auto in = (dir_ / "corpus").string();
  ASSERT_EQ(run({"diarize", "--bundle", (dir_ / "bundle").string(), "--input", in, "--output",
                 (dir_ / "r1.rttm").string()}).code, 0);
  ASSERT_EQ(run({"diarize", "--bundle", (dir_ / "bundle").string(), "--input", in, "--output",
                 (dir_ / "r2.rttm").string(), "--jobs", "2"}).code, 0);
  EXPECT_EQ(slurp(dir_ / "r1.rttm"), slurp(dir_ / "r2.rttm"));
}
