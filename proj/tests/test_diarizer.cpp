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

// Online decision loop: trigger timing, latency bound, match/update, two-halves
// test, cold start, eviction, finalize.

#include <gtest/gtest.h>

#include <random>

#include "streamdiar/diarizer.hpp"

namespace sd = streamdiar;

namespace {

// Embedding = normalized first-order sum of a one-component "UBM", so a buffer
// embeds to the direction of the sum of its block vectors.
sd::SpeakerEmbedding transparent(const sd::BaumWelchStats& s) {
  return {s.f.row(0).transpose().normalized(), s.frame_count};
}

sd::BaumWelchStats block(const sd::Vector& v) {
  sd::BaumWelchStats s;
  s.n = sd::Vector::Constant(1, 20.0);
  s.f = 20.0 * v.transpose();
  s.frame_count = 20;
  return s;
}

sd::Vector axis(int i, int d = 4) { return sd::Vector::Unit(d, i); }

struct Driver {
  sd::OnlineDiarizer dz;
  double t = 0.0;
  std::vector<sd::LabeledSegment> out;
  explicit Driver(sd::DiarizerConfig cfg = {}) : dz(cfg, transparent) {}

  std::size_t push(bool speech, const sd::Vector& v = axis(0)) {
    auto segs = dz.process_block(speech, block(v), t, t + 0.2);
    t += 0.2;
    out.insert(out.end(), segs.begin(), segs.end());
    return segs.size();
  }
  void finish() {
    auto segs = dz.finalize();
    out.insert(out.end(), segs.begin(), segs.end());
  }
};

}  // namespace

TEST(Timing, FiresAtTwelveSpeechBlocks) {
  Driver d;
  for (int i = 0; i < 11; ++i) {
    d.push(true);
    EXPECT_EQ(d.dz.decisions(), 0) << "block " << i;
  }
  d.push(true);
  EXPECT_EQ(d.dz.decisions(), 1);
  EXPECT_TRUE(d.dz.buffer().empty());
  ASSERT_EQ(d.out.size(), 1u);
  EXPECT_NEAR(d.out[0].start, 0.0, 1e-12);
  EXPECT_NEAR(d.out[0].end, 2.4, 1e-9);
}

TEST(Timing, FiresAtThirdNonspeechBlock) {
  Driver d;
  for (int i = 0; i < 4; ++i) d.push(true);
  d.push(false);
  d.push(false);
  EXPECT_EQ(d.dz.decisions(), 0);
  d.push(false);
  EXPECT_EQ(d.dz.decisions(), 1);
}

TEST(Timing, NonspeechAloneNeverDecides) {
  Driver d;
  for (int i = 0; i < 10; ++i) EXPECT_EQ(d.push(false), 0u);
  d.finish();
  EXPECT_EQ(d.dz.decisions(), 0);
  EXPECT_TRUE(d.out.empty());
}

TEST(Timing, SpeechResetsThePauseCounter) {
  Driver d;
  d.push(true);
  d.push(false);
  d.push(false);
  d.push(true);
  d.push(false);
  d.push(false);
  EXPECT_EQ(d.dz.decisions(), 0);
  d.push(false);
  EXPECT_EQ(d.dz.decisions(), 1);
}

TEST(Timing, ExactlyMaxSpeechThenFinalizeEmitsNothing) {
  Driver d;
  for (int i = 0; i < 12; ++i) d.push(true);
  const auto before = d.out.size();
  d.finish();
  EXPECT_EQ(d.out.size(), before);
  EXPECT_TRUE(d.dz.finalized());
  EXPECT_THROW(d.push(true), sd::Error);
}

TEST(Timing, FinalizeFlushesShortBuffer) {
  Driver d;
  d.push(true);
  d.push(true);
  d.finish();
  ASSERT_EQ(d.out.size(), 1u);
  EXPECT_NEAR(d.out[0].end - d.out[0].start, 0.4, 1e-9);
}

TEST(Timing, LatencyBoundOverRandomSequences) {
  const sd::DiarizerConfig cfg;
  const double bound = cfg.max_speech + cfg.max_nonspeech;
  std::mt19937_64 rng(2024);
  for (int seq = 0; seq < 1000; ++seq) {
    Driver d;
    std::bernoulli_distribution sp(std::uniform_real_distribution<double>(0.05, 0.95)(rng));
    std::uniform_int_distribution<int> who(0, 3);
    std::vector<double> pending;
    const int len = std::uniform_int_distribution<int>(1, 300)(rng);
    for (int b = 0; b < len; ++b) {
      const bool s = sp(rng);
      const double start = d.t;
      if (s) pending.push_back(start);
      const double now = start + 0.2;
      const auto n = d.push(s, axis(who(rng)));
      if (n) {
        for (double p : pending) ASSERT_LE(now - p, bound + 1e-9) << "sequence " << seq;
        pending.clear();
      }
      ASSERT_EQ(pending.size(), d.dz.buffer().blocks.size());
      ASSERT_LE(d.dz.buffer().speech_duration, cfg.max_speech + 1e-9);
    }
    d.finish();
    // Segments disjoint and ordered.
    for (std::size_t i = 0; i < d.out.size(); ++i) {
      EXPECT_GT(d.out[i].end, d.out[i].start);
      if (i) {
        EXPECT_GE(d.out[i].start, d.out[i - 1].end - 1e-9);
      }
    }
    // Only a cold-start split founds two models in one decision.
    EXPECT_LE(static_cast<std::int64_t>(d.dz.models().size()), d.dz.decisions() + 1);
  }
}

TEST(Timing, TooOldTriggerBoundsLongSparseSpeech) {
  // speech, nsp, nsp, speech, nsp, nsp, ... never reaches 2.4 s nor 0.6 s pause.
  Driver d;
  for (int i = 0; i < 15; ++i) {
    d.push(true);
    d.push(false);
    d.push(false);
    if (d.dz.decisions()) break;
  }
  EXPECT_EQ(d.dz.decisions(), 1);
  EXPECT_NEAR(d.t, 3.0, 1e-9);
}

TEST(Decide, NoModelsCreatesSpeakerWhenHalvesAgree) {
  Driver d;
  for (int i = 0; i < 12; ++i) d.push(true, axis(1));
  ASSERT_EQ(d.dz.models().size(), 1u);
  EXPECT_EQ(d.dz.events().back().path, sd::DecisionPath::kNew);
  EXPECT_NEAR(d.dz.models()[0].threshold, 0.5, 1e-12);
  EXPECT_EQ(d.out.back().speaker, d.dz.models()[0].id);
}

TEST(Decide, FirstDecisionWithDissimilarHalvesFoundsTwoSpeakers) {
  Driver d;
  for (int i = 0; i < 6; ++i) d.push(true, axis(0));
  for (int i = 0; i < 6; ++i) d.push(true, axis(1));
  ASSERT_EQ(d.dz.models().size(), 2u);
  ASSERT_EQ(d.out.size(), 2u);
  EXPECT_NEAR(d.out[0].end, 1.2, 1e-9);
  EXPECT_NE(d.out[0].speaker, d.out[1].speaker);
}

TEST(Decide, MatchPicksArgmaxAboveThreshold) {
  Driver d;
  sd::Vector a(4), b(4);
  const double c = 0.9, s = std::sqrt(1 - c * c);
  a << c, s, 0, 0;  // cosine 0.9 with e = axis(0)
  b << 0.2, 0, std::sqrt(1 - 0.04), 0;
  d.dz.add_model({"A", a, 0.5, 1, 0, 0});
  d.dz.add_model({"B", b, 0.5, 1, 0, 0});
  for (int i = 0; i < 12; ++i) d.push(true, axis(0));
  EXPECT_EQ(d.out.back().speaker, "A");
  EXPECT_EQ(d.dz.events().back().path, sd::DecisionPath::kMatch);
  EXPECT_NEAR(d.dz.events().back().score, 0.9, 1e-12);
  EXPECT_TRUE(d.dz.events().back().updated);
  EXPECT_EQ(d.dz.models()[0].n_updates, 2);
}

TEST(Decide, MatchBelowMarginDoesNotUpdate) {
  Driver d;
  sd::Vector a(4);
  a << 0.55, std::sqrt(1 - 0.55 * 0.55), 0, 0;
  d.dz.add_model({"A", a, 0.5, 1, 0, 0});
  for (int i = 0; i < 12; ++i) d.push(true, axis(0));
  EXPECT_EQ(d.out.back().speaker, "A");
  EXPECT_FALSE(d.dz.events().back().updated);
  EXPECT_EQ(d.dz.models()[0].centroid, a);
}

TEST(Decide, DissimilarHalvesAreForcedOntoNearestModels) {
  Driver d;
  d.dz.add_model({"A", axis(0), 0.99, 1, 0, 0});
  d.dz.add_model({"B", axis(1), 0.99, 1, 0, 0});
  for (int i = 0; i < 6; ++i) d.push(true, axis(0));
  for (int i = 0; i < 6; ++i) d.push(true, axis(1));
  ASSERT_EQ(d.out.size(), 2u);
  EXPECT_EQ(d.out[0].speaker, "A");
  EXPECT_EQ(d.out[1].speaker, "B");
  EXPECT_EQ(d.dz.events().back().path, sd::DecisionPath::kSplitAssign);
  EXPECT_EQ(d.dz.models().size(), 2u);
}

TEST(Decide, SimilarHalvesUnmatchedCreateNewModel) {
  Driver d;
  d.dz.add_model({"A", axis(0), 0.5, 1, 0, 0});
  for (int i = 0; i < 12; ++i) d.push(true, axis(2));
  EXPECT_EQ(d.dz.models().size(), 2u);
  EXPECT_EQ(d.out.back().speaker, d.dz.models()[1].id);
}

TEST(Decide, IdentityMatchAndScaleInvariance) {
  for (double scale : {1.0, 7.5}) {
    Driver d;
    d.dz.add_model({"A", axis(3), 0.5, 1, 0, 0});
    for (int i = 0; i < 12; ++i) d.push(true, scale * axis(3));
    EXPECT_EQ(d.out.back().speaker, "A");
    EXPECT_NEAR(d.dz.events().back().score, 1.0, 1e-12);
  }
}

TEST(Decide, HalfSplitIsExactReSum) {
  Driver d;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 7; ++i) {
    sd::Vector v(4);
    v << g(rng), g(rng), g(rng), g(rng);
    d.push(true, v);
  }
  const auto& buf = d.dz.buffer();
  sd::BaumWelchStats sum = buf.blocks[0].stats;
  for (std::size_t i = 1; i < buf.blocks.size(); ++i) sum += buf.blocks[i].stats;
  EXPECT_LE((sum.f - buf.stats.f).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(buf.speech_duration, 1.4, 1e-9);
  EXPECT_EQ(sd::OnlineDiarizer::split_point(buf), 4u);  // 0.8 s >= 0.7 s
}

TEST(UpdateModel, FixedPointAndThresholdFormula) {
  const sd::DiarizerConfig cfg;
  sd::SpeakerModel m{"A", axis(0), 0.5, 3, 100, 0};
  sd::SpeakerEmbedding e{axis(0), 20};
  sd::update_model(m, e, 0.6, 20, cfg);
  EXPECT_LE((m.centroid - axis(0)).norm(), 1e-12);
  EXPECT_NEAR(m.threshold, 0.5 + 0.1 * (0.6 - 0.1 - 0.5), 1e-15);
  EXPECT_EQ(m.n_updates, 4);
  EXPECT_EQ(m.total_frames, 120);
  sd::SpeakerModel low{"B", axis(0), 0.5, 1, 0, 0};
  EXPECT_THROW(sd::update_model(low, e, 0.55, 20, cfg), sd::Error);
}

TEST(UpdateModel, MovementBoundedByRunningMean) {
  const sd::DiarizerConfig cfg;
  sd::SpeakerModel m{"A", axis(0), 0.0, 99, 0, 0};
  sd::update_model(m, {axis(1), 1}, 0.5, 1, cfg);
  EXPECT_LE((m.centroid - axis(0)).norm(), 2.0 / 100.0);
  EXPECT_NEAR(m.centroid.norm(), 1.0, 1e-9);
}

TEST(Eviction, CapHoldsAndNewestSurvives) {
  sd::DiarizerConfig cfg;
  cfg.max_speakers = 3;
  Driver d(cfg);
  for (int s = 0; s < 6; ++s) {
    for (int i = 0; i < 12; ++i) d.push(true, sd::Vector::Unit(8, s));
    EXPECT_LE(d.dz.models().size(), 3u);
    EXPECT_EQ(d.dz.models().back().id, d.out.back().speaker);
  }
}

TEST(Config, Validation) {
  sd::DiarizerConfig c;
  c.max_speech = 2.5;
  EXPECT_THROW(c.validate(), sd::Error);
  c = {};
  c.theta0 = 1.0;
  EXPECT_THROW(c.validate(), sd::Error);
  c = {};
  c.tau_split = -0.1;
  EXPECT_THROW(c.validate(), sd::Error);
  c = {};
  EXPECT_EQ(c.blocks_for(c.max_speech), 12);
  EXPECT_EQ(c.blocks_for(c.max_nonspeech), 3);
}

TEST(Determinism, SameBlocksSameLabels) {
  auto run = [] {
    Driver d;
    std::mt19937_64 rng(5);
    std::bernoulli_distribution sp(0.7);
    std::uniform_int_distribution<int> who(0, 2);
    for (int i = 0; i < 400; ++i) d.push(sp(rng), axis(who(rng)) + 0.3 * axis(3));
    d.finish();
    return d.out;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].speaker, b[i].speaker);
    EXPECT_EQ(a[i].start, b[i].start);
  }
}
