#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vadasr/error.hpp"
#include "vadasr/streamer.hpp"

namespace vadasr {
namespace {

StreamerConfig toy_config() {
  StreamerConfig c;
  c.vad_threshold = 0.5;
  c.min_speech_frames = 2;
  c.min_silence_frames = 3;
  c.max_chunk_frames = 10;
  return c;
}

struct Traced {
  Boundary bd;
  std::size_t emitted_at;  // index of the score that triggered it
};

std::vector<Traced> track(std::span<const double> scores, const StreamerConfig& cfg, bool finish = true) {
  BoundaryTracker tr(cfg);
  std::vector<Traced> out;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    auto bds = tr.advance(scores[t]);
    EXPECT_LE(tr.state().b, tr.state().c);
    if (cfg.trim_silence) EXPECT_LE(tr.state().c, cfg.max_chunk_frames + cfg.min_silence_frames);
    for (const auto& bd : bds) out.push_back({bd, t});
  }
  if (finish)
    if (auto bd = tr.finish()) out.push_back({*bd, scores.size()});
  return out;
}

std::vector<Boundary> boundaries(const std::vector<Traced>& t) {
  std::vector<Boundary> out;
  for (const auto& x : t) out.push_back(x.bd);
  return out;
}

// Alternating runs so that both speech and silence lengths straddle C, B, l.
std::vector<double> random_scores(Rng& rng, std::size_t max_len) {
  std::vector<double> s;
  const std::size_t n = rng.uniform_int(0, static_cast<long>(max_len));
  bool speech = rng.uniform() < 0.5;
  while (s.size() < n) {
    const std::size_t run = rng.uniform_int(1, 16);
    for (std::size_t i = 0; i < run && s.size() < n; ++i) {
      const double flip = rng.uniform() < 0.1;
      s.push_back((speech != flip) ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.4999));
    }
    speech = !speech;
  }
  return s;
}

StreamerConfig random_config(Rng& rng) {
  StreamerConfig c;
  c.vad_threshold = 0.5;
  c.min_speech_frames = rng.uniform_int(1, 6);
  c.min_silence_frames = rng.uniform_int(1, 8);
  c.max_chunk_frames = c.min_speech_frames + rng.uniform_int(0, 20);
  c.trim_silence = rng.uniform() < 0.7;
  return c;
}

TEST(Tracker, HandTracedUtterance) {
  std::vector<double> s{0.9, 0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1};
  BoundaryTracker tr(toy_config());
  std::vector<Traced> got;
  for (std::size_t t = 0; t < s.size(); ++t) {
    auto bds = tr.advance(s[t]);
    if (t == 1) EXPECT_TRUE(tr.state().speaking);  // second frame
    if (t == 0) EXPECT_FALSE(tr.state().speaking);
    for (const auto& bd : bds) got.push_back({bd, t});
  }
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].emitted_at, 7u);  // eighth frame, b reaches 3
  EXPECT_EQ(got[0].bd, (Boundary{0, 5, FlushCause::kEndOfUtterance}));
}

TEST(Tracker, LiteralCountersMatchTheHandTraceToo) {
  StreamerConfig cfg = toy_config();
  cfg.trim_silence = false;
  std::vector<double> s{0.9, 0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1};
  auto got = track(s, cfg);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].bd, (Boundary{0, 5, FlushCause::kEndOfUtterance}));
}

TEST(Tracker, SilenceOnlyEmitsNothing) {
  std::vector<double> s(100, 0.2);
  StreamerConfig cfg = toy_config();
  EXPECT_TRUE(track(s, cfg).empty());
  cfg.trim_silence = false;
  EXPECT_TRUE(track(s, cfg).empty());
}

TEST(Tracker, LongSpeechIsForcedAtCapacity) {
  std::vector<double> s(20, 0.9);
  auto got = track(s, toy_config(), false);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].bd, (Boundary{0, 10, FlushCause::kForcedLength}));
  EXPECT_EQ(got[0].emitted_at, 9u);
  EXPECT_EQ(got[1].bd, (Boundary{10, 20, FlushCause::kForcedLength}));
}

TEST(Tracker, OvershootingForcedFlushIsCutAtCapacity) {
  // l = 10, B = 3: 8 speech, 2 silence (still speaking), then speech makes
  // c - b jump from 8 to 11
  std::vector<double> s(8, 0.9);
  s.insert(s.end(), {0.1, 0.1, 0.9, 0.9});
  auto got = track(s, toy_config(), false);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].bd, (Boundary{0, 10, FlushCause::kForcedLength}));
  EXPECT_EQ(got[0].emitted_at, 10u);
  BoundaryTracker tr(toy_config());
  for (double v : s) tr.advance(v);
  EXPECT_EQ(tr.state().window_start, 10u);
  EXPECT_EQ(tr.state().c, 2u);
  // one pause of B-1 frames with l = 2 produces several pieces at once
  StreamerConfig cfg = toy_config();
  cfg.max_chunk_frames = 2;
  cfg.min_silence_frames = 5;
  std::vector<double> s2{0.9, 0.1, 0.1, 0.1, 0.1, 0.9};
  auto many = track(s2, cfg, false);
  ASSERT_EQ(many.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(many[i].bd, (Boundary{2 * i, 2 * i + 2, FlushCause::kForcedLength}));
    EXPECT_EQ(many[i].emitted_at, 5u);
  }
}

TEST(Tracker, ForcedFlushKeepsSpeaking) {
  BoundaryTracker tr(toy_config());
  for (int i = 0; i < 10; ++i) tr.advance(0.9);
  EXPECT_TRUE(tr.state().speaking);
  EXPECT_EQ(tr.state().c, 0u);
  // a one-frame tail after the forced flush still belongs to the utterance
  EXPECT_TRUE(tr.advance(0.9).empty());
  EXPECT_TRUE(tr.advance(0.1).empty());
  EXPECT_TRUE(tr.advance(0.1).empty());
  auto bd = tr.advance(0.1);
  ASSERT_EQ(bd.size(), 1u);
  EXPECT_EQ(bd[0], (Boundary{10, 11, FlushCause::kEndOfUtterance}));
  EXPECT_FALSE(tr.state().speaking);
}

TEST(Tracker, LeadingSilenceIsNotCountedAsSpeech) {
  // with the printed counters, c keeps growing through silence and the
  // first speech frame makes c - b jump past C
  std::vector<double> s(40, 0.1);
  s.push_back(0.9);
  for (int i = 0; i < 5; ++i) s.push_back(0.1);
  StreamerConfig cfg = toy_config();
  EXPECT_TRUE(track(s, cfg).empty());
  cfg.trim_silence = false;
  cfg.max_chunk_frames = 100;
  auto literal = track(s, cfg);
  ASSERT_FALSE(literal.empty());
  EXPECT_EQ(literal[0].bd.begin, 0u);
  EXPECT_EQ(literal[0].bd.end, 41u);
}

TEST(Tracker, FinalizeFlushesTrailingSpeechOnce) {
  BoundaryTracker tr(toy_config());
  for (int i = 0; i < 4; ++i) tr.advance(0.9);
  auto bd = tr.finish();
  ASSERT_TRUE(bd);
  EXPECT_EQ(*bd, (Boundary{0, 4, FlushCause::kFinalize}));
  EXPECT_FALSE(tr.finish());
}

TEST(Tracker, FinalizeAfterCompletedFlushIsSilent) {
  std::vector<double> s{0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1, 0.1};
  BoundaryTracker tr(toy_config());
  int events = 0;
  for (double v : s) events += static_cast<int>(tr.advance(v).size());
  EXPECT_EQ(events, 1);
  EXPECT_FALSE(tr.finish());
}

TEST(Tracker, ConfigValidation) {
  StreamerConfig c = toy_config();
  c.max_chunk_frames = 1;
  EXPECT_THROW(BoundaryTracker{c}, ConfigError);
  c = toy_config();
  c.min_silence_frames = 0;
  EXPECT_THROW(BoundaryTracker{c}, ConfigError);
  c = toy_config();
  c.vad_threshold = 1.5;
  EXPECT_THROW(BoundaryTracker{c}, ConfigError);
}

TEST(OfflineReference, EmptyAndAllSpeech) {
  StreamerConfig cfg = toy_config();
  EXPECT_TRUE(run_offline_reference({}, cfg).empty());
  for (std::size_t n : {1u, 2u, 5u}) {
    std::vector<double> s(n * cfg.max_chunk_frames, 0.95);
    auto got = run_offline_reference(s, cfg);
    ASSERT_EQ(got.size(), n);
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_EQ(got[i], (Boundary{i * 10, (i + 1) * 10, FlushCause::kForcedLength}));
  }
}

TEST(OfflineReference, MatchesTrackerOnRandomSequences) {
  Rng rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    StreamerConfig cfg = random_config(rng);
    auto s = random_scores(rng, 300);
    ASSERT_EQ(boundaries(track(s, cfg)), run_offline_reference(s, cfg)) << "trial " << trial;
  }
}

TEST(Invariants, HoldOnRandomSequences) {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    StreamerConfig cfg = random_config(rng);
    cfg.trim_silence = true;
    auto s = random_scores(rng, 400);
    auto got = track(s, cfg);
    for (std::size_t i = 0; i < got.size(); ++i) {
      const Boundary& bd = got[i].bd;
      ASSERT_LT(bd.begin, bd.end);
      ASSERT_LE(bd.end, s.size());
      if (i > 0) {
        ASSERT_LE(got[i - 1].bd.end, bd.begin);  // disjoint and ordered
      }
      // spans run speech to speech, except pieces cut from a forced flush
      if (bd.cause != FlushCause::kForcedLength) ASSERT_GE(s[bd.end - 1], cfg.vad_threshold);
      const bool continues = i > 0 && got[i - 1].bd.cause == FlushCause::kForcedLength &&
                             got[i - 1].bd.end == bd.begin;
      if (!continues) ASSERT_GE(s[bd.begin], cfg.vad_threshold);
      ASSERT_TRUE(bd.end - bd.begin >= cfg.min_speech_frames || continues) << "trial " << trial;
      if (bd.cause == FlushCause::kForcedLength) {
        ASSERT_EQ(bd.end - bd.begin, cfg.max_chunk_frames);
        ASSERT_LE(bd.end - 1, got[i].emitted_at);
        ASSERT_GE(s[got[i].emitted_at], cfg.vad_threshold);
      }
      if (bd.cause == FlushCause::kEndOfUtterance) {
        // latency: exactly B frames after the last speech frame
        ASSERT_EQ(got[i].emitted_at, bd.end - 1 + cfg.min_silence_frames);
        for (std::size_t t = bd.end; t <= got[i].emitted_at; ++t) ASSERT_LT(s[t], cfg.vad_threshold);
      }
    }
  }
}

TEST(Scorers, ModelScorerMatchesOfflineScoresExactly) {
  Rng rng(43);
  ModelParams p = init_model(ModelDims{}, {"a", "b", "c", "d", "e"}, 4);
  Tensor frames = testing::random_tensor(rng, {61, kSamplesPerLatent}, 0.3);
  std::vector<double> offline = vad_score_frames(frames, p);
  for (std::size_t batch : {1u, 3u, 8u, 100u}) {
    ModelVadScorer sc(p, batch);
    std::vector<double> got;
    for (std::size_t t = 0; t < frames.rows(); ++t) {
      auto part = sc.push(frames.row(t));
      got.insert(got.end(), part.begin(), part.end());
      EXPECT_LE(got.size(), t + 1);
    }
    auto rest = sc.flush();
    got.insert(got.end(), rest.begin(), rest.end());
    EXPECT_EQ(got, offline) << "batch " << batch;
  }
}

TEST(Scorers, ScorerFailureNamesTheFrame) {
  FixedScores sc({0.9, 0.9});
  Streamer st(toy_config(), sc);
  std::vector<double> frame(4, 0.0);
  st.push_frame(frame);
  st.push_frame(frame);
  try {
    st.push_frame(frame);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("frame 2"), std::string::npos) << e.what();
    EXPECT_EQ(e.category(), ErrorCategory::kData);
  }
}

TEST(Streamer, DelayedScoresGiveTheSameBoundaries) {
  Rng rng(44);
  ModelParams p = init_model(ModelDims{}, {"a", "b", "c", "d", "e"}, 5);
  Tensor frames = testing::random_tensor(rng, {150, kSamplesPerLatent}, 0.3);
  std::vector<double> scores = vad_score_frames(frames, p);
  StreamerConfig cfg;
  cfg.vad_threshold = 0.5;
  cfg.min_silence_frames = 6;
  cfg.max_chunk_frames = 25;
  // set the threshold at the median so there are segments
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  cfg.vad_threshold = sorted[sorted.size() / 2];
  ModelVadScorer sc(p, 8);
  Streamer st(cfg, sc);
  std::vector<Boundary> got;
  for (std::size_t t = 0; t < frames.rows(); ++t)
    for (auto& e : st.push_frame(frames.row(t))) got.push_back(e.frames);
  for (auto& e : st.finalize()) got.push_back(e.frames);
  EXPECT_EQ(got, run_offline_reference(scores, cfg));
  EXPECT_TRUE(st.finalize().empty());
}

TEST(Streamer, DecodesEventsWithBoundedBuffer) {
  Rng rng(45);
  ModelParams p = init_model(ModelDims{}, {"a", "b", "c", "d", "e"}, 6);
  Recognizer rec(p, BeamConfig{4, 0.0, 0.0, nullptr});
  std::vector<double> pattern;
  for (int u = 0; u < 6; ++u) {
    pattern.insert(pattern.end(), 20, 0.9);
    pattern.insert(pattern.end(), 40, 0.1);
  }
  FixedScores sc(pattern);
  StreamerConfig cfg;  // C=5, B=30, splice 32
  cfg.max_chunk_frames = 50;
  Streamer st(cfg, sc, &rec, 1.5);
  std::vector<SegmentEvent> events;
  std::size_t max_buffer = 0;
  for (std::size_t t = 0; t < pattern.size(); ++t) {
    auto row = testing::random_tensor(rng, {kSamplesPerLatent}, 0.3);
    for (auto& e : st.push_frame(row.data())) events.push_back(e);
    max_buffer = std::max(max_buffer, st.buffered_frames());
  }
  for (auto& e : st.finalize()) events.push_back(e);
  ASSERT_EQ(events.size(), 6u);
  for (std::size_t u = 0; u < 6; ++u) {
    EXPECT_EQ(events[u].cause, FlushCause::kEndOfUtterance);
    EXPECT_DOUBLE_EQ(events[u].start_s, 1.5 + 60.0 * u * 0.02);
    EXPECT_DOUBLE_EQ(events[u].end_s, 1.5 + (60.0 * u + 20) * 0.02);
    EXPECT_EQ(events[u].text, join_tokens(events[u].tokens, p.vocab));
  }
  EXPECT_LE(max_buffer, cfg.max_chunk_frames + cfg.min_silence_frames + cfg.splice_frames + 1);
  const std::string line = event_to_json(events[0]);
  EXPECT_NE(line.find("\"cause\":\"end-of-utterance\""), std::string::npos) << line;
  EXPECT_THROW(st.push_frame(std::vector<double>(kSamplesPerLatent)), UsageError);
}

TEST(Streamer, DecodedRangesNeverOverlap) {
  ModelParams p = init_model(ModelDims{}, {"a", "b", "c", "d", "e"}, 6);
  Recognizer rec(p, BeamConfig{2, 0.0, 0.0, nullptr});
  std::vector<double> pattern;
  for (int u = 0; u < 2; ++u) {
    pattern.insert(pattern.end(), 130, 0.9);
    pattern.insert(pattern.end(), 40, 0.1);
  }
  FixedScores sc(pattern);
  StreamerConfig cfg;
  cfg.max_chunk_frames = 50;
  Streamer st(cfg, sc, &rec);
  std::vector<SegmentEvent> events;
  std::vector<double> frame(kSamplesPerLatent, 0.01);
  for (std::size_t t = 0; t < pattern.size(); ++t)
    for (auto& e : st.push_frame(frame)) events.push_back(e);
  for (auto& e : st.finalize()) events.push_back(e);
  ASSERT_EQ(events.size(), 6u);
  // Forced pieces output exactly their body; utterance edges take the
  // unclaimed silence around them.
  const std::vector<FrameRange> want{{0, 50}, {50, 100}, {100, 160}, {160, 220}, {220, 270}, {270, 330}};
  for (std::size_t i = 0; i < events.size(); ++i) {
    EXPECT_EQ(events[i].decoded, want[i]) << i;
    EXPECT_LE(events[i].decoded.begin, events[i].frames.begin);
    EXPECT_GE(events[i].decoded.end, events[i].frames.end);
  }
  EXPECT_TRUE(event_violations(events, cfg).empty());
  events[4].decoded.begin = 210;
  events[1].frames.end = 110;
  auto v = event_violations(events, cfg);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(v[0], "event 1: span longer than capacity");
  EXPECT_EQ(v[1], "event 1: forced piece not at capacity");
  EXPECT_EQ(v[2], "event 1: decoded range misses part of the span");
  EXPECT_EQ(v[3], "event 2: overlaps the previous span");
  EXPECT_EQ(v[4], "event 4: frames decoded twice");
}

TEST(Streamer, StreamEndingMidSpeechGivesOneFinalEvent) {
  std::vector<double> pattern(8, 0.9);
  FixedScores sc(pattern);
  Streamer st(toy_config(), sc);
  std::vector<double> frame(4);
  for (std::size_t t = 0; t < pattern.size(); ++t) EXPECT_TRUE(st.push_frame(frame).empty());
  auto fin = st.finalize();
  ASSERT_EQ(fin.size(), 1u);
  EXPECT_EQ(fin[0].cause, FlushCause::kFinalize);
  EXPECT_TRUE(st.finalize().empty());
}

}  // namespace
}  // namespace vadasr
