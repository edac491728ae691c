#include <gtest/gtest.h>

#include <algorithm>
#include <functional>

#include "vadasr/error.hpp"
#include "vadasr/metrics.hpp"
#include "vadasr/rng.hpp"

namespace vadasr {
namespace {

// Plain recursive edit distance with memo, no backtrace.
std::size_t edit_distance_oracle(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  std::function<std::size_t(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    if (memo[i][j] >= 0) return memo[i][j];
    std::size_t best = rec(i + 1, j + 1) + (a[i] != b[j]);
    best = std::min(best, rec(i + 1, j) + 1);
    best = std::min(best, rec(i, j + 1) + 1);
    return memo[i][j] = static_cast<long>(best);
  };
  return rec(0, 0);
}

TEST(Vad, HandCountedExample) {
  VadReport r = vad_metrics({1, 1, 0, 0}, {1, 0, 0, 1});
  EXPECT_EQ(r.n_fa, 1u);
  EXPECT_EQ(r.n_miss, 1u);
  EXPECT_DOUBLE_EQ(r.deter, 0.5);
  EXPECT_DOUBLE_EQ(r.fa, 0.25);
  EXPECT_DOUBLE_EQ(r.miss, 0.25);
}

TEST(Vad, PerfectHypothesisAndErrors) {
  VadReport r = vad_metrics({0, 1, 1, 0, 1}, {0, 1, 1, 0, 1});
  EXPECT_EQ(r.deter, 0.0);
  EXPECT_THROW(vad_metrics({1, 0}, {1}), DimensionError);
  EXPECT_THROW(vad_metrics({}, {}), EmptyInput);
}

TEST(Vad, RatesAddUpLikeTable3) {
  // STL 4.7 + 18.6 = 23.3, MTL 5.3 + 12.5 = 17.8 (per-mille counts)
  VadReport stl = vad_report(1000, 47, 186);
  EXPECT_NEAR(stl.deter, 0.233, 1e-12);
  VadReport mtl = vad_report(1000, 53, 125);
  EXPECT_NEAR(mtl.deter, 0.178, 1e-12);
}

TEST(Vad, DeterIsFaPlusMissOnRandomMasks) {
  Rng rng(51);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = rng.uniform_int(1, 200);
    Mask ref(n), hyp(n);
    for (std::size_t t = 0; t < n; ++t) ref[t] = rng.uniform() < 0.5, hyp[t] = rng.uniform() < 0.5;
    VadReport r = vad_metrics(ref, hyp);
    EXPECT_EQ(r.deter, r.fa + r.miss);
    EXPECT_NEAR(r.deter, double(r.n_fa + r.n_miss) / double(r.n_total), 1e-15);
  }
}

TEST(Vad, CollarIgnoresFramesNearReferenceChanges) {
  Mask ref{0, 0, 0, 1, 1, 1, 0, 0, 0};
  Mask hyp{0, 0, 1, 1, 1, 1, 1, 0, 0};  // one frame early, one frame late
  EXPECT_EQ(vad_metrics(ref, hyp).n_fa, 2u);
  VadReport r = vad_metrics(ref, hyp, 1);
  EXPECT_EQ(r.n_fa, 0u);
  EXPECT_EQ(r.n_total, 5u);
}

TEST(Cer, SingleSubstitution) {
  ErrorRateReport r = token_error_rate({0, 1, 2}, {0, 9, 2});
  EXPECT_DOUBLE_EQ(r.rate, 1.0 / 3);
  EXPECT_DOUBLE_EQ(r.sub, 1.0 / 3);
  EXPECT_EQ(r.del, 0.0);
  EXPECT_EQ(r.ins, 0.0);
}

TEST(Cer, DecompositionAddsUpLikeTable5) {
  // Oracle row: 13.4 + 5.2 + 1.8 = 20.4
  ErrorRateReport r = error_rate(ErrorCounts{134, 52, 18, 1000});
  EXPECT_NEAR(r.rate, 0.204, 1e-12);
  EXPECT_EQ(r.rate, r.sub + r.del + r.ins);
}

TEST(Cer, TieBreakPrefersSubstitutionThenInsertion) {
  // "a" vs "b c": cost 2, reachable only as one sub plus one ins
  ErrorCounts c = edit_counts({0}, {1, 2});
  EXPECT_EQ(c.sub, 1u);
  EXPECT_EQ(c.ins, 1u);
  EXPECT_EQ(c.del, 0u);
  // "a b" vs "b a": 2 subs ties with del+ins; substitution wins
  ErrorCounts swap = edit_counts({0, 1}, {1, 0});
  EXPECT_EQ(swap.sub, 2u);
  EXPECT_EQ(swap.ins + swap.del, 0u);
}

TEST(Cer, MatchesIndependentOracleOnRandomPairs) {
  Rng rng(52);
  for (int trial = 0; trial < 1000; ++trial) {
    TokenSeq ref(rng.uniform_int(1, 20)), hyp(rng.uniform_int(0, 20));
    for (int& t : ref) t = static_cast<int>(rng.uniform_int(0, 3));
    for (int& t : hyp) t = static_cast<int>(rng.uniform_int(0, 3));
    ErrorCounts c = edit_counts(ref, hyp);
    ASSERT_EQ(c.sub + c.del + c.ins, edit_distance_oracle(ref, hyp));
    ASSERT_EQ(ref.size() - c.del + c.ins, hyp.size());  // backtrace is a real alignment
    ErrorRateReport r = error_rate(c);
    EXPECT_GE(r.rate, 0.0);
    EXPECT_LE(r.rate, double(ref.size() + hyp.size()) / double(ref.size()));
    EXPECT_EQ(token_error_rate(ref, ref).rate, 0.0);
  }
}

TEST(Cer, EmptyReferenceIsUndefined) {
  EXPECT_THROW(token_error_rate({}, {1}), EmptyInput);
  ErrorCounts total;
  total += edit_counts({0, 1}, {0});
  total += edit_counts({2}, {2, 2});
  EXPECT_EQ(total.ref_len, 3u);
  EXPECT_DOUBLE_EQ(error_rate(total).rate, 2.0 / 3);
}

TEST(Masks, SegmentsToMask) {
  EXPECT_EQ(segments_to_mask(std::vector<TimeSpan>{}, 5, 0.02), (Mask{0, 0, 0, 0, 0}));
  EXPECT_EQ(segments_to_mask(std::vector<TimeSpan>{{0.0, 0.1}}, 5, 0.02), (Mask{1, 1, 1, 1, 1}));
  EXPECT_EQ(segments_to_mask(std::vector<TimeSpan>{{0.02, 0.06}}, 5, 0.02), (Mask{0, 1, 1, 0, 0}));
  EXPECT_THROW(segments_to_mask(std::vector<TimeSpan>{{0.0, 0.2}}, 5, 0.02), RangeError);
  EXPECT_THROW(segments_to_mask(std::vector<TimeSpan>{{-0.1, 0.02}}, 5, 0.02), RangeError);
}

TEST(Masks, RunsRoundTrip) {
  Rng rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    Mask m(rng.uniform_int(0, 300));
    for (auto& v : m) v = rng.uniform() < 0.4;
    EXPECT_EQ(segments_to_mask(runs_to_spans(mask_to_runs(m), 0.02), m.size(), 0.02), m);
  }
}

TEST(Report, JsonHasAllFields) {
  const std::string j = score_report_json(vad_report(10, 1, 2), error_rate({1, 0, 0, 4}), 3);
  for (const char* key : {"deter", "fa", "miss", "cer", "sub", "del", "ins", "n_utts"})
    EXPECT_NE(j.find(std::string("\"") + key + "\""), std::string::npos) << key;
}

}  // namespace
}  // namespace vadasr
