#pragma once

#include <string>
#include <vector>

#include "vadasr/chunking.hpp"
#include "vadasr/corpus.hpp"
#include "vadasr/streamer.hpp"

namespace vadasr {

struct VadReport {
  double deter = 0.0, fa = 0.0, miss = 0.0;  // deter == fa + miss
  std::size_t n_total = 0, n_fa = 0, n_miss = 0;
};

// Frames within `collar_frames` of a reference speech/non-speech change
// are left out of every count.
VadReport vad_metrics(const Mask& ref, const Mask& hyp, std::size_t collar_frames = 0);
VadReport vad_report(std::size_t n_total, std::size_t n_fa, std::size_t n_miss);

struct ErrorCounts {
  std::size_t sub = 0, del = 0, ins = 0, ref_len = 0;
  ErrorCounts& operator+=(const ErrorCounts& o);
};

struct ErrorRateReport {
  double rate = 0.0, sub = 0.0, del = 0.0, ins = 0.0;  // rate == sub + del + ins
  std::size_t ref_len = 0;
};

// One minimal Levenshtein backtrace; ties prefer substitution (or match),
// then insertion, then deletion.
ErrorCounts edit_counts(const TokenSeq& ref, const TokenSeq& hyp);
ErrorRateReport error_rate(const ErrorCounts& counts);
ErrorRateReport token_error_rate(const TokenSeq& ref, const TokenSeq& hyp);

struct TimeSpan {
  double start_s = 0.0, end_s = 0.0;
};

Mask segments_to_mask(const std::vector<TimeSpan>& spans, std::size_t T, double frame_duration_s);
Mask segments_to_mask(const std::vector<SegmentEvent>& events, std::size_t T, double frame_duration_s);
std::vector<FrameRange> mask_to_runs(const Mask& mask);
std::vector<TimeSpan> runs_to_spans(const std::vector<FrameRange>& runs, double frame_duration_s);

std::string score_report_json(const VadReport& vad, const ErrorRateReport& cer, std::size_t n_utts);

}  // namespace vadasr
