#include "vadasr/streamer.hpp"

#include <algorithm>

#include "json.hpp"
#include "vadasr/error.hpp"

namespace vadasr {

void validate_config(const StreamerConfig& c) {
  if (!(c.vad_threshold >= 0.0 && c.vad_threshold <= 1.0))
    throw ConfigError("vad_threshold must lie in [0, 1], got " + std::to_string(c.vad_threshold));
  if (c.min_speech_frames < 1) throw ConfigError("min speech length must be at least one frame");
  if (c.min_silence_frames < 1) throw ConfigError("min silence length must be at least one frame");
  if (c.max_chunk_frames < c.min_speech_frames)
    throw ConfigError("max chunk (" + std::to_string(c.max_chunk_frames) +
                      " frames) shorter than min speech (" + std::to_string(c.min_speech_frames) + ")");
  if (!(c.frame_duration_s > 0.0)) throw ConfigError("frame duration must be positive");
}

std::string cause_name(FlushCause cause) {
  switch (cause) {
    case FlushCause::kForcedLength: return "forced-length";
    case FlushCause::kEndOfUtterance: return "end-of-utterance";
    case FlushCause::kFinalize: return "finalize";
  }
  return "unknown";
}

std::string event_to_json(const SegmentEvent& e) {
  nlohmann::json j{{"start_s", e.start_s}, {"end_s", e.end_s}, {"text", e.text}, {"cause", cause_name(e.cause)}};
  return j.dump();
}

BoundaryTracker::BoundaryTracker(StreamerConfig cfg) : cfg_(cfg) { validate_config(cfg_); }

std::vector<Boundary> BoundaryTracker::advance(double score) {
  StreamerState& s = st_;
  const std::size_t t = s.scored++;
  const bool above = score >= cfg_.vad_threshold;
  std::vector<Boundary> out;
  if (cfg_.trim_silence && !s.speaking && s.c == s.b && !above) {
    s.c = s.b = 0;
    s.window_start = t + 1;
    return out;
  }
  ++s.c;
  s.b = above ? 0 : s.b + 1;
  if (s.c - s.b >= cfg_.min_speech_frames) s.speaking = true;
  const bool was_speaking = s.speaking;
  if (s.b >= cfg_.min_silence_frames) s.speaking = false;

  const std::size_t l = cfg_.max_chunk_frames;
  if (s.c - s.b >= l) {
    // only reachable on a speech frame, so b == 0 here; c - b can jump
    // past l when speech resumes after a pause
    while (s.c >= l) {
      out.push_back({s.window_start, s.window_start + l, FlushCause::kForcedLength});
      s.window_start += l;
      s.c -= l;
    }
  } else if (s.b >= cfg_.min_silence_frames && was_speaking) {
    if (s.c > s.b) out.push_back({s.window_start, s.window_start + (s.c - s.b), FlushCause::kEndOfUtterance});
    s.speaking = false;
    s.c = s.b = 0;
    s.window_start = t + 1;
  } else if (cfg_.trim_silence && !s.speaking && s.b >= cfg_.min_silence_frames) {
    s.c = s.b = 0;
    s.window_start = t + 1;
  }
  return out;
}

std::optional<Boundary> BoundaryTracker::finish() {
  StreamerState& s = st_;
  std::optional<Boundary> out;
  if (s.speaking && s.c > s.b)
    out = Boundary{s.window_start, s.window_start + (s.c - s.b), FlushCause::kFinalize};
  s.c = s.b = 0;
  s.speaking = false;
  s.window_start = s.scored;
  return out;
}

std::vector<Boundary> run_offline_reference(std::span<const double> scores, const StreamerConfig& cfg) {
  validate_config(cfg);
  // the window is [start, t]; speech inside it ends at last_above
  std::vector<Boundary> out;
  bool open = false, speaking = false, any_above = false;
  std::size_t start = 0, last_above = 0;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    const bool above = scores[t] >= cfg.vad_threshold;
    if (!open) {
      if (cfg.trim_silence && !speaking && !above) continue;
      open = true;
      start = t;
      any_above = false;
    }
    if (above) {
      last_above = t;
      any_above = true;
    }
    const std::size_t speech = any_above ? last_above - start + 1 : 0;
    const std::size_t silence = any_above ? t - last_above : t - start + 1;
    if (speech >= cfg.min_speech_frames) speaking = true;
    const bool eou = silence >= cfg.min_silence_frames && speaking;
    if (silence >= cfg.min_silence_frames) speaking = false;
    if (speech >= cfg.max_chunk_frames) {
      std::size_t left = speech;
      for (; left >= cfg.max_chunk_frames; left -= cfg.max_chunk_frames) {
        out.push_back({start, start + cfg.max_chunk_frames, FlushCause::kForcedLength});
        start += cfg.max_chunk_frames;
      }
      open = left > 0;
    } else if (eou) {
      if (speech > 0) out.push_back({start, start + speech, FlushCause::kEndOfUtterance});
      open = false;
    } else if (cfg.trim_silence && !speaking && silence >= cfg.min_silence_frames) {
      open = false;
    }
  }
  if (open && speaking && any_above) {
    const std::size_t speech = last_above - start + 1;
    out.push_back({start, start + speech, FlushCause::kFinalize});
  }
  return out;
}

ModelVadScorer::ModelVadScorer(const ModelParams& params, std::size_t batch, std::size_t history,
                               std::size_t lookahead)
    : params_(&params), batch_(std::max<std::size_t>(1, batch)), history_(history), lookahead_(lookahead) {}

std::vector<double> ModelVadScorer::push(std::span<const double> frame) {
  if (frame.size() != kSamplesPerLatent)
    throw DimensionError("vad scorer: frame of " + std::to_string(frame.size()) + " samples, expected " +
                         std::to_string(kSamplesPerLatent));
  ring_.emplace_back(frame.begin(), frame.end());
  ++received_;
  if (received_ < lookahead_) return {};
  const std::size_t ready = received_ - lookahead_;
  if (ready < released_ + batch_) return {};
  return score_up_to(ready);
}

std::vector<double> ModelVadScorer::flush() { return score_up_to(received_); }

std::vector<double> ModelVadScorer::score_up_to(std::size_t end) {
  if (end <= released_) return {};
  const std::size_t lo = released_ > history_ ? released_ - history_ : 0;
  const std::size_t hi = std::min(received_, end + lookahead_);
  Tensor win({hi - lo, kSamplesPerLatent});
  for (std::size_t t = lo; t < hi; ++t) std::copy(ring_[t - ring_base_].begin(), ring_[t - ring_base_].end(), win.row(t - lo).begin());
  std::vector<double> all = vad_score_frames(win, *params_);
  std::vector<double> out(all.begin() + (released_ - lo), all.begin() + (end - lo));
  released_ = end;
  const std::size_t keep_from = released_ > history_ ? released_ - history_ : 0;
  while (ring_base_ < keep_from) {
    ring_.pop_front();
    ++ring_base_;
  }
  return out;
}

std::vector<double> FixedScores::push(std::span<const double>) {
  if (next_ >= scores_.size())
    throw RangeError("no VAD score for frame " + std::to_string(next_) + " (have " +
                     std::to_string(scores_.size()) + ")");
  return {scores_[next_++]};
}

std::vector<std::string> event_violations(const std::vector<SegmentEvent>& events, const StreamerConfig& cfg) {
  std::vector<std::string> out;
  auto fail = [&](std::size_t i, const std::string& what) { out.push_back("event " + std::to_string(i) + ": " + what); };
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Boundary& bd = events[i].frames;
    const FrameRange& dec = events[i].decoded;
    if (bd.begin >= bd.end) fail(i, "empty span");
    if (bd.end - bd.begin > cfg.max_chunk_frames) fail(i, "span longer than capacity");
    if (bd.cause == FlushCause::kForcedLength && bd.end - bd.begin != cfg.max_chunk_frames)
      fail(i, "forced piece not at capacity");
    if (bd.cause == FlushCause::kFinalize && i + 1 != events.size()) fail(i, "finalize before the end");
    if (dec.begin > bd.begin || dec.end < bd.end) fail(i, "decoded range misses part of the span");
    if (i == 0) continue;
    const Boundary& prev = events[i - 1].frames;
    if (prev.end > bd.begin) fail(i, "overlaps the previous span");
    if (prev.cause == FlushCause::kEndOfUtterance && bd.begin < prev.end + cfg.min_silence_frames)
      fail(i, "less than B frames after an end of utterance");
    if (events[i - 1].decoded.end > dec.begin) fail(i, "frames decoded twice");
  }
  return out;
}

Streamer::Streamer(StreamerConfig cfg, VadScorer& scorer, const Recognizer* recognizer, double origin_offset_s)
    : tracker_(cfg), scorer_(&scorer), recognizer_(recognizer), origin_s_(origin_offset_s) {}

std::vector<SegmentEvent> Streamer::push_frame(std::span<const double> frame) {
  if (finalized_) throw UsageError("streamer: push_frame after finalize");
  const std::size_t index = received_;
  if (recognizer_) ring_.emplace_back(frame.begin(), frame.end());
  ++received_;
  std::vector<double> scores;
  try {
    scores = scorer_->push(frame);
  } catch (const Error& e) {
    throw Error(e.category(), "vad scorer failed at frame " + std::to_string(index) + ": " + e.what());
  } catch (const std::exception& e) {
    throw NumericError("vad scorer failed at frame " + std::to_string(index) + ": " + e.what());
  }
  std::vector<SegmentEvent> out;
  consume(scores, out);
  return out;
}

std::vector<SegmentEvent> Streamer::finalize() {
  std::vector<SegmentEvent> out;
  if (finalized_) return out;
  finalized_ = true;
  consume(scorer_->flush(), out);
  if (auto bd = tracker_.finish()) out.push_back(emit(*bd));
  return out;
}

void Streamer::consume(const std::vector<double>& scores, std::vector<SegmentEvent>& out) {
  for (double s : scores)
    for (const Boundary& bd : tracker_.advance(s)) out.push_back(emit(bd));
  prune();
}

SegmentEvent Streamer::emit(const Boundary& bd) {
  const StreamerConfig& cfg = tracker_.config();
  SegmentEvent e;
  e.frames = bd;
  e.cause = bd.cause;
  e.start_s = origin_s_ + static_cast<double>(bd.begin) * cfg.frame_duration_s;
  e.end_s = origin_s_ + static_cast<double>(bd.end) * cfg.frame_duration_s;
  if (recognizer_) {
    const std::size_t lo = std::max(ring_base_, bd.begin > cfg.splice_frames ? bd.begin - cfg.splice_frames : 0);
    const std::size_t hi = std::min(received_, bd.end + cfg.splice_frames);
    const std::size_t dim = ring_.front().size();
    Tensor win({hi - lo, dim});
    for (std::size_t t = lo; t < hi; ++t) std::copy(ring_[t - ring_base_].begin(), ring_[t - ring_base_].end(), win.row(t - lo).begin());
    // Onsets are where CTC spikes run early, so an utterance start may output
    // silent context back to whatever the previous event already decoded.
    const std::size_t out_lo = mid_utterance_ ? bd.begin : std::max(lo, decoded_until_);
    // The B silent frames after an end of utterance can never join a later body.
    std::size_t out_hi = hi;
    if (bd.cause == FlushCause::kForcedLength) out_hi = bd.end;
    if (bd.cause == FlushCause::kEndOfUtterance) out_hi = std::min(hi, bd.end + cfg.min_silence_frames);
    e.decoded = FrameRange{out_lo, out_hi};
    e.tokens = recognizer_->transcribe(win, FrameRange{out_lo - lo, out_hi - lo});
    e.text = join_tokens(e.tokens, recognizer_->params().vocab);
    decoded_until_ = out_hi;
  } else {
    e.decoded = FrameRange{bd.begin, bd.end};
  }
  mid_utterance_ = bd.cause == FlushCause::kForcedLength;
  return e;
}

void Streamer::prune() {
  const std::size_t ws = tracker_.state().window_start;
  const std::size_t splice = tracker_.config().splice_frames;
  const std::size_t keep_from = ws > splice ? ws - splice : 0;
  while (!ring_.empty() && ring_base_ < keep_from) {
    ring_.pop_front();
    ++ring_base_;
  }
  if (ring_.empty()) ring_base_ = std::max(ring_base_, std::min(keep_from, received_));
}

}  // namespace vadasr
