#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vadasr/corpus.hpp"
#include "vadasr/model.hpp"
#include "vadasr/recognizer.hpp"

namespace vadasr {

struct StreamerConfig {
  double vad_threshold = 0.45;
  std::size_t min_speech_frames = 5;    // C
  std::size_t min_silence_frames = 30;  // B
  std::size_t max_chunk_frames = 250;   // l
  std::size_t splice_frames = 32;
  // Leading silence and sub-C blips are not accumulated into c. Off gives
  // the counters exactly as printed.
  bool trim_silence = true;
  double frame_duration_s = kCanonicalFrameSeconds;
};

void validate_config(const StreamerConfig& cfg);

enum class FlushCause { kForcedLength, kEndOfUtterance, kFinalize };
std::string cause_name(FlushCause cause);

struct Boundary {
  std::size_t begin = 0;  // absolute frames [begin, end)
  std::size_t end = 0;
  FlushCause cause = FlushCause::kEndOfUtterance;
  friend bool operator==(const Boundary&, const Boundary&) = default;
};

struct SegmentEvent {
  double start_s = 0.0;
  double end_s = 0.0;
  Boundary frames;
  // Rows whose posteriors were decoded: the body plus the splice context that
  // no other event outputs (before an utterance onset, after its end).
  FrameRange decoded;
  TokenSeq tokens;
  std::string text;
  FlushCause cause = FlushCause::kEndOfUtterance;
};

std::string event_to_json(const SegmentEvent& e);

// Score-free checks on an emitted event list: ordered disjoint spans, spans
// within capacity, B frames between an end of utterance and the next span,
// disjoint decoded ranges covering their bodies, finalize only last. Returns
// one message per violation.
std::vector<std::string> event_violations(const std::vector<SegmentEvent>& events, const StreamerConfig& cfg);

struct StreamerState {
  std::size_t c = 0;
  std::size_t b = 0;
  bool speaking = false;
  std::size_t window_start = 0;  // first frame counted in c
  std::size_t scored = 0;        // frames whose score has been consumed
};

// The counter machine on its own. A score usually yields at most one
// boundary; a forced flush that overshoots l is cut into l-frame pieces.
class BoundaryTracker {
 public:
  explicit BoundaryTracker(StreamerConfig cfg);
  std::vector<Boundary> advance(double score);
  std::optional<Boundary> finish();
  const StreamerState& state() const { return st_; }
  const StreamerConfig& config() const { return cfg_; }

 private:
  StreamerConfig cfg_;
  StreamerState st_;
};

// Straight loop over a complete score sequence, same semantics.
std::vector<Boundary> run_offline_reference(std::span<const double> scores, const StreamerConfig& cfg);

// Per-frame VAD scores, possibly released with delay.
class VadScorer {
 public:
  virtual ~VadScorer() = default;
  virtual std::vector<double> push(std::span<const double> frame) = 0;
  virtual std::vector<double> flush() = 0;
};

// Cheap model path in batches. Each frame is scored once `lookahead`
// frames past it have arrived, on a window with `history` frames before;
// both cover the encoder + VAD receptive field, so scores equal the
// offline vad_score_frames exactly.
class ModelVadScorer : public VadScorer {
 public:
  explicit ModelVadScorer(const ModelParams& params, std::size_t batch = 8,
                          std::size_t history = 4, std::size_t lookahead = 4);
  std::vector<double> push(std::span<const double> frame) override;
  std::vector<double> flush() override;

 private:
  std::vector<double> score_up_to(std::size_t end);
  const ModelParams* params_;
  std::size_t batch_, history_, lookahead_;
  std::deque<std::vector<double>> ring_;
  std::size_t ring_base_ = 0;  // absolute index of ring_.front()
  std::size_t received_ = 0;
  std::size_t released_ = 0;
};

// Replays precomputed scores, one per pushed frame.
class FixedScores : public VadScorer {
 public:
  explicit FixedScores(std::vector<double> scores) : scores_(std::move(scores)) {}
  std::vector<double> push(std::span<const double> frame) override;
  std::vector<double> flush() override { return {}; }

 private:
  std::vector<double> scores_;
  std::size_t next_ = 0;
};

// Online VAD&ASR: feeds scores to the tracker, keeps a frame ring for
// splice context and decodes each flushed span. Without a recognizer only
// boundaries are produced.
class Streamer {
 public:
  Streamer(StreamerConfig cfg, VadScorer& scorer, const Recognizer* recognizer = nullptr,
           double origin_offset_s = 0.0);

  std::vector<SegmentEvent> push_frame(std::span<const double> frame);
  std::vector<SegmentEvent> finalize();
  const StreamerState& state() const { return tracker_.state(); }
  std::size_t buffered_frames() const { return ring_.size(); }

 private:
  void consume(const std::vector<double>& scores, std::vector<SegmentEvent>& out);
  SegmentEvent emit(const Boundary& bd);
  void prune();

  BoundaryTracker tracker_;
  VadScorer* scorer_;
  const Recognizer* recognizer_;
  double origin_s_;
  std::deque<std::vector<double>> ring_;
  std::size_t ring_base_ = 0;
  std::size_t received_ = 0;
  std::size_t decoded_until_ = 0;
  bool mid_utterance_ = false;  // previous event was a forced piece
  bool finalized_ = false;
};

}  // namespace vadasr
