#pragma once

#include <string>
#include <vector>

#include "vadasr/decode.hpp"
#include "vadasr/metrics.hpp"
#include "vadasr/model.hpp"
#include "vadasr/streamer.hpp"

namespace vadasr {

// Oracle segmentation: each utterance decoded whole.
struct SegmentedReport {
  ErrorRateReport greedy;
  ErrorRateReport beam;
  VadReport vad;  // detector prob >= threshold vs reference mask
  std::size_t n_utts = 0;
};

SegmentedReport evaluate_segmented(const ModelParams& params, const Corpus& corpus,
                                   const BeamConfig& beam, double vad_threshold = 0.45,
                                   bool with_beam = true);

// Dev VAD only (encoder + VAD head).
VadReport evaluate_vad(const ModelParams& params, const Corpus& corpus, double vad_threshold = 0.45);

struct StreamingReport {
  double l_asr_s = 0.0;
  ErrorRateReport cer;  // concatenated events vs concatenated references
  VadReport vad;        // event spans vs stream mask
  std::size_t n_events = 0;
  std::size_t forced = 0;
};

struct StreamRun {
  std::vector<SegmentEvent> events;
  TokenSeq hypothesis;
};

// Pushes the stream frame by frame through model VAD scoring + Streamer.
StreamRun stream_audio(const ModelParams& params, const SampleBuffer& audio, const StreamerConfig& cfg,
                       const Recognizer* recognizer);

StreamingReport evaluate_streaming(const ModelParams& params, const LongStream& stream,
                                   StreamerConfig cfg, const BeamConfig& beam, double l_asr_s);

std::string to_json(const SegmentedReport& r);
std::string to_json(const StreamingReport& r);

}  // namespace vadasr
