#include "vadasr/evaluate.hpp"

#include <exception>

#include "json.hpp"
#include "vadasr/chunking.hpp"
#include "vadasr/error.hpp"

namespace vadasr {
namespace {

Mask threshold(const std::vector<double>& probs, double theta) {
  Mask m(probs.size());
  for (std::size_t t = 0; t < probs.size(); ++t) m[t] = probs[t] >= theta;
  return m;
}

nlohmann::json cer_json(const ErrorRateReport& r) {
  return {{"cer", r.rate}, {"sub", r.sub}, {"del", r.del}, {"ins", r.ins}, {"ref_len", r.ref_len}};
}

nlohmann::json vad_json(const VadReport& r) {
  return {{"deter", r.deter}, {"fa", r.fa}, {"miss", r.miss}, {"n_total", r.n_total}};
}

}  // namespace

SegmentedReport evaluate_segmented(const ModelParams& params, const Corpus& corpus, const BeamConfig& beam,
                                   double vad_threshold, bool with_beam) {
  if (corpus.empty()) throw EmptyInput("evaluate: empty corpus");
  const auto n = static_cast<long>(corpus.size());
  struct One {
    ErrorCounts greedy, beam;
    std::size_t total = 0, fa = 0, miss = 0;
  };
  std::vector<One> parts(corpus.size());
  std::vector<std::exception_ptr> errors(corpus.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      const Utterance& u = corpus.utterances[i];
      FrameSequence fs = frame_stream(u.audio, kCanonicalFrameSeconds);
      ForwardArtifacts a = run_forward(params, fs.frames);
      parts[i].greedy = edit_counts(u.transcript, greedy_decode(a.log_posteriors));
      if (with_beam) parts[i].beam = edit_counts(u.transcript, beam_search(a.log_posteriors, beam).front().tokens);
      VadReport v = vad_metrics(u.speech_mask, threshold(a.speech_probs, vad_threshold));
      parts[i].total = v.n_total;
      parts[i].fa = v.n_fa;
      parts[i].miss = v.n_miss;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  ErrorCounts g, b;
  std::size_t total = 0, fa = 0, miss = 0;
  for (const One& p : parts) {
    g += p.greedy;
    b += p.beam;
    total += p.total;
    fa += p.fa;
    miss += p.miss;
  }
  SegmentedReport r;
  r.n_utts = corpus.size();
  r.greedy = error_rate(g);
  if (with_beam) r.beam = error_rate(b);
  r.vad = vad_report(total, fa, miss);
  return r;
}

VadReport evaluate_vad(const ModelParams& params, const Corpus& corpus, double vad_threshold) {
  if (corpus.empty()) throw EmptyInput("evaluate: empty corpus");
  std::size_t total = 0, fa = 0, miss = 0;
  for (const Utterance& u : corpus.utterances) {
    FrameSequence fs = frame_stream(u.audio, kCanonicalFrameSeconds);
    VadReport v = vad_metrics(u.speech_mask, threshold(vad_score_frames(fs, params), vad_threshold));
    total += v.n_total;
    fa += v.n_fa;
    miss += v.n_miss;
  }
  return vad_report(total, fa, miss);
}

StreamRun stream_audio(const ModelParams& params, const SampleBuffer& audio, const StreamerConfig& cfg,
                       const Recognizer* recognizer) {
  FrameSequence fs = frame_stream(audio, cfg.frame_duration_s);
  ModelVadScorer scorer(params);
  Streamer st(cfg, scorer, recognizer);
  StreamRun run;
  auto take = [&](std::vector<SegmentEvent>&& evs) {
    for (auto& e : evs) {
      run.hypothesis.insert(run.hypothesis.end(), e.tokens.begin(), e.tokens.end());
      run.events.push_back(std::move(e));
    }
  };
  for (std::size_t t = 0; t < fs.size(); ++t) take(st.push_frame(fs.frames.row(t)));
  take(st.finalize());
  return run;
}

StreamingReport evaluate_streaming(const ModelParams& params, const LongStream& stream, StreamerConfig cfg,
                                   const BeamConfig& beam, double l_asr_s) {
  if (stream.transcript.empty()) throw EmptyInput("evaluate: empty reference stream");
  cfg.max_chunk_frames = std::max(cfg.min_speech_frames, seconds_to_frames(l_asr_s));
  Recognizer rec(params, beam);
  StreamRun run = stream_audio(params, stream.audio, cfg, &rec);
  StreamingReport r;
  r.l_asr_s = l_asr_s;
  r.n_events = run.events.size();
  for (const auto& e : run.events) r.forced += e.cause == FlushCause::kForcedLength;
  r.cer = token_error_rate(stream.transcript, run.hypothesis);
  r.vad = vad_metrics(stream.speech_mask,
                      segments_to_mask(run.events, stream.speech_mask.size(), cfg.frame_duration_s));
  return r;
}

std::string to_json(const SegmentedReport& r) {
  nlohmann::json j{{"mode", "segmented"}, {"n_utts", r.n_utts}, {"greedy", cer_json(r.greedy)},
                   {"beam", cer_json(r.beam)}, {"vad", vad_json(r.vad)}};
  return j.dump();
}

std::string to_json(const StreamingReport& r) {
  nlohmann::json j{{"mode", "streaming"}, {"l_asr_s", r.l_asr_s}, {"n_events", r.n_events},
                   {"forced", r.forced}, {"asr", cer_json(r.cer)}, {"vad", vad_json(r.vad)}};
  return j.dump();
}

}  // namespace vadasr
