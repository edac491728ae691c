#include "vadasr/recognizer.hpp"

#include "vadasr/error.hpp"
#include "vadasr/ops.hpp"

namespace vadasr {

PosteriorGrid Recognizer::posteriors(const Tensor& frames, FrameRange body) const {
  if (body.empty() || body.end > frames.rows())
    throw RangeError("recognizer: body [" + std::to_string(body.begin) + ", " +
                     std::to_string(body.end) + ") outside window of " + std::to_string(frames.rows()));
  Tape tape(false);
  ModelVars m = bind_params(tape, *params_, false);
  Var z = encode_features(m, frames);
  VadVars v = vad_forward(m, z);
  Var g = cross_task_attend(m, context_forward(m, z), v.hidden);
  Var lp = asr_head(m, ops::slice(g, 0, body.begin, body.end));
  return PosteriorGrid{lp.value(), params_->vocab};
}

PosteriorGrid Recognizer::posteriors(const Tensor& frames, const ChunkLayout* layout) const {
  return run_forward(*params_, frames, layout).log_posteriors;
}

TokenSeq Recognizer::decode(const PosteriorGrid& grid) const {
  if (!use_beam_) return greedy_decode(grid);
  return beam_search(grid, beam_).front().tokens;
}

}  // namespace vadasr
