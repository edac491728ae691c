#pragma once

#include "vadasr/chunking.hpp"
#include "vadasr/decode.hpp"
#include "vadasr/model.hpp"

namespace vadasr {

// ASR over a frame window: the whole window feeds the encoder, context
// block and cross-task attention; only `body` rows reach the decoder.
class Recognizer {
 public:
  Recognizer(const ModelParams& params, BeamConfig beam, bool use_beam = true)
      : params_(&params), beam_(beam), use_beam_(use_beam) {}

  PosteriorGrid posteriors(const Tensor& frames, FrameRange body) const;
  // Whole utterance, optionally chunk-hopped.
  PosteriorGrid posteriors(const Tensor& frames, const ChunkLayout* layout = nullptr) const;
  TokenSeq decode(const PosteriorGrid& grid) const;
  TokenSeq transcribe(const Tensor& frames, FrameRange body) const { return decode(posteriors(frames, body)); }

  const ModelParams& params() const { return *params_; }
  const BeamConfig& beam() const { return beam_; }

 private:
  const ModelParams* params_;
  BeamConfig beam_;
  bool use_beam_;
};

}  // namespace vadasr
