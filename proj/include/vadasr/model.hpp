#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vadasr/audio.hpp"
#include "vadasr/checkpoint.hpp"
#include "vadasr/chunking.hpp"
#include "vadasr/posterior.hpp"
#include "vadasr/tape.hpp"

namespace vadasr {

struct ModelDims {
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t ffn = 64;
  std::size_t enc_channels = 16;  // first conv layer
  std::size_t vad_groups = 4;
  std::size_t vad_kernel = 5;
  std::size_t vocab_size = 5;
  double pe_scale = 0.1;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Waveform samples consumed per latent frame: conv1 stride 40, conv2 stride 8.
inline constexpr std::size_t kSamplesPerLatent = 320;

struct ModelParams {
  ModelDims dims;
  std::vector<std::string> vocab;
  TensorMap tensors;

  const Tensor& at(const std::string& name) const;
  std::size_t parameter_count() const;
};

// Throws ConfigError for inconsistent dims (e.g. heads not dividing d_model).
void validate_dims(const ModelDims& dims);
ModelParams init_model(const ModelDims& dims, std::vector<std::string> vocab, std::uint64_t seed);

// Tensors via the checkpoint format; dims and vocab in `path + ".json"`.
void save_model(const std::string& path, const ModelParams& params);
ModelParams load_model(const std::string& path);

// Parameters bound onto one tape.
struct ModelVars {
  const ModelParams* params = nullptr;
  std::map<std::string, Var> vars;
  Tape* tape = nullptr;
  Var operator()(const std::string& name) const;
  Gradients backward(Var loss) const { return tape->backward(loss); }
};

// Trainable names become leaves; others are constants. Empty = all trainable.
ModelVars bind_params(Tape& tape, const ModelParams& params, bool trainable = true,
                      const std::vector<std::string>& only = {});

// Parameter groups, by name prefix.
std::vector<std::string> param_names(const ModelParams& params, const std::string& prefix = {});

// frames [T x 320] -> Z [T x d]
Var encode_features(const ModelVars& m, const Tensor& frames);

struct VadVars {
  Var hidden;  // H_vad [T x d]
  Var logits;  // [T x 1]
  Var probs;   // sigmoid(logits)
};
VadVars vad_forward(const ModelVars& m, Var z);

// Encoder and VAD head only.
std::vector<double> vad_score_frames(const Tensor& frames, const ModelParams& params);
inline std::vector<double> vad_score_frames(const FrameSequence& frames, const ModelParams& params) {
  return vad_score_frames(frames.frames, params);
}

// Positional encoding plus one transformer block. With a layout, every
// chunk attends within its window and only body rows are kept.
Var context_forward(const ModelVars& m, Var z, const ChunkLayout* layout = nullptr);
Var cross_task_attend(const ModelVars& m, Var c, Var h_vad);
Var asr_head(const ModelVars& m, Var g);

struct ForwardVars {
  Var z, h_vad, vad_logits, speech_probs, c, g, log_probs;
};
ForwardVars forward(const ModelVars& m, const Tensor& frames, const ChunkLayout* layout = nullptr);

struct ForwardArtifacts {
  Tensor Z, H_vad;
  std::vector<double> speech_probs;
  Tensor C, G;
  PosteriorGrid log_posteriors;
};
ForwardArtifacts run_forward(const ModelParams& params, const Tensor& frames,
                             const ChunkLayout* layout = nullptr);

// Number of attention evaluations so far (self and cross-task), all threads.
std::uint64_t attention_calls();

}  // namespace vadasr
