#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vadasr/checkpoint.hpp"
#include "vadasr/corpus.hpp"
#include "vadasr/metrics.hpp"
#include "vadasr/model.hpp"

namespace vadasr {

enum class Stage { kAsrOnly, kMtl, kVadOnly };
std::string stage_name(Stage s);
Stage parse_stage(const std::string& s);  // asr | mtl | vad

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Linear warmup from 0, hold at the peak, linear decay to final_scale*peak.
struct TriStage {
  double peak = 2e-3;
  double warmup = 0.1;
  double hold = 0.4;
  double decay = 0.5;
  double final_scale = 0.05;
  double at(std::size_t step, std::size_t total_steps) const;
};

struct AdamState {
  TensorMap m, v;
  std::size_t step = 0;
};

// Bias-corrected Adam on every tensor named in `grads`. Throws NumericError
// naming the tensor if a gradient is not finite.
void optimizer_step(TensorMap& params, const TensorMap& grads, AdamState& state, double lr,
                    const AdamHyper& hyper = {});

struct TrainConfig {
  Stage stage = Stage::kMtl;
  double learning_rate = 2e-3;
  int epochs = 30;
  int batch_size = 8;
  double chunk_min_s = 0.5;
  double chunk_max_s = 3.0;
  double splice_s = 0.5;
  bool chunk_hopping = true;  // stage 2 only
  double vad_weight = 1.0;    // stage 2 only
  std::uint64_t seed = 7;
  double warmup = 0.1, hold = 0.4, decay = 0.5, final_lr_scale = 0.05;
  double grad_clip = 5.0;  // global norm, <= 0 disables
  bool parallel = true;    // utterances within a batch
  double vad_threshold = 0.45;
  bool evaluate_dev = true;
};

void validate_config(const TrainConfig& cfg);

struct EpochLoss {
  double ctc = 0.0, ce = 0.0, total = 0.0;
};

struct TrainReport {
  Stage stage = Stage::kMtl;
  std::vector<EpochLoss> epochs;
  std::size_t skipped_utterances = 0;  // infeasible CTC targets
  std::size_t steps = 0;
  std::size_t trained_parameters = 0;
  double wall_seconds = 0.0;
  bool has_dev = false;
  ErrorRateReport dev_greedy_cer;
  VadReport dev_vad;
};

std::string report_to_json(const TrainReport& r);

// Names optimized by a stage; the VAD baseline touches encoder + VAD head.
std::vector<std::string> trainable_names(const ModelParams& params, Stage stage);

// Per-utterance inputs precomputed once.
struct TrainItem {
  Tensor frames;  // [T x 320]
  TokenSeq target;
  Mask mask;
};
std::vector<TrainItem> prepare_items(const Corpus& corpus);

struct BatchResult {
  EpochLoss loss;        // mean over the utterances used
  TensorMap grads;       // mean over the utterances used
  std::size_t used = 0;
  std::size_t skipped = 0;
};

// Forward/backward over one batch. `chunk_len` = 0 means no chunk hopping.
BatchResult batch_gradients(const ModelParams& params, const std::vector<const TrainItem*>& batch,
                            const TrainConfig& cfg, std::size_t chunk_len);

// Runs cfg.epochs over `train`, mutating `params`. Dev metrics use greedy
// decoding and the cfg.vad_threshold detector.
TrainReport train(ModelParams& params, const Corpus& train, const Corpus* dev, const TrainConfig& cfg);

inline TrainReport train_stage1_asr(ModelParams& p, const Corpus& tr, const Corpus* dev, TrainConfig cfg) {
  cfg.stage = Stage::kAsrOnly;
  return train(p, tr, dev, cfg);
}
inline TrainReport train_stage2_mtl(ModelParams& p, const Corpus& tr, const Corpus* dev, TrainConfig cfg) {
  cfg.stage = Stage::kMtl;
  return train(p, tr, dev, cfg);
}
inline TrainReport train_vad_stl_baseline(ModelParams& p, const Corpus& tr, const Corpus* dev, TrainConfig cfg) {
  cfg.stage = Stage::kVadOnly;
  return train(p, tr, dev, cfg);
}

}  // namespace vadasr
