#include "vadasr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>

#include "json.hpp"
#include "vadasr/chunking.hpp"
#include "vadasr/error.hpp"
#include "vadasr/evaluate.hpp"
#include "vadasr/losses.hpp"
#include "vadasr/ops.hpp"
#include "vadasr/rng.hpp"

namespace vadasr {

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::kAsrOnly: return "asr";
    case Stage::kMtl: return "mtl";
    case Stage::kVadOnly: return "vad";
  }
  return "?";
}

Stage parse_stage(const std::string& s) {
  if (s == "asr") return Stage::kAsrOnly;
  if (s == "mtl") return Stage::kMtl;
  if (s == "vad") return Stage::kVadOnly;
  throw InvalidArgument("unknown stage '" + s + "' (expected asr, mtl or vad)");
}

double TriStage::at(std::size_t step, std::size_t total) const {
  if (total == 0) return 0.0;
  const double x = static_cast<double>(step) / static_cast<double>(total);
  const double sum = warmup + hold + decay;
  const double w = warmup / sum, h = hold / sum;
  if (x < w) return peak * x / w;
  if (x < w + h) return peak;
  const double d = std::min(1.0, (x - w - h) / std::max(1e-12, 1.0 - w - h));
  return peak * (1.0 - d * (1.0 - final_scale));
}

void optimizer_step(TensorMap& params, const TensorMap& grads, AdamState& st, double lr, const AdamHyper& hp) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw UsageError("optimizer: gradient for unknown parameter '" + name + "'");
    if (it->second.shape() != g.shape())
      throw DimensionError("optimizer: '" + name + "' is " + shape_string(it->second.shape()) +
                           ", gradient " + shape_string(g.shape()));
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!std::isfinite(g[i]))
        throw NumericError("optimizer: non-finite gradient in '" + name + "' at index " + std::to_string(i) +
                           " (value " + std::to_string(g[i]) + ")");
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [mi, fresh_m] = st.m.try_emplace(name, Tensor(g.shape()));
    auto [vi, fresh_v] = st.v.try_emplace(name, Tensor(g.shape()));
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + hp.eps);
    }
  }
}

void validate_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(c.chunk_min_s > 0.0) || c.chunk_min_s > c.chunk_max_s) throw ConfigError("bad chunk length range");
  if (c.splice_s < 0.0) throw ConfigError("splice must be >= 0");
  if (c.vad_weight < 0.0) throw ConfigError("vad_weight must be >= 0");
  if (c.warmup < 0 || c.hold < 0 || c.decay < 0 || c.warmup + c.hold + c.decay <= 0)
    throw ConfigError("schedule fractions must be >= 0 and not all zero");
}

std::string report_to_json(const TrainReport& r) {
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& e : r.epochs) curves.push_back({{"ctc", e.ctc}, {"ce", e.ce}, {"total", e.total}});
  nlohmann::json j{{"stage", stage_name(r.stage)},
                   {"epochs", curves},
                   {"skipped_utterances", r.skipped_utterances},
                   {"steps", r.steps},
                   {"trained_parameters", r.trained_parameters},
                   {"wall_seconds", r.wall_seconds}};
  if (r.has_dev) {
    j["dev"] = {{"greedy_cer", r.dev_greedy_cer.rate},
                {"sub", r.dev_greedy_cer.sub},
                {"del", r.dev_greedy_cer.del},
                {"ins", r.dev_greedy_cer.ins},
                {"deter", r.dev_vad.deter},
                {"fa", r.dev_vad.fa},
                {"miss", r.dev_vad.miss}};
  }
  return j.dump(1);
}

std::vector<std::string> trainable_names(const ModelParams& params, Stage stage) {
  if (stage != Stage::kVadOnly) return param_names(params);
  std::vector<std::string> out = param_names(params, "enc.");
  for (auto& n : param_names(params, "vad.")) out.push_back(n);
  return out;
}

std::vector<TrainItem> prepare_items(const Corpus& corpus) {
  std::vector<TrainItem> items;
  for (const Utterance& u : corpus.utterances) {
    FrameSequence fs = frame_stream(u.audio, kCanonicalFrameSeconds);
    if (fs.empty()) continue;
    Mask mask = u.speech_mask;
    if (mask.size() != fs.size())
      throw DimensionError("utterance " + u.id + ": mask has " + std::to_string(mask.size()) +
                           " frames, audio " + std::to_string(fs.size()));
    items.push_back({std::move(fs.frames), u.transcript, std::move(mask)});
  }
  return items;
}

BatchResult batch_gradients(const ModelParams& params, const std::vector<const TrainItem*>& batch,
                            const TrainConfig& cfg, std::size_t chunk_len) {
  const std::vector<std::string> names = trainable_names(params, cfg.stage);
  const std::size_t splice = seconds_to_frames(cfg.splice_s);
  const auto n = static_cast<long>(batch.size());
  struct One {
    bool used = false;
    EpochLoss loss;
    TensorMap grads;
  };
  std::vector<One> results(batch.size());
  std::vector<std::exception_ptr> errors(batch.size());

#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
  for (long i = 0; i < n; ++i) {
    try {
      const TrainItem& it = *batch[i];
      const std::size_t T = it.frames.rows();
      One& r = results[i];
      if (cfg.stage != Stage::kVadOnly && ctc_min_frames(it.target) > T) continue;
      Tape tape;
      ModelVars m = bind_params(tape, params, true, names);
      Var total;
      if (cfg.stage == Stage::kVadOnly) {
        VadVars v = vad_forward(m, encode_features(m, it.frames));
        total = ops::bce_loss(v.probs, it.mask);
        r.loss.ce = total.value().item();
      } else {
        ChunkLayout layout;
        const bool chunked = cfg.stage == Stage::kMtl && chunk_len > 0;
        if (chunked) layout = plan_chunks(T, chunk_len, splice, splice);
        ForwardVars f = forward(m, it.frames, chunked ? &layout : nullptr);
        Var ctc;
        try {
          ctc = ops::ctc_loss(f.log_probs, it.target);
        } catch (const InfeasibleTarget&) {
          continue;
        }
        r.loss.ctc = ctc.value().item();
        const bool joint = cfg.stage == Stage::kMtl && cfg.vad_weight > 0.0;
        if (joint) {
          Var ce = ops::bce_loss(f.speech_probs, it.mask);
          r.loss.ce = ce.value().item();
          total = ops::add(ctc, ops::scale(ce, cfg.vad_weight));
        } else {
          r.loss.ce = bce_loss(f.speech_probs.value().data(), it.mask).loss;
          total = ctc;
        }
      }
      r.loss.total = total.value().item();
      Gradients g = tape.backward(total);
      for (const auto& name : names) r.grads.emplace(name, g[name]);
      r.used = true;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  BatchResult out;
  for (const One& r : results) {
    if (!r.used) {
      ++out.skipped;
      continue;
    }
    ++out.used;
    out.loss.ctc += r.loss.ctc;
    out.loss.ce += r.loss.ce;
    out.loss.total += r.loss.total;
    for (const auto& [name, g] : r.grads) {
      auto [slot, fresh] = out.grads.try_emplace(name, g);
      if (!fresh)
        for (std::size_t k = 0; k < g.size(); ++k) slot->second[k] += g[k];
    }
  }
  if (out.used > 0) {
    const double inv = 1.0 / static_cast<double>(out.used);
    out.loss.ctc *= inv;
    out.loss.ce *= inv;
    out.loss.total *= inv;
    for (auto& [name, g] : out.grads)
      for (double& v : g.data()) v *= inv;
  }
  return out;
}

namespace {

void clip_global_norm(TensorMap& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double s = max_norm / norm;
  for (auto& [name, g] : grads)
    for (double& v : g.data()) v *= s;
}

}  // namespace

TrainReport train(ModelParams& params, const Corpus& train_set, const Corpus* dev, const TrainConfig& cfg) {
  validate_config(cfg);
  if (train_set.empty()) throw EmptyInput("train: empty training corpus");
  if (train_set.vocab != params.vocab) throw VocabularyError("train: corpus vocabulary differs from the model's");
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<TrainItem> items = prepare_items(train_set);
  if (items.empty()) throw EmptyInput("train: no utterance has audio");

  TrainReport report;
  report.stage = cfg.stage;
  for (const auto& n : trainable_names(params, cfg.stage)) report.trained_parameters += params.at(n).size();

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t per_epoch = (items.size() + bs - 1) / bs;
  const std::size_t total_steps = per_epoch * static_cast<std::size_t>(cfg.epochs);
  const TriStage sched{cfg.learning_rate, cfg.warmup, cfg.hold, cfg.decay, cfg.final_lr_scale};
  Rng rng(cfg.seed);
  AdamState adam;
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<long>(i) - 1)]);
    EpochLoss sum;
    std::size_t used = 0;
    for (std::size_t start = 0; start < items.size(); start += bs) {
      std::vector<const TrainItem*> batch;
      for (std::size_t k = start; k < std::min(items.size(), start + bs); ++k) batch.push_back(&items[order[k]]);
      std::size_t chunk_len = 0;
      if (cfg.stage == Stage::kMtl && cfg.chunk_hopping) chunk_len = sample_chunk_len(rng, cfg.chunk_min_s, cfg.chunk_max_s);
      BatchResult br = batch_gradients(params, batch, cfg, chunk_len);
      if (epoch == 0) report.skipped_utterances += br.skipped;
      if (br.used == 0) continue;
      sum.ctc += br.loss.ctc * static_cast<double>(br.used);
      sum.ce += br.loss.ce * static_cast<double>(br.used);
      sum.total += br.loss.total * static_cast<double>(br.used);
      used += br.used;
      clip_global_norm(br.grads, cfg.grad_clip);
      optimizer_step(params.tensors, br.grads, adam, sched.at(report.steps + 1, total_steps));
      ++report.steps;
    }
    if (used > 0) {
      const double inv = 1.0 / static_cast<double>(used);
      sum.ctc *= inv;
      sum.ce *= inv;
      sum.total *= inv;
    }
    report.epochs.push_back(sum);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (dev && cfg.evaluate_dev && !dev->empty()) {
    report.has_dev = true;
    report.dev_vad = evaluate_vad(params, *dev, cfg.vad_threshold);
    if (cfg.stage != Stage::kVadOnly)
      report.dev_greedy_cer = evaluate_segmented(params, *dev, BeamConfig{}, cfg.vad_threshold, false).greedy;
  }
  return report;
}

}  // namespace vadasr
