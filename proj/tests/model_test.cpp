#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "test_util.hpp"
#include "vadasr/error.hpp"
#include "vadasr/losses.hpp"
#include "vadasr/model.hpp"

namespace vadasr {
namespace {

using testing::random_tensor;

const std::vector<std::string> kVocab{"a", "b", "c", "d", "e"};

ModelParams small_model(std::uint64_t seed = 1) { return init_model(ModelDims{}, kVocab, seed); }

Tensor random_frames(Rng& rng, std::size_t T) { return random_tensor(rng, {T, kSamplesPerLatent}, 0.3); }

// Finite-difference objective over the named parameter group.
GradObjective model_objective(const ModelParams& base, const std::vector<std::string>& names,
                              std::function<Var(const ModelVars&)> loss_of) {
  return [=](const std::vector<Tensor>& values) {
    ModelParams p = base;
    for (std::size_t i = 0; i < names.size(); ++i) p.tensors.at(names[i]) = values[i];
    Tape tape;
    ModelVars m = bind_params(tape, p, true, names);
    Var loss = loss_of(m);
    Gradients g = tape.backward(loss);
    ValueAndGrad out{loss.value().item(), {}};
    for (const auto& n : names) out.grads.push_back(g[n]);
    return out;
  };
}

std::vector<Tensor> values_of(const ModelParams& p, const std::vector<std::string>& names) {
  std::vector<Tensor> out;
  for (const auto& n : names) out.push_back(p.at(n));
  return out;
}

TEST(Model, ParameterBudget) {
  ModelParams p = small_model();
  EXPECT_LT(p.parameter_count(), 50000u);
  EXPECT_GT(p.parameter_count(), 10000u);
}

TEST(Model, DimsValidation) {
  ModelDims d;
  d.heads = 3;
  EXPECT_THROW(init_model(d, kVocab, 1), ConfigError);
  d = ModelDims{};
  d.vocab_size = 4;
  EXPECT_THROW(init_model(d, kVocab, 1), ConfigError);
}

TEST(Encoder, OneLatentPerFrame) {
  Rng rng(2);
  ModelParams p = small_model();
  for (std::size_t T : {1u, 2u, 7u, 50u}) {
    ForwardArtifacts a = run_forward(p, random_frames(rng, T));
    EXPECT_EQ(a.Z.shape(), (Shape{T, 32}));
    EXPECT_EQ(a.H_vad.shape(), (Shape{T, 32}));
    EXPECT_EQ(a.speech_probs.size(), T);
    EXPECT_EQ(a.C.shape(), (Shape{T, 32}));
    EXPECT_EQ(a.G.shape(), (Shape{T, 32}));
    EXPECT_EQ(a.log_posteriors.log_probs.shape(), (Shape{T, 6}));
    EXPECT_LE(max_normalization_error(a.log_posteriors.log_probs), 1e-9);
  }
}

TEST(Encoder, ZeroInputZeroBiasGivesZero) {
  ModelParams p = small_model();
  Tape tape(false);
  ModelVars m = bind_params(tape, p, false);
  Var z = encode_features(m, Tensor({6, kSamplesPerLatent}));
  for (double v : z.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, RejectsEmptyAndWrongFrameSize) {
  ModelParams p = small_model();
  EXPECT_THROW(vad_score_frames(Tensor({0, kSamplesPerLatent}), p), EmptyInput);
  EXPECT_THROW(vad_score_frames(Tensor({3, 160}), p), DimensionError);
}

TEST(Encoder, KernelGradientMatchesFiniteDifferences) {
  Rng rng(3);
  ModelParams p = small_model(3);
  Tensor frames = random_frames(rng, 2);
  std::vector<std::string> names{"enc.conv1.w", "enc.conv1.b", "enc.conv2.w", "enc.conv2.b"};
  auto f = model_objective(p, names, [&](const ModelVars& m) {
    return testing::probe_sum(*m.tape, encode_features(m, frames), 9);
  });
  EXPECT_LE(finite_diff_check(f, values_of(p, names), 1e-6, 60).max_rel_error, 1e-5);
}

TEST(Vad, ProbabilitiesInRangeAndHalfForZeroWeights) {
  Rng rng(4);
  ModelParams p = small_model();
  for (double v : vad_score_frames(random_frames(rng, 20), p)) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (const auto& n : param_names(p, "vad.fc")) std::fill(p.tensors.at(n).data().begin(), p.tensors.at(n).data().end(), 0.0);
  for (double v : vad_score_frames(random_frames(rng, 20), p)) EXPECT_EQ(v, 0.5);
}

TEST(Vad, ScoringPathMatchesFullForwardWithoutAttention) {
  Rng rng(5);
  ModelParams p = small_model();
  Tensor frames = random_frames(rng, 50);  // 1 s
  const std::uint64_t before = attention_calls();
  std::vector<double> probs = vad_score_frames(frames, p);
  EXPECT_EQ(attention_calls(), before);
  EXPECT_EQ(probs.size(), 50u);
  ForwardArtifacts a = run_forward(p, frames);
  EXPECT_EQ(attention_calls(), before + 2);
  EXPECT_EQ(probs, a.speech_probs);
}

TEST(Vad, WindowedScoringIsBitIdenticalInTheInterior) {
  // receptive field: conv stack spans frames t-1..t+1, vad conv +-2 more
  Rng rng(6);
  ModelParams p = small_model();
  Tensor frames = random_frames(rng, 40);
  std::vector<double> full = vad_score_frames(frames, p);
  for (std::size_t t = 0; t < 40; ++t) {
    const std::size_t lo = t >= 4 ? t - 4 : 0, hi = std::min<std::size_t>(40, t + 5);
    Tensor win({hi - lo, kSamplesPerLatent});
    std::copy(frames.row(lo).begin(), frames.row(lo).begin() + win.size(), win.data().begin());
    EXPECT_EQ(vad_score_frames(win, p)[t - lo], full[t]) << "frame " << t;
  }
}

class ContextTest : public ::testing::Test {
 protected:
  ModelParams p = small_model(7);
  Rng rng{7};
  Tensor z = random_tensor(rng, {40, 32});

  Tensor context(const Tensor& input, const ChunkLayout* layout) {
    Tape tape(false);
    ModelVars m = bind_params(tape, p, false);
    return context_forward(m, tape.constant(input), layout).value();
  }
};

TEST_F(ContextTest, WholeUtteranceLayoutIsTheSameCall) {
  Tensor base = context(z, nullptr);
  ChunkLayout one = plan_chunks(40, 40, 0, 0);
  EXPECT_EQ(context(z, &one), base);
  ChunkLayout big = plan_chunks(40, 1000, 25, 25);
  EXPECT_EQ(context(z, &big), base);
}

TEST_F(ContextTest, FullContextsReproduceUnchunkedOutput) {
  Tensor base = context(z, nullptr);
  ChunkLayout l = plan_chunks(40, 7, 40, 40);
  Tensor chunked = context(z, &l);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(chunked[i], base[i], 1e-9);
}

TEST_F(ContextTest, ZeroContextChunksAreIndependent) {
  ChunkLayout l = plan_chunks(40, 20, 0, 0);
  Tensor a = context(z, &l);
  Tensor perturbed = z;
  for (std::size_t t = 0; t < 20; ++t) perturbed.at(t, t % 32) += 3.0;
  Tensor b = context(perturbed, &l);
  for (std::size_t t = 20; t < 40; ++t)
    for (std::size_t c = 0; c < 32; ++c) EXPECT_EQ(a.at(t, c), b.at(t, c));
  bool changed = false;
  for (std::size_t t = 0; t < 20; ++t) changed |= a.at(t, 0) != b.at(t, 0);
  EXPECT_TRUE(changed);
}

TEST_F(ContextTest, ContextReachesOnlyAsFarAsTheSplice) {
  ChunkLayout l = plan_chunks(40, 10, 5, 5);
  Tensor a = context(z, &l);
  Tensor perturbed = z;
  for (std::size_t c = 0; c < 32; ++c) perturbed.at(4, c) += 2.0;  // outside chunk 3's window [15,35)
  Tensor b = context(perturbed, &l);
  for (std::size_t t = 20; t < 30; ++t)
    for (std::size_t c = 0; c < 32; ++c) EXPECT_EQ(a.at(t, c), b.at(t, c));
  ChunkLayout bad = plan_chunks(39, 10, 5, 5);
  EXPECT_THROW(context(z, &bad), LayoutError);
}

TEST(CrossTask, ZeroValueProjectionLeavesContextUntouched) {
  Rng rng(8);
  ModelParams p = small_model(8);
  auto& wv = p.tensors.at("xatt.v.w");
  std::fill(wv.data().begin(), wv.data().end(), 0.0);
  ForwardArtifacts a = run_forward(p, random_frames(rng, 12));
  EXPECT_EQ(a.G, a.C);
}

TEST(CrossTask, SingleFrameAttendsWithWeightOne) {
  Rng rng(9);
  ModelParams p = small_model(9);
  Tape tape(false);
  ModelVars m = bind_params(tape, p, false);
  Tensor c = random_tensor(rng, {1, 32}), h = random_tensor(rng, {1, 32});
  Var g = cross_task_attend(m, tape.constant(c), tape.constant(h));
  // softmax over one key is 1, so the attention output is the value row
  Var v = ops::matmul(tape.constant(h), m("xatt.v.w"));
  Var expect = ops::add(tape.constant(c), ops::matmul(v, m("xatt.o.w")));
  for (std::size_t i = 0; i < 32; ++i) EXPECT_NEAR(g.value()[i], expect.value()[i], 1e-12);
}

TEST(CrossTask, ShapeAndHeadErrors) {
  ModelParams p = small_model();
  Tape tape(false);
  ModelVars m = bind_params(tape, p, false);
  EXPECT_THROW(cross_task_attend(m, tape.constant(Tensor({3, 32})), tape.constant(Tensor({4, 32}))),
               DimensionError);
  ModelParams odd = p;
  odd.dims.heads = 5;
  ModelVars m2 = bind_params(tape, odd, false);
  EXPECT_THROW(cross_task_attend(m2, tape.constant(Tensor({3, 32})), tape.constant(Tensor({3, 32}))),
               ConfigError);
}

TEST(CrossTask, ThetaGGradientMatchesFiniteDifferences) {
  Rng rng(10);
  ModelParams p = small_model(10);
  Tensor c = random_tensor(rng, {6, 32}), h = random_tensor(rng, {6, 32});
  auto names = param_names(p, "xatt.");
  auto f = model_objective(p, names, [&](const ModelVars& m) {
    return testing::probe_sum(*m.tape, cross_task_attend(m, m.tape->constant(c), m.tape->constant(h)), 11);
  });
  EXPECT_LE(finite_diff_check(f, values_of(p, names), 1e-5, 40).max_rel_error, 1e-4);
}

TEST(AsrHead, ZeroWeightsGiveUniformRows) {
  Rng rng(11);
  ModelParams p = small_model();
  for (const auto& n : param_names(p, "asr.")) std::fill(p.tensors.at(n).data().begin(), p.tensors.at(n).data().end(), 0.0);
  ForwardArtifacts a = run_forward(p, random_frames(rng, 5));
  for (double v : a.log_posteriors.log_probs.data()) EXPECT_NEAR(v, std::log(1.0 / 6.0), 1e-12);
}

TEST(AsrHead, GridFeedsCtc) {
  Rng rng(12);
  ModelParams p = small_model();
  ForwardArtifacts a = run_forward(p, random_frames(rng, 30));
  for (int trial = 0; trial < 20; ++trial) {
    TokenSeq y(rng.uniform_int(0, 8));
    for (int& t : y) t = static_cast<int>(rng.uniform_int(0, 4));
    EXPECT_TRUE(std::isfinite(ctc_loss(a.log_posteriors, y).loss));
  }
}

TEST(EndToEnd, MtlGradientMatchesFiniteDifferencesPerGroup) {
  Rng rng(13);
  ModelParams p = small_model(13);
  Tensor frames = random_frames(rng, 4);
  TokenSeq y{1, 3};
  Mask mask{0, 1, 1, 0};
  for (const char* group : {"enc.", "vad.", "ctx.", "xatt.", "asr."}) {
    auto names = param_names(p, group);
    auto f = model_objective(p, names, [&](const ModelVars& m) {
      ForwardVars fv = forward(m, frames);
      return ops::add(ops::ctc_loss(fv.log_probs, y), ops::bce_loss(fv.speech_probs, mask));
    });
    auto r = finite_diff_check(f, values_of(p, names), 1e-6, 12);
    EXPECT_LE(r.max_rel_error, 1e-4) << group << " worst " << names[r.worst_tensor];
  }
}

TEST(EndToEnd, ChunkedForwardIsDifferentiable) {
  Rng rng(14);
  ModelParams p = small_model(14);
  Tensor frames = random_frames(rng, 9);
  ChunkLayout l = plan_chunks(9, 4, 2, 2);
  auto names = param_names(p, "ctx.");
  auto f = model_objective(p, names, [&](const ModelVars& m) {
    return ops::ctc_loss(forward(m, frames, &l).log_probs, TokenSeq{0, 2, 4});
  });
  EXPECT_LE(finite_diff_check(f, values_of(p, names), 1e-6, 12).max_rel_error, 1e-4);
}

TEST(Checkpoint, ModelRoundTrip) {
  ModelParams p = small_model(15);
  const auto path = (std::filesystem::temp_directory_path() / "vadasr_model.ckpt").string();
  save_model(path, p);
  ModelParams q = load_model(path);
  EXPECT_EQ(q.dims, p.dims);
  EXPECT_EQ(q.vocab, p.vocab);
  EXPECT_EQ(q.tensors, p.tensors);
  std::filesystem::remove(path + ".json");
  EXPECT_THROW(load_model(path), IoError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace vadasr
