#pragma once

#include <span>
#include <vector>

#include "vadasr/corpus.hpp"
#include "vadasr/posterior.hpp"
#include "vadasr/tape.hpp"

namespace vadasr {

struct CtcResult {
  double loss = 0.0;             // -log p(Y | X)
  Tensor grad_log_probs;         // d loss / d log_probs, [T x K]
};

// Forward-backward over the blank-extended target in log space. The blank
// is the last column. Throws InfeasibleTarget when T < |Y| + #repeats.
CtcResult ctc_loss(const Tensor& log_probs, const TokenSeq& target);
inline CtcResult ctc_loss(const PosteriorGrid& grid, const TokenSeq& target) {
  return ctc_loss(grid.log_probs, target);
}

// Direct sum over every alignment; +inf when nothing collapses to the
// target. Limited to K^T <= 1e6.
double ctc_loss_bruteforce(const Tensor& log_probs, const TokenSeq& target);

// Frames needed to emit `target`: |Y| plus one blank per adjacent repeat.
std::size_t ctc_min_frames(const TokenSeq& target);

// One loss per utterance; `parallel` spreads utterances over OpenMP
// threads, otherwise a plain loop.
std::vector<CtcResult> ctc_loss_batch(std::span<const Tensor> log_probs,
                                      std::span<const TokenSeq> targets, bool parallel);

inline constexpr double kBceClamp = 1e-7;

struct BceResult {
  double loss = 0.0;  // per-frame mean
  std::vector<double> grad;
};

// -(1/T) sum_t [y ln p + (1 - y) ln(1 - p)] with p clamped to
// [1e-7, 1 - 1e-7].
BceResult bce_loss(std::span<const double> probs, const Mask& mask);

struct MtlLoss {
  double total = 0.0;
  double ctc_part = 0.0;
  double ce_part = 0.0;
  double vad_weight = 1.0;
};

MtlLoss mtl_loss(double ctc_part, double ce_part, double vad_weight = 1.0);

namespace ops {
// Tape-recorded versions; gradients flow into `log_probs` / `probs`.
Var ctc_loss(Var log_probs, const TokenSeq& target);
Var bce_loss(Var probs, const Mask& mask);
}  // namespace ops

}  // namespace vadasr
