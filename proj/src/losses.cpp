#include "vadasr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vadasr/error.hpp"

namespace vadasr {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

void check_tokens(const Tensor& log_probs, const TokenSeq& target) {
  if (log_probs.rank() != 2)
    throw DimensionError("ctc: expected [T x K] log-probs, got " + shape_string(log_probs.shape()));
  const int blank = static_cast<int>(log_probs.cols()) - 1;
  if (blank < 1) throw DimensionError("ctc: need at least one token column plus blank");
  for (int y : target)
    if (y < 0 || y >= blank)
      throw VocabularyError("ctc: token id " + std::to_string(y) + " outside [0, " +
                            std::to_string(blank) + ")");
}

}  // namespace

std::size_t ctc_min_frames(const TokenSeq& target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

CtcResult ctc_loss(const Tensor& log_probs, const TokenSeq& target) {
  check_tokens(log_probs, target);
  const std::size_t T = log_probs.rows(), K = log_probs.cols();
  const int blank = static_cast<int>(K) - 1;
  const std::size_t need = ctc_min_frames(target);
  if (T < need)
    throw InfeasibleTarget("ctc: " + std::to_string(T) + " frames cannot emit a target needing " +
                           std::to_string(need));
  CtcResult res;
  res.grad_log_probs = Tensor({T, K});
  if (T == 0) return res;

  // ext = blank y1 blank y2 ... yL blank
  const std::size_t S = 2 * target.size() + 1;
  std::vector<int> ext(S, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto skip_ok = [&](std::size_t s) {  // may jump from s-2 into s
    return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
  };

  std::vector<double> alpha(T * S, kNegInf), beta(T * S, kNegInf);
  auto A = [&](std::size_t t, std::size_t s) -> double& { return alpha[t * S + s]; };
  auto B = [&](std::size_t t, std::size_t s) -> double& { return beta[t * S + s]; };
  auto lp = [&](std::size_t t, std::size_t s) { return log_probs.at(t, ext[s]); };

  A(0, 0) = lp(0, 0);
  if (S > 1) A(0, 1) = lp(0, 1);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = A(t - 1, s);
      if (s >= 1) acc = lse2(acc, A(t - 1, s - 1));
      if (skip_ok(s)) acc = lse2(acc, A(t - 1, s - 2));
      A(t, s) = acc == kNegInf ? kNegInf : acc + lp(t, s);
    }
  }
  // beta excludes the emission at t itself
  B(T - 1, S - 1) = 0.0;
  if (S > 1) B(T - 1, S - 2) = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = B(t + 1, s) + lp(t + 1, s);
      if (s + 1 < S) acc = lse2(acc, B(t + 1, s + 1) + lp(t + 1, s + 1));
      if (s + 2 < S && skip_ok(s + 2)) acc = lse2(acc, B(t + 1, s + 2) + lp(t + 1, s + 2));
      B(t, s) = acc;
    }
  }

  double log_p = A(T - 1, S - 1);
  if (S > 1) log_p = lse2(log_p, A(T - 1, S - 2));
  if (log_p == kNegInf)
    throw InfeasibleTarget("ctc: target has zero probability under the posteriors");
  res.loss = -log_p;

  for (std::size_t t = 0; t < T; ++t) {
    auto g = res.grad_log_probs.row(t);
    for (std::size_t s = 0; s < S; ++s) {
      const double w = A(t, s) + B(t, s);
      if (w == kNegInf) continue;
      g[ext[s]] -= std::exp(w - log_p);
    }
  }
  return res;
}

double ctc_loss_bruteforce(const Tensor& log_probs, const TokenSeq& target) {
  check_tokens(log_probs, target);
  const std::size_t T = log_probs.rows(), K = log_probs.cols();
  const int blank = static_cast<int>(K) - 1;
  double count = 1.0;
  for (std::size_t t = 0; t < T; ++t) count *= static_cast<double>(K);
  if (count > 1e6)
    throw SizeError("ctc brute force: " + std::to_string(K) + "^" + std::to_string(T) +
                    " alignments exceeds 1e6");
  const auto total = static_cast<std::size_t>(count);

  double log_p = kNegInf;
  std::vector<int> path(T, 0);
  TokenSeq collapsed;
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t code = n;
    for (std::size_t t = 0; t < T; ++t) {
      path[t] = static_cast<int>(code % K);
      code /= K;
    }
    collapsed.clear();
    int prev = -1;
    for (int c : path) {
      if (c != prev && c != blank) collapsed.push_back(c);
      prev = c;
    }
    if (collapsed != target) continue;
    double lp = 0.0;
    for (std::size_t t = 0; t < T; ++t) lp += log_probs.at(t, path[t]);
    log_p = lse2(log_p, lp);
  }
  return -log_p;
}

std::vector<CtcResult> ctc_loss_batch(std::span<const Tensor> log_probs,
                                      std::span<const TokenSeq> targets, bool parallel) {
  if (log_probs.size() != targets.size())
    throw DimensionError("ctc batch: " + std::to_string(log_probs.size()) + " grids vs " +
                         std::to_string(targets.size()) + " targets");
  std::vector<CtcResult> out(log_probs.size());
  std::vector<std::exception_ptr> errors(log_probs.size());
  const auto n = static_cast<long>(log_probs.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (long i = 0; i < n; ++i) {
    try {
      out[i] = ctc_loss(log_probs[i], targets[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

BceResult bce_loss(std::span<const double> probs, const Mask& mask) {
  if (probs.size() != mask.size())
    throw DimensionError("bce: " + std::to_string(probs.size()) + " probabilities vs " +
                         std::to_string(mask.size()) + " labels");
  if (probs.empty()) throw EmptyInput("bce: no frames");
  const double n = static_cast<double>(probs.size());
  BceResult res;
  res.grad.assign(probs.size(), 0.0);
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const double raw = probs[t];
    if (!std::isfinite(raw)) throw NumericError("bce: non-finite probability at frame " + std::to_string(t));
    const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
    const bool inside = raw > kBceClamp && raw < 1.0 - kBceClamp;
    if (mask[t]) {
      res.loss -= std::log(p);
      if (inside) res.grad[t] = -1.0 / (p * n);
    } else {
      res.loss -= std::log1p(-p);
      if (inside) res.grad[t] = 1.0 / ((1.0 - p) * n);
    }
  }
  res.loss /= n;
  return res;
}

MtlLoss mtl_loss(double ctc_part, double ce_part, double vad_weight) {
  return MtlLoss{ctc_part + vad_weight * ce_part, ctc_part, ce_part, vad_weight};
}

namespace ops {

Var ctc_loss(Var log_probs, const TokenSeq& target) {
  if (!log_probs.valid()) throw UsageError("ctc_loss: unbound input");
  CtcResult r = vadasr::ctc_loss(log_probs.value(), target);
  Tensor grad = std::move(r.grad_log_probs);
  return log_probs.tape()->record(
      Tensor::scalar(r.loss), {log_probs}, [log_probs, grad](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_of(log_probs);
        const double s = g.item();
        for (std::size_t i = 0; i < grad.size(); ++i) gx[i] += s * grad[i];
      });
}

Var bce_loss(Var probs, const Mask& mask) {
  if (!probs.valid()) throw UsageError("bce_loss: unbound input");
  BceResult r = vadasr::bce_loss(probs.value().data(), mask);
  std::vector<double> grad = std::move(r.grad);
  return probs.tape()->record(Tensor::scalar(r.loss), {probs}, [probs, grad](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_of(probs);
    const double s = g.item();
    for (std::size_t i = 0; i < grad.size(); ++i) gx[i] += s * grad[i];
  });
}

}  // namespace ops
}  // namespace vadasr
