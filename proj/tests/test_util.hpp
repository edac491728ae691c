#pragma once

#include <functional>
#include <vector>

#include "vadasr/gradcheck.hpp"
#include "vadasr/ops.hpp"
#include "vadasr/rng.hpp"
#include "vadasr/tape.hpp"

namespace vadasr::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

// Wraps "build a scalar from leaf Vars" into an objective the finite
// difference checker can probe.
inline GradObjective tape_objective(std::function<Var(Tape&, const std::vector<Var>&)> build) {
  return [build](const std::vector<Tensor>& params) {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
    Var loss = build(tape, leaves);
    Gradients g = tape.backward(loss);
    ValueAndGrad out{loss.value().item(), {}};
    for (Var leaf : leaves) out.grads.push_back(g[leaf]);
    return out;
  };
}

// Random linear functional sum(W .* y) so every output coordinate matters.
inline Var probe_sum(Tape& tape, Var y, std::uint64_t seed) {
  Rng rng(seed);
  Var w = tape.constant(random_tensor(rng, y.shape()));
  return ops::sum(ops::mul(y, w));
}

}  // namespace vadasr::testing
