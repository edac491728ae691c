#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "vadasr/tensor.hpp"

namespace vadasr {

struct ValueAndGrad {
  double value = 0.0;
  std::vector<Tensor> grads;  // one per parameter tensor, same shapes
};

using GradObjective = std::function<ValueAndGrad(const std::vector<Tensor>& params)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Central differences (f(p + eps e_i) - f(p - eps e_i)) / (2 eps) against the
// analytic gradient at p; error per coordinate is
// |analytic - numeric| / max(1, |numeric|). With max_coords_per_tensor > 0
// only that many evenly spaced coordinates of each tensor are probed.
GradCheckResult finite_diff_check(const GradObjective& f,
                                  const std::vector<Tensor>& params,
                                  double eps = 1e-5,
                                  std::size_t max_coords_per_tensor = 0);

}  // namespace vadasr
