#include "vadasr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "vadasr/error.hpp"

namespace vadasr {

GradCheckResult finite_diff_check(const GradObjective& f,
                                  const std::vector<Tensor>& params, double eps,
                                  std::size_t max_coords_per_tensor) {
  if (!(eps > 0.0)) throw InvalidArgument("finite_diff_check: eps must be positive");
  const ValueAndGrad base = f(params);
  if (!std::isfinite(base.value))
    throw NumericError("finite_diff_check: objective is not finite at the base point");
  if (base.grads.size() != params.size())
    throw DimensionError("finite_diff_check: objective returned " +
                         std::to_string(base.grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");

  GradCheckResult result;
  std::vector<Tensor> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::size_t n = params[p].size();
    if (base.grads[p].size() != n)
      throw DimensionError("finite_diff_check: gradient " + std::to_string(p) +
                           " has shape " + shape_string(base.grads[p].shape()) +
                           ", parameter has " + shape_string(params[p].shape()));
    const std::size_t step =
        (max_coords_per_tensor == 0 || n <= max_coords_per_tensor)
            ? 1
            : (n + max_coords_per_tensor - 1) / max_coords_per_tensor;
    for (std::size_t i = 0; i < n; i += step) {
      const double orig = params[p][i];
      probe[p][i] = orig + eps;
      const double up = f(probe).value;
      probe[p][i] = orig - eps;
      const double down = f(probe).value;
      probe[p][i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("finite_diff_check: objective not finite near tensor " +
                           std::to_string(p) + " index " + std::to_string(i));
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = base.grads[p][i];
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      ++result.coordinates;
      if (err > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = std::max(result.max_rel_error, err);
        if (err >= result.max_rel_error) {
          result.worst_tensor = p;
          result.worst_index = i;
          result.analytic = analytic;
          result.numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace vadasr
