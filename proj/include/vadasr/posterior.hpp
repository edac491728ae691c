#pragma once

#include <string>
#include <vector>

#include "vadasr/tensor.hpp"

namespace vadasr {

// Per-frame log-probabilities over the vocabulary plus a trailing blank.
struct PosteriorGrid {
  Tensor log_probs;  // [T x (|V| + 1)]
  std::vector<std::string> vocab;

  std::size_t frames() const { return log_probs.size() == 0 ? 0 : log_probs.rows(); }
  std::size_t classes() const { return vocab.size() + 1; }
  int blank_index() const { return static_cast<int>(vocab.size()); }
};

// Largest |sum_k exp(row_k) - 1| over rows.
double max_normalization_error(const Tensor& log_probs);

// VAP1 interchange: "VAP1" | u32 T | u32 K | T*K f64 row-major log-probs,
// plus a JSON sidecar {"vocab": [...], "blank_index": K-1} at path + ".json".
std::vector<char> encode_posteriors(const Tensor& log_probs);
Tensor decode_posteriors(const std::vector<char>& bytes);
void write_external_posteriors(const std::string& path, const PosteriorGrid& grid);
// Rejects bad magic, truncation, sidecar mismatch and rows whose
// probabilities miss 1 by more than 1e-3.
PosteriorGrid load_external_posteriors(const std::string& path);

}  // namespace vadasr
