#pragma once

#include <optional>
#include <vector>

#include "vadasr/corpus.hpp"
#include "vadasr/ngram.hpp"
#include "vadasr/posterior.hpp"

namespace vadasr {

struct BeamConfig {
  int beam_size = 20;
  double lm_weight = 0.46;
  double word_score = 0.52;
  const NgramLM* lm = nullptr;  // not owned
};

struct Hypothesis {
  TokenSeq tokens;
  double score = 0.0;      // ctc_score + lm_weight * lm_score + word_score * |tokens|
  double ctc_score = 0.0;  // log prefix probability
  double lm_score = 0.0;   // includes </s> when an LM is used
};

// Argmax per frame, merge repeats, drop blanks (blank = last column).
TokenSeq greedy_decode(const Tensor& log_probs);
inline TokenSeq greedy_decode(const PosteriorGrid& grid) { return greedy_decode(grid.log_probs); }

// CTC prefix beam search with shallow fusion; best hypothesis first.
// Throws VocabularyError when a grid token is missing from the LM.
std::vector<Hypothesis> beam_search(const PosteriorGrid& grid, const BeamConfig& config);

}  // namespace vadasr
