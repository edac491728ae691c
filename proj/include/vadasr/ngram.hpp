#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "vadasr/corpus.hpp"

namespace vadasr {

inline constexpr double kBackoffFactor = 0.4;

// Stupid-backoff n-gram scorer over token ids. Ids 0..V-1 are vocabulary
// tokens, bos() and eos() the sentence markers.
class NgramLM {
 public:
  NgramLM() = default;
  NgramLM(int order, std::vector<std::string> vocab);

  int order() const { return order_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  int bos() const { return static_cast<int>(vocab_.size()); }
  int eos() const { return static_cast<int>(vocab_.size()) + 1; }
  // -1 when absent.
  int id_of(const std::string& token) const;

  void add_sentence(const TokenSeq& tokens);
  std::size_t count(std::span<const int> ngram) const;

  // Score of `token` after `history` (sentence start implied before it).
  // Unknown ids fall through to the add-one unigram floor.
  double logprob(std::span<const int> history, int token) const;
  // Sum of logprob over the sentence, optionally including </s>.
  double sentence_logprob(const TokenSeq& tokens, bool with_eos = true) const;

  std::string to_json() const;
  static NgramLM from_json(const std::string& text);
  void save(const std::string& path) const;
  static NgramLM load(const std::string& path);

 private:
  std::string name_of(int id) const;

  int order_ = 4;
  std::vector<std::string> vocab_;
  std::map<std::vector<int>, std::size_t> counts_;
  std::size_t unigram_total_ = 0;  // predicted tokens, </s> included
};

NgramLM train_ngram(const std::vector<TokenSeq>& transcripts,
                    const std::vector<std::string>& vocab, int order = 4);

inline double lm_logprob(const NgramLM& lm, std::span<const int> history, int token) {
  return lm.logprob(history, token);
}

}  // namespace vadasr
