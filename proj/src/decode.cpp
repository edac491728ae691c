#include "vadasr/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

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

struct Prefix {
  double pb = kNegInf;   // ends in blank
  double pnb = kNegInf;  // ends in its last token
  double lm = 0.0;       // LM score of the tokens, no </s>
  double total() const { return lse2(pb, pnb); }
};

using Beam = std::map<TokenSeq, Prefix>;

double combined(const BeamConfig& cfg, double ctc, double lm, std::size_t len) {
  return ctc + cfg.lm_weight * lm + cfg.word_score * static_cast<double>(len);
}

}  // namespace

TokenSeq greedy_decode(const Tensor& log_probs) {
  TokenSeq out;
  if (log_probs.size() == 0) return out;
  const int blank = static_cast<int>(log_probs.cols()) - 1;
  int prev = -1;
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    auto row = log_probs.row(t);
    const int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best != prev && best != blank) out.push_back(best);
    prev = best;
  }
  return out;
}

std::vector<Hypothesis> beam_search(const PosteriorGrid& grid, const BeamConfig& cfg) {
  if (cfg.beam_size < 1)
    throw InvalidArgument("beam_size must be >= 1, got " + std::to_string(cfg.beam_size));
  const Tensor& lp = grid.log_probs;
  const std::size_t K = lp.size() == 0 ? grid.classes() : lp.cols();
  if (K != grid.classes())
    throw DimensionError("beam_search: grid has " + std::to_string(K) + " columns for " +
                         std::to_string(grid.vocab.size()) + " tokens + blank");
  const int blank = static_cast<int>(K) - 1;

  // grid id -> lm id
  std::vector<int> to_lm;
  if (cfg.lm) {
    for (const auto& tok : grid.vocab) {
      const int id = cfg.lm->id_of(tok);
      if (id < 0 || id >= static_cast<int>(cfg.lm->vocab().size()))
        throw VocabularyError("beam_search: token '" + tok + "' missing from LM vocabulary");
      to_lm.push_back(id);
    }
  }
  std::vector<int> lm_hist;
  auto lm_step = [&](const TokenSeq& prefix, int token) {
    lm_hist.clear();
    for (int t : prefix) lm_hist.push_back(to_lm[t]);
    return cfg.lm->logprob(lm_hist, token);
  };

  Beam beam;
  beam[{}].pb = 0.0;
  const std::size_t T = lp.size() == 0 ? 0 : lp.rows();
  for (std::size_t t = 0; t < T; ++t) {
    auto row = lp.row(t);
    Beam next;
    for (const auto& [prefix, st] : beam) {
      const double tot = st.total();
      Prefix& same = next[prefix];
      same.lm = st.lm;
      same.pb = lse2(same.pb, tot + row[blank]);
      if (!prefix.empty()) same.pnb = lse2(same.pnb, st.pnb + row[prefix.back()]);
      for (int c = 0; c < blank; ++c) {
        if (row[c] == kNegInf) continue;
        TokenSeq ext = prefix;
        ext.push_back(c);
        auto [it, fresh] = next.try_emplace(std::move(ext));
        if (fresh) it->second.lm = cfg.lm ? st.lm + lm_step(prefix, to_lm[c]) : 0.0;
        const double from = (!prefix.empty() && prefix.back() == c) ? st.pb : tot;
        it->second.pnb = lse2(it->second.pnb, from + row[c]);
      }
    }
    // keep the best beam_size prefixes; ties broken by prefix order
    std::vector<std::pair<double, const TokenSeq*>> ranked;
    ranked.reserve(next.size());
    for (const auto& [prefix, st] : next) {
      const double tot = st.total();
      if (tot == kNegInf) continue;
      ranked.emplace_back(combined(cfg, tot, st.lm, prefix.size()), &prefix);
    }
    const std::size_t keep = std::min<std::size_t>(cfg.beam_size, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + keep, ranked.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return *a.second < *b.second;
                      });
    Beam pruned;
    for (std::size_t i = 0; i < keep; ++i) pruned.emplace(*ranked[i].second, next.at(*ranked[i].second));
    beam = std::move(pruned);
  }

  std::vector<Hypothesis> out;
  for (const auto& [prefix, st] : beam) {
    Hypothesis h;
    h.tokens = prefix;
    h.ctc_score = st.total();
    if (h.ctc_score == kNegInf) continue;
    h.lm_score = cfg.lm ? st.lm + lm_step(prefix, cfg.lm->eos()) : 0.0;
    h.score = combined(cfg, h.ctc_score, h.lm_score, prefix.size());
    out.push_back(std::move(h));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
  return out;
}

}  // namespace vadasr
