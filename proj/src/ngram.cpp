#include "vadasr/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "vadasr/binary_io.hpp"
#include "vadasr/error.hpp"

namespace vadasr {

NgramLM::NgramLM(int order, std::vector<std::string> vocab)
    : order_(order), vocab_(std::move(vocab)) {
  if (order_ < 1) throw InvalidArgument("ngram order must be >= 1, got " + std::to_string(order_));
  if (vocab_.empty()) throw InvalidArgument("ngram vocabulary is empty");
}

int NgramLM::id_of(const std::string& token) const {
  if (token == "<s>") return bos();
  if (token == "</s>") return eos();
  auto it = std::find(vocab_.begin(), vocab_.end(), token);
  return it == vocab_.end() ? -1 : static_cast<int>(it - vocab_.begin());
}

std::string NgramLM::name_of(int id) const {
  if (id == bos()) return "<s>";
  if (id == eos()) return "</s>";
  return vocab_.at(id);
}

void NgramLM::add_sentence(const TokenSeq& tokens) {
  std::vector<int> padded;
  padded.reserve(tokens.size() + 2);
  padded.push_back(bos());
  for (int t : tokens) {
    if (t < 0 || t >= static_cast<int>(vocab_.size()))
      throw VocabularyError("ngram: token id " + std::to_string(t) + " outside vocabulary");
    padded.push_back(t);
  }
  padded.push_back(eos());
  for (std::size_t i = 0; i < padded.size(); ++i) {
    for (int n = 1; n <= order_ && i + n <= padded.size(); ++n) {
      ++counts_[std::vector<int>(padded.begin() + i, padded.begin() + i + n)];
    }
    if (i > 0) ++unigram_total_;
  }
}

std::size_t NgramLM::count(std::span<const int> ngram) const {
  auto it = counts_.find(std::vector<int>(ngram.begin(), ngram.end()));
  return it == counts_.end() ? 0 : it->second;
}

double NgramLM::logprob(std::span<const int> history, int token) const {
  std::vector<int> ctx;
  ctx.reserve(history.size() + 2);
  ctx.push_back(bos());
  ctx.insert(ctx.end(), history.begin(), history.end());
  const std::size_t max_h = std::min<std::size_t>(order_ - 1, ctx.size());
  double penalty = 0.0;
  std::vector<int> key;
  for (std::size_t n = max_h; n >= 1; --n) {
    key.assign(ctx.end() - n, ctx.end());
    const std::size_t h = count(key);
    key.push_back(token);
    const std::size_t ht = h ? count(key) : 0;
    if (ht > 0) return penalty + std::log(static_cast<double>(ht) / static_cast<double>(h));
    penalty += std::log(kBackoffFactor);
  }
  // predictable outcomes: vocabulary plus </s>
  const int one = token;
  const double c = static_cast<double>(count(std::span<const int>(&one, 1)));
  const double denom = static_cast<double>(unigram_total_ + vocab_.size() + 1);
  return penalty + std::log((c + 1.0) / denom);
}

double NgramLM::sentence_logprob(const TokenSeq& tokens, bool with_eos) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    acc += logprob(std::span<const int>(tokens.data(), i), tokens[i]);
  if (with_eos) acc += logprob(tokens, eos());
  return acc;
}

std::string NgramLM::to_json() const {
  nlohmann::json tables = nlohmann::json::object();
  for (const auto& [ngram, c] : counts_) {
    std::string key;
    for (std::size_t i = 0; i < ngram.size(); ++i) key += (i ? " " : "") + name_of(ngram[i]);
    tables[std::to_string(ngram.size())][key] = c;
  }
  nlohmann::json j{{"order", order_}, {"vocab", vocab_}, {"counts", tables}};
  return j.dump(1);
}

NgramLM NgramLM::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NgramLM lm(j.at("order").get<int>(), j.at("vocab").get<std::vector<std::string>>());
    for (const auto& [len, table] : j.at("counts").items()) {
      for (const auto& [key, c] : table.items()) {
        std::vector<int> ngram;
        std::istringstream words(key);
        for (std::string w; words >> w;) {
          const int id = lm.id_of(w);
          if (id < 0) throw VocabularyError("ngram json: unknown token '" + w + "'");
          ngram.push_back(id);
        }
        if (ngram.empty() || static_cast<int>(ngram.size()) > lm.order_ ||
            std::to_string(ngram.size()) != len)
          throw FormatError("ngram json: bad n-gram key '" + key + "' in table " + len);
        const auto n = c.get<std::size_t>();
        lm.counts_[ngram] = n;
        if (ngram.size() == 1 && ngram[0] != lm.bos()) lm.unigram_total_ += n;
      }
    }
    return lm;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ngram json: ") + e.what());
  }
}

void NgramLM::save(const std::string& path) const { binary::write_text(path, to_json() + "\n"); }

NgramLM NgramLM::load(const std::string& path) { return from_json(binary::read_text(path)); }

NgramLM train_ngram(const std::vector<TokenSeq>& transcripts,
                    const std::vector<std::string>& vocab, int order) {
  if (transcripts.empty()) throw EmptyInput("train_ngram: no transcripts");
  NgramLM lm(order, vocab);
  for (const auto& t : transcripts) lm.add_sentence(t);
  return lm;
}

}  // namespace vadasr
