#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vadasr/audio.hpp"

namespace vadasr {

using TokenSeq = std::vector<int>;
using Mask = std::vector<std::uint8_t>;  // per frame, 1 = speech

struct Utterance {
  std::string id;
  SampleBuffer audio;
  TokenSeq transcript;  // ids into Corpus::vocab
  Mask speech_mask;     // one entry per canonical frame
};

struct Corpus {
  std::vector<std::string> vocab;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  bool empty() const { return utterances.empty(); }
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct CorpusSpec {
  int vocab_size = 5;
  int utterance_count = 250;
  Range symbols_per_utterance{2, 6};
  Range tone_duration_s{0.12, 0.30};
  Range gap_duration_s{0.06, 0.30};
  double noise_amplitude = 0.02;
  double tone_amplitude = 0.5;
  std::uint64_t seed = 7;
};

// Beep language: symbol k is a sine at tone_frequency_hz(k, V).
double tone_frequency_hz(int symbol, int vocab_size);
std::vector<std::string> synthetic_vocab(int vocab_size);

// Silences and tones alternate (starting and ending with silence). Segment
// lengths are whole canonical frames so the mask is exact; white Gaussian
// noise of standard deviation noise_amplitude covers the whole signal.
Corpus gen_synthetic_corpus(const CorpusSpec& spec);

// First `train_count` utterances versus the rest.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, std::size_t train_count);

// The standard desk-scale setup: 200 train and 50 dev utterances, seed 7.
std::pair<Corpus, Corpus> default_train_dev(std::uint64_t seed = 7);

// Dev utterances joined by generated silences into one long recording, with
// concatenated references.
struct LongStream {
  SampleBuffer audio;
  Mask speech_mask;
  TokenSeq transcript;
};
LongStream concatenate_with_gaps(const Corpus& corpus, Range gap_s,
                                 double noise_amplitude, std::uint64_t seed);

// "VMSK" | u32 T | T bytes each 0 or 1.
std::vector<char> encode_mask(const Mask& mask);
Mask decode_mask(const std::vector<char>& bytes);
void write_mask(const std::string& path, const Mask& mask);
Mask read_mask(const std::string& path);

std::string join_tokens(const TokenSeq& tokens, const std::vector<std::string>& vocab);
TokenSeq parse_tokens(const std::string& text, const std::vector<std::string>& vocab);

// Corpus manifest: JSON lines {id, wav_path, transcript, mask_path}, paths
// relative to the manifest directory. write_manifest also stores the
// vocabulary as vocab.json next to the manifest.
void write_manifest(const Corpus& corpus, const std::string& dir);
Corpus load_manifest(const std::string& manifest_path,
                     const std::optional<std::vector<std::string>>& vocab = std::nullopt);

}  // namespace vadasr
