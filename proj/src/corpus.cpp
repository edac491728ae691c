#include "vadasr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

#include "vadasr/binary_io.hpp"
#include "vadasr/error.hpp"
#include "vadasr/rng.hpp"

namespace vadasr {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kLowestToneHz = 400.0;
constexpr double kHighestToneHz = 7600.0;
constexpr double kPreferredSpacingHz = 400.0;
constexpr double kMinSpacingHz = 200.0;

void check_range(const char* name, Range r) {
  if (!(r.lo > 0.0) || r.hi < r.lo)
    throw InvalidSpec(std::string("corpus spec: range ") + name + " must be positive and non-empty");
}

std::size_t to_frames(double seconds) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(seconds / kCanonicalFrameSeconds)));
}

void add_noise(std::vector<double>& samples, double amplitude, Rng& rng) {
  if (amplitude <= 0.0) return;
  for (double& s : samples) s = std::clamp(s + rng.normal(0.0, amplitude), -1.0, 1.0);
}

}  // namespace

double tone_frequency_hz(int symbol, int vocab_size) {
  const double spacing =
      vocab_size <= 1 ? kPreferredSpacingHz
                      : std::min(kPreferredSpacingHz,
                                 (kHighestToneHz - kLowestToneHz) / (vocab_size - 1));
  if (spacing < kMinSpacingHz)
    throw InvalidSpec("corpus spec: vocabulary of " + std::to_string(vocab_size) +
                      " does not fit below Nyquist with 200 Hz spacing");
  return kLowestToneHz + spacing * symbol;
}

std::vector<std::string> synthetic_vocab(int vocab_size) {
  std::vector<std::string> vocab;
  for (int k = 0; k < vocab_size; ++k)
    vocab.push_back(vocab_size <= 26 ? std::string(1, static_cast<char>('a' + k))
                                     : "s" + std::to_string(k));
  return vocab;
}

Corpus gen_synthetic_corpus(const CorpusSpec& spec) {
  if (spec.vocab_size < 2) throw InvalidSpec("corpus spec: vocab_size must be at least 2");
  if (spec.utterance_count < 0) throw InvalidSpec("corpus spec: negative utterance_count");
  check_range("symbols_per_utterance", spec.symbols_per_utterance);
  check_range("tone_duration_s", spec.tone_duration_s);
  check_range("gap_duration_s", spec.gap_duration_s);
  if (spec.noise_amplitude < 0.0) throw InvalidSpec("corpus spec: negative noise_amplitude");
  tone_frequency_hz(spec.vocab_size - 1, spec.vocab_size);

  const std::size_t window = samples_per_frame(kCanonicalSampleRate, kCanonicalFrameSeconds);
  Rng rng(spec.seed);
  Corpus corpus;
  corpus.vocab = synthetic_vocab(spec.vocab_size);
  for (int u = 0; u < spec.utterance_count; ++u) {
    Utterance utt;
    std::ostringstream id;
    id << "utt" << std::to_string(100000 + u).substr(1);
    utt.id = id.str();
    utt.audio.sample_rate_hz = kCanonicalSampleRate;
    const auto n_symbols = rng.uniform_int(static_cast<std::int64_t>(spec.symbols_per_utterance.lo),
                                           static_cast<std::int64_t>(spec.symbols_per_utterance.hi));
    auto add_silence = [&] {
      const std::size_t frames = to_frames(rng.uniform(spec.gap_duration_s.lo, spec.gap_duration_s.hi));
      utt.audio.samples.insert(utt.audio.samples.end(), frames * window, 0.0);
      utt.speech_mask.insert(utt.speech_mask.end(), frames, 0);
    };
    add_silence();
    for (std::int64_t s = 0; s < n_symbols; ++s) {
      const int symbol = static_cast<int>(rng.uniform_int(0, spec.vocab_size - 1));
      const double freq = tone_frequency_hz(symbol, spec.vocab_size);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const std::size_t frames = to_frames(rng.uniform(spec.tone_duration_s.lo, spec.tone_duration_s.hi));
      for (std::size_t i = 0; i < frames * window; ++i)
        utt.audio.samples.push_back(
            spec.tone_amplitude *
            std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / kCanonicalSampleRate + phase));
      utt.speech_mask.insert(utt.speech_mask.end(), frames, 1);
      utt.transcript.push_back(symbol);
      add_silence();
    }
    add_noise(utt.audio.samples, spec.noise_amplitude, rng);
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, std::size_t train_count) {
  if (train_count > corpus.size()) throw InvalidArgument("split beyond corpus size");
  Corpus train{corpus.vocab, {}}, dev{corpus.vocab, {}};
  for (std::size_t i = 0; i < corpus.size(); ++i)
    (i < train_count ? train : dev).utterances.push_back(corpus.utterances[i]);
  return {std::move(train), std::move(dev)};
}

std::pair<Corpus, Corpus> default_train_dev(std::uint64_t seed) {
  CorpusSpec spec;
  spec.seed = seed;
  spec.utterance_count = 250;
  return split_corpus(gen_synthetic_corpus(spec), 200);
}

LongStream concatenate_with_gaps(const Corpus& corpus, Range gap_s, double noise_amplitude,
                                 std::uint64_t seed) {
  check_range("gap_s", gap_s);
  const std::size_t window = samples_per_frame(kCanonicalSampleRate, kCanonicalFrameSeconds);
  Rng rng(seed);
  LongStream out;
  out.audio.sample_rate_hz = kCanonicalSampleRate;
  auto gap = [&] {
    const std::size_t frames = to_frames(rng.uniform(gap_s.lo, gap_s.hi));
    std::vector<double> silence(frames * window, 0.0);
    add_noise(silence, noise_amplitude, rng);
    out.audio.samples.insert(out.audio.samples.end(), silence.begin(), silence.end());
    out.speech_mask.insert(out.speech_mask.end(), frames, 0);
  };
  for (const Utterance& utt : corpus.utterances) {
    gap();
    const std::size_t frames = utt.speech_mask.size();
    out.audio.samples.insert(out.audio.samples.end(), utt.audio.samples.begin(),
                             utt.audio.samples.begin() + static_cast<std::ptrdiff_t>(frames * window));
    out.speech_mask.insert(out.speech_mask.end(), utt.speech_mask.begin(), utt.speech_mask.end());
    out.transcript.insert(out.transcript.end(), utt.transcript.begin(), utt.transcript.end());
  }
  gap();
  return out;
}

std::vector<char> encode_mask(const Mask& mask) {
  binary::Writer w;
  w.bytes("VMSK");
  w.u32(static_cast<std::uint32_t>(mask.size()));
  for (auto v : mask) w.u8(v ? 1 : 0);
  return w.buffer();
}

Mask decode_mask(const std::vector<char>& bytes) {
  binary::Reader r(bytes, "mask");
  if (r.bytes(4) != "VMSK") throw FormatError("mask: bad magic, expected VMSK");
  const std::uint32_t n = r.u32();
  r.need(n);
  Mask mask(n);
  for (auto& v : mask) {
    v = r.u8();
    if (v > 1) throw FormatError("mask: byte value " + std::to_string(v) + " is not 0/1");
  }
  if (r.remaining() != 0) throw FormatError("mask: trailing bytes");
  return mask;
}

void write_mask(const std::string& path, const Mask& mask) {
  binary::write_file(path, encode_mask(mask));
}

Mask read_mask(const std::string& path) { return decode_mask(binary::read_file(path)); }

std::string join_tokens(const TokenSeq& tokens, const std::vector<std::string>& vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= vocab.size())
      throw VocabularyError("token id " + std::to_string(tokens[i]) + " outside vocabulary");
    if (i) out += ' ';
    out += vocab[static_cast<std::size_t>(tokens[i])];
  }
  return out;
}

TokenSeq parse_tokens(const std::string& text, const std::vector<std::string>& vocab) {
  std::istringstream in(text);
  TokenSeq out;
  std::string tok;
  while (in >> tok) {
    auto it = std::find(vocab.begin(), vocab.end(), tok);
    if (it == vocab.end()) throw VocabularyError("token '" + tok + "' not in vocabulary");
    out.push_back(static_cast<int>(it - vocab.begin()));
  }
  return out;
}

void write_manifest(const Corpus& corpus, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "wavs");
  fs::create_directories(fs::path(dir) / "masks");
  std::string lines;
  for (const Utterance& utt : corpus.utterances) {
    const std::string wav = "wavs/" + utt.id + ".wav";
    const std::string mask = "masks/" + utt.id + ".vmsk";
    write_wav((fs::path(dir) / wav).string(), utt.audio);
    write_mask((fs::path(dir) / mask).string(), utt.speech_mask);
    json line{{"id", utt.id},
              {"wav_path", wav},
              {"transcript", join_tokens(utt.transcript, corpus.vocab)},
              {"mask_path", mask}};
    lines += line.dump() + "\n";
  }
  binary::write_text((fs::path(dir) / "manifest.jsonl").string(), lines);
  binary::write_text((fs::path(dir) / "vocab.json").string(), json(corpus.vocab).dump() + "\n");
}

Corpus load_manifest(const std::string& manifest_path,
                     const std::optional<std::vector<std::string>>& vocab) {
  const fs::path base = fs::path(manifest_path).parent_path();
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest '" + manifest_path + "'");
  std::vector<json> lines;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      lines.push_back(json::parse(text));
    } catch (const json::exception& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  Corpus corpus;
  if (vocab) {
    corpus.vocab = *vocab;
  } else if (fs::exists(base / "vocab.json")) {
    corpus.vocab = json::parse(binary::read_text((base / "vocab.json").string()))
                       .get<std::vector<std::string>>();
  } else {
    std::set<std::string> seen;
    for (const json& l : lines) {
      std::istringstream words(l.at("transcript").get<std::string>());
      std::string w;
      while (words >> w) seen.insert(w);
    }
    corpus.vocab.assign(seen.begin(), seen.end());
  }

  for (const json& l : lines) {
    try {
      Utterance utt;
      utt.id = l.at("id").get<std::string>();
      utt.audio = read_wav((base / l.at("wav_path").get<std::string>()).string());
      utt.transcript = parse_tokens(l.at("transcript").get<std::string>(), corpus.vocab);
      utt.speech_mask = read_mask((base / l.at("mask_path").get<std::string>()).string());
      const std::size_t window = samples_per_frame(utt.audio.sample_rate_hz, kCanonicalFrameSeconds);
      if (utt.speech_mask.size() != utt.audio.samples.size() / window)
        throw FormatError("utterance '" + utt.id + "': mask length " +
                          std::to_string(utt.speech_mask.size()) + " does not match " +
                          std::to_string(utt.audio.samples.size() / window) + " frames");
      corpus.utterances.push_back(std::move(utt));
    } catch (const json::exception& e) {
      throw FormatError(std::string("manifest entry: ") + e.what());
    }
  }
  return corpus;
}

}  // namespace vadasr
