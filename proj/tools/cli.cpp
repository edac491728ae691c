#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vadasr/binary_io.hpp"
#include "vadasr/decode.hpp"
#include "vadasr/error.hpp"
#include "vadasr/evaluate.hpp"
#include "vadasr/ngram.hpp"
#include "vadasr/posterior.hpp"
#include "vadasr/streamer.hpp"
#include "vadasr/trainer.hpp"

namespace vadasr::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Flat JSON object keyed by flag name, applied to the selected subcommand.
// CLI11 only fills options that were not given on the command line, and
// rejects keys it does not know.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App& root) : root_(&root) {}
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    const auto subs = root_->get_subcommands();
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      if (!subs.empty()) item.parents = {subs.front()->get_name()};
      item.name = key;
      auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
      if (value.is_array())
        for (const auto& v : value) item.inputs.push_back(text(v));
      else
        item.inputs.push_back(text(value));
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  const CLI::App* root_;
};

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kUsage: return 1;
    case ErrorCategory::kData: return 2;
    case ErrorCategory::kNumeric: return 3;
  }
  return 2;
}

struct StreamFlags {
  double threshold = 0.45;
  double min_speech_s = 0.1;
  double min_silence_s = 0.6;
  double max_chunk_s = 5.0;
  double splice_s = 0.64;
  bool literal = false;

  StreamerConfig config() const {
    StreamerConfig c;
    c.vad_threshold = threshold;
    c.min_speech_frames = seconds_to_frames(min_speech_s);
    c.min_silence_frames = seconds_to_frames(min_silence_s);
    c.max_chunk_frames = seconds_to_frames(max_chunk_s);
    c.splice_frames = seconds_to_frames(splice_s);
    c.trim_silence = !literal;
    validate_config(c);
    return c;
  }
};

void add_stream_flags(CLI::App* sub, StreamFlags& f) {
  sub->add_option("--vad-threshold", f.threshold, "speech if score >= this")->capture_default_str();
  sub->add_option("--min-speech-s", f.min_speech_s, "C, speech needed to open an utterance")->capture_default_str();
  sub->add_option("--min-silence-s", f.min_silence_s, "B, silence that closes an utterance")->capture_default_str();
  sub->add_option("--max-chunk-s", f.max_chunk_s, "l, ASR queue capacity")->capture_default_str();
  sub->add_option("--splice-s", f.splice_s, "context spliced on each side when decoding")->capture_default_str();
  sub->add_flag("--literal", f.literal, "count leading silence into the window");
}

struct DecodeFlags {
  int beam = 20;
  double lm_weight = 0.46;
  double word_score = 0.52;
  std::string lm_path;
  bool greedy = false;

  std::optional<NgramLM> lm;
  BeamConfig config() {
    BeamConfig c;
    c.beam_size = beam;
    c.lm_weight = lm_weight;
    c.word_score = word_score;
    if (!lm_path.empty()) {
      lm = NgramLM::load(lm_path);
      c.lm = &*lm;
    }
    return c;
  }
};

void add_decode_flags(CLI::App* sub, DecodeFlags& f) {
  sub->add_option("--beam", f.beam, "beam width")->capture_default_str();
  sub->add_option("--lm-weight", f.lm_weight, "LM weight")->capture_default_str();
  sub->add_option("--word-score", f.word_score, "per-token insertion bonus")->capture_default_str();
  sub->add_option("--lm", f.lm_path, "n-gram LM JSON written by train");
  sub->add_flag("--greedy", f.greedy, "best-path decoding instead of beam search");
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw IoError("cannot write '" + path + "'");
    os_ = &file_;
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream in(binary::read_text(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<SegmentEvent> read_events(const std::string& path) {
  std::vector<SegmentEvent> events;
  std::size_t n = 0;
  for (const std::string& line : read_lines(path)) {
    ++n;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      SegmentEvent e;
      e.start_s = j.at("start_s").get<double>();
      e.end_s = j.at("end_s").get<double>();
      e.text = j.value("text", "");
      events.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw FormatError(path + ":" + std::to_string(n) + ": bad event line: " + ex.what());
    }
  }
  return events;
}

// Whitespace tokens mapped to ids through a dictionary shared by ref and hyp.
TokenSeq to_ids(const std::string& text, std::map<std::string, int>& dict) {
  std::istringstream in(text);
  TokenSeq out;
  for (std::string tok; in >> tok;) out.push_back(dict.emplace(tok, static_cast<int>(dict.size())).first->second);
  return out;
}

std::vector<SegmentEvent> run_streamer(const ModelParams& params, const std::string& wav, const StreamerConfig& cfg,
                                       const Recognizer* rec) {
  SampleBuffer audio = read_wav(wav);
  if (audio.sample_rate_hz != kCanonicalSampleRate)
    throw UnsupportedFormat(wav + ": sample rate " + std::to_string(audio.sample_rate_hz) + " Hz, expected " +
                            std::to_string(kCanonicalSampleRate));
  return stream_audio(params, audio, cfg, rec).events;
}

void write_events(const std::vector<SegmentEvent>& events, const std::string& path, std::ostream& out) {
  Output o(path, out);
  for (const auto& e : events) *o << event_to_json(e) << '\n';
}

void check_events(const std::vector<SegmentEvent>& events, const StreamerConfig& cfg) {
  auto v = event_violations(events, cfg);
  if (v.empty()) return;
  std::string msg = "event validation failed: " + v.front();
  if (v.size() > 1) msg += " (+" + std::to_string(v.size() - 1) + " more)";
  throw RangeError(msg);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint streaming VAD and ASR on synthetic tone speech", "vadasr"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "flat JSON object of flag values for the subcommand");
  app.config_formatter(std::make_shared<JsonConfig>(app));
  app.allow_config_extras(CLI::config_extras_mode::error);
  auto make_sub = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_config_extras(CLI::config_extras_mode::error);
    return sub;
  };

  // gen-corpus
  CorpusSpec spec;
  std::string gen_out;
  std::size_t train_count = 0;
  CLI::App* gen = make_sub("gen-corpus", "write a synthetic tone corpus (manifest, wavs, masks)");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--count", spec.utterance_count, "utterances")->capture_default_str();
  gen->add_option("--vocab-size", spec.vocab_size, "symbols")->capture_default_str();
  gen->add_option("--noise", spec.noise_amplitude, "white noise amplitude")->capture_default_str();
  gen->add_option("--seed", spec.seed, "generator seed")->capture_default_str();
  gen->add_option("--train-count", train_count, "if > 0, split into out/train and out/dev");

  // train
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  std::string stage = "mtl", corpus_path, dev_path, train_out, init_path;
  std::uint64_t model_seed = 7;
  int lm_order = 4;
  bool no_hopping = false;
  CLI::App* tr = make_sub("train", "train one stage and write checkpoint, report and n-gram LM");
  tr->add_option("--stage", stage, "asr | mtl | vad")->capture_default_str();
  tr->add_option("--corpus", corpus_path, "training manifest")->required();
  tr->add_option("--dev", dev_path, "dev manifest for the report");
  tr->add_option("--out", train_out, "checkpoint path")->required();
  tr->add_option("--init", init_path, "start from this checkpoint");
  tr->add_option("--epochs", tc.epochs)->capture_default_str();
  tr->add_option("--lr", tc.learning_rate, "peak learning rate")->capture_default_str();
  tr->add_option("--batch-size", tc.batch_size)->capture_default_str();
  tr->add_option("--vad-weight", tc.vad_weight)->capture_default_str();
  tr->add_option("--chunk-min-s", tc.chunk_min_s)->capture_default_str();
  tr->add_option("--chunk-max-s", tc.chunk_max_s)->capture_default_str();
  tr->add_option("--splice-s", tc.splice_s, "training chunk context")->capture_default_str();
  tr->add_option("--grad-clip", tc.grad_clip)->capture_default_str();
  tr->add_flag("--no-chunk-hopping", no_hopping);
  tr->add_option("--seed", tc.seed, "shuffle and chunk sampling seed")->capture_default_str();
  tr->add_option("--model-seed", model_seed, "initialization seed without --init")->capture_default_str();
  tr->add_option("--lm-order", lm_order)->capture_default_str();

  // transcribe / segment
  std::string model_path, wav_path, events_out;
  bool validate = false;
  StreamFlags sf;
  DecodeFlags df;
  CLI::App* trans = make_sub("transcribe", "stream a WAV and write JSON-lines events with text");
  CLI::App* seg = make_sub("segment", "stream a WAV and write JSON-lines boundaries only");
  for (CLI::App* sub : {trans, seg}) {
    sub->add_option("--model", model_path, "checkpoint")->required();
    sub->add_option("--wav", wav_path, "16 kHz mono PCM16 WAV")->required();
    sub->add_option("--out", events_out, "events file (default stdout)");
    sub->add_flag("--validate", validate, "check streamer invariants on the emitted events");
    add_stream_flags(sub, sf);
  }
  add_decode_flags(trans, df);

  // score
  std::string ref_mask, hyp_mask, hyp_events, ref_text, hyp_text, score_out;
  std::size_t collar = 0;
  double frame_s = kCanonicalFrameSeconds;
  CLI::App* sc = make_sub("score", "DetER and/or CER of hypotheses against references");
  sc->add_option("--ref-mask", ref_mask, "reference frame mask");
  sc->add_option("--hyp-mask", hyp_mask, "hypothesis frame mask");
  sc->add_option("--hyp-events", hyp_events, "events JSON lines (spans and text)");
  sc->add_option("--ref-text", ref_text, "reference transcripts, one per line");
  sc->add_option("--hyp-text", hyp_text, "hypothesis transcripts, line-aligned with --ref-text");
  sc->add_option("--collar-frames", collar)->capture_default_str();
  sc->add_option("--frame-s", frame_s)->capture_default_str();
  sc->add_option("--out", score_out, "report file (default stdout)");
  sc->get_option("--hyp-mask")->excludes("--hyp-events");
  sc->get_option("--hyp-text")->needs("--ref-text");

  // decode-posteriors
  std::string post_path;
  CLI::App* dp = make_sub("decode-posteriors", "beam search over an external posterior file");
  dp->add_option("--posteriors", post_path, "VAP1 grid with .json vocab sidecar")->required();
  add_decode_flags(dp, df);

  // evaluate
  std::string mode = "segmented", eval_out;
  std::vector<double> l_asr{0.64, 1.0, 3.0, 5.0};
  Range gaps{0.5, 2.0};
  double stream_noise = 0.02;
  std::uint64_t stream_seed = 11;
  CLI::App* ev = make_sub("evaluate", "segmented or streaming CER/DetER on a corpus");
  ev->add_option("--model", model_path, "checkpoint")->required();
  ev->add_option("--corpus", corpus_path, "manifest")->required();
  ev->add_option("--mode", mode, "segmented | streaming")->capture_default_str()->check(
      CLI::IsMember({"segmented", "streaming"}));
  ev->add_option("--l-asr", l_asr, "queue capacities in seconds (streaming)")->capture_default_str();
  ev->add_option("--gap-min-s", gaps.lo, "silence between concatenated utterances")->capture_default_str();
  ev->add_option("--gap-max-s", gaps.hi)->capture_default_str();
  ev->add_option("--stream-noise", stream_noise)->capture_default_str();
  ev->add_option("--seed", stream_seed, "stream concatenation seed")->capture_default_str();
  ev->add_option("--out", eval_out, "report file (default stdout)");
  add_stream_flags(ev, sf);
  add_decode_flags(ev, df);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    const std::string extras = "INI was not able to parse ";
    if (msg.rfind(extras, 0) == 0) msg = "unknown config key '" + msg.substr(extras.size()) + "'";
    err << "error: " << msg << '\n';
    return 1;
  }

  try {
    if (gen->parsed()) {
      Corpus corpus = gen_synthetic_corpus(spec);
      json summary{{"utterances", corpus.size()}};
      if (train_count > 0) {
        auto [train_part, dev_part] = split_corpus(corpus, train_count);
        write_manifest(train_part, (fs::path(gen_out) / "train").string());
        write_manifest(dev_part, (fs::path(gen_out) / "dev").string());
        summary["train"] = train_part.size();
        summary["dev"] = dev_part.size();
      } else {
        write_manifest(corpus, gen_out);
      }
      out << summary.dump() << '\n';
    } else if (tr->parsed()) {
      tc.stage = parse_stage(stage);
      tc.chunk_hopping = !no_hopping;
      Corpus train_corpus = load_manifest(corpus_path);
      std::optional<Corpus> dev;
      if (!dev_path.empty()) dev = load_manifest(dev_path, train_corpus.vocab);
      tc.evaluate_dev = dev.has_value();
      ModelParams params = init_path.empty() ? init_model(ModelDims{}, train_corpus.vocab, model_seed)
                                             : load_model(init_path);
      TrainReport report = train(params, train_corpus, dev ? &*dev : nullptr, tc);
      save_model(train_out, params);
      std::vector<TokenSeq> transcripts;
      for (const auto& u : train_corpus.utterances) transcripts.push_back(u.transcript);
      train_ngram(transcripts, train_corpus.vocab, lm_order).save(train_out + ".lm.json");
      const std::string report_json = report_to_json(report);
      binary::write_text(train_out + ".report.json", report_json + "\n");
      out << report_json << '\n';
    } else if (trans->parsed() || seg->parsed()) {
      const StreamerConfig cfg = sf.config();
      ModelParams params = load_model(model_path);
      std::optional<Recognizer> rec;
      if (trans->parsed()) rec.emplace(params, df.config(), !df.greedy);
      auto events = run_streamer(params, wav_path, cfg, rec ? &*rec : nullptr);
      if (validate) check_events(events, cfg);
      write_events(events, events_out, out);
    } else if (sc->parsed()) {
      json report = json::object();
      std::optional<std::vector<SegmentEvent>> events;
      if (!hyp_events.empty()) events = read_events(hyp_events);
      if (!ref_mask.empty()) {
        const Mask ref = read_mask(ref_mask);
        Mask hyp;
        if (!hyp_mask.empty())
          hyp = read_mask(hyp_mask);
        else if (events)
          hyp = segments_to_mask(*events, ref.size(), frame_s);
        else
          throw UsageError("--ref-mask needs --hyp-mask or --hyp-events");
        const VadReport v = vad_metrics(ref, hyp, collar);
        report.update({{"deter", v.deter}, {"fa", v.fa}, {"miss", v.miss}, {"frames", v.n_total}});
      }
      if (!ref_text.empty()) {
        const auto refs = read_lines(ref_text);
        std::map<std::string, int> dict;
        ErrorCounts counts;
        if (!hyp_text.empty()) {
          const auto hyps = read_lines(hyp_text);
          if (hyps.size() != refs.size())
            throw DimensionError("score: " + std::to_string(refs.size()) + " reference lines vs " +
                                 std::to_string(hyps.size()) + " hypothesis lines");
          for (std::size_t i = 0; i < refs.size(); ++i) counts += edit_counts(to_ids(refs[i], dict), to_ids(hyps[i], dict));
        } else if (events) {
          std::string all_ref, all_hyp;
          for (const auto& r : refs) all_ref += r + ' ';
          for (const auto& e : *events) all_hyp += e.text + ' ';
          counts = edit_counts(to_ids(all_ref, dict), to_ids(all_hyp, dict));
        } else {
          throw UsageError("--ref-text needs --hyp-text or --hyp-events");
        }
        const ErrorRateReport r = error_rate(counts);
        report.update({{"cer", r.rate}, {"sub", r.sub}, {"del", r.del}, {"ins", r.ins}, {"ref_len", r.ref_len},
                       {"n_utts", refs.size()}});
      }
      if (report.empty()) throw UsageError("score: give --ref-mask and/or --ref-text");
      Output o(score_out, out);
      *o << report.dump() << '\n';
    } else if (dp->parsed()) {
      PosteriorGrid grid = load_external_posteriors(post_path);
      json j;
      if (df.greedy) {
        j = {{"text", join_tokens(greedy_decode(grid), grid.vocab)}};
      } else {
        const Hypothesis best = beam_search(grid, df.config()).front();
        j = {{"text", join_tokens(best.tokens, grid.vocab)}, {"score", best.score},
             {"ctc_score", best.ctc_score}, {"lm_score", best.lm_score}};
      }
      out << j.dump() << '\n';
    } else if (ev->parsed()) {
      ModelParams params = load_model(model_path);
      Corpus corpus = load_manifest(corpus_path, params.vocab);
      BeamConfig beam = df.config();
      Output o(eval_out, out);
      if (mode == "segmented") {
        *o << to_json(evaluate_segmented(params, corpus, beam, sf.threshold, !df.greedy)) << '\n';
      } else {
        if (df.greedy) throw UsageError("streaming evaluation decodes with beam search; drop --greedy");
        const StreamerConfig cfg = sf.config();
        LongStream stream = concatenate_with_gaps(corpus, gaps, stream_noise, stream_seed);
        json runs = json::array();
        for (double l : l_asr) runs.push_back(json::parse(to_json(evaluate_streaming(params, stream, cfg, beam, l))));
        *o << json{{"mode", "streaming"}, {"runs", runs}}.dump() << '\n';
      }
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace vadasr::cli
