#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "test_util.hpp"
#include "vadasr/binary_io.hpp"
#include "vadasr/corpus.hpp"
#include "vadasr/model.hpp"
#include "vadasr/posterior.hpp"

namespace vadasr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "vadasr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vadasr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string read(const std::string& name) const { return binary::read_text(path(name)); }
  std::string corpus(int n = 3) {
    EXPECT_EQ(run({"gen-corpus", "--out", path("c"), "--count", std::to_string(n)}).code, 0);
    return path("c/manifest.jsonl");
  }

  fs::path dir_;
};

TEST_F(Cli, UsageErrorsExitOne) {
  Result r = run({});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error:", 0), 0u) << r.err;
  EXPECT_EQ(run({"transcode"}).code, 1);
  EXPECT_EQ(run({"score", "--bogus"}).code, 1);
  EXPECT_EQ(run({"train", "--corpus", "x"}).code, 1);  // --out missing
  EXPECT_EQ(run({"evaluate", "--model", "m", "--corpus", "c", "--mode", "online"}).code, 1);
  EXPECT_EQ(run({"train", "--help"}).code, 0);
}

TEST_F(Cli, DataErrorsExitTwo) {
  Result r = run({"train", "--corpus", path("missing.jsonl"), "--out", path("m")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error:", 0), 0u);
}

TEST_F(Cli, NumericFailureExitsThree) {
  const std::string m = corpus();
  Result r = run({"train", "--corpus", m, "--out", path("m"), "--epochs", "2", "--lr", "1e200", "--grad-clip", "0"});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_EQ(r.err.rfind("error:", 0), 0u);
}

TEST_F(Cli, GenCorpusIsReproducible) {
  ASSERT_EQ(run({"gen-corpus", "--out", path("a"), "--count", "4", "--seed", "5"}).code, 0);
  ASSERT_EQ(run({"gen-corpus", "--out", path("b"), "--count", "4", "--seed", "5"}).code, 0);
  EXPECT_EQ(read("a/manifest.jsonl"), read("b/manifest.jsonl"));
  EXPECT_EQ(read("a/wavs/utt00003.wav"), read("b/wavs/utt00003.wav"));
  Result split = run({"gen-corpus", "--out", path("s"), "--count", "5", "--train-count", "3"});
  ASSERT_EQ(split.code, 0);
  EXPECT_EQ(json::parse(split.out)["dev"], 2);
  EXPECT_TRUE(fs::exists(path("s/dev/manifest.jsonl")));
}

TEST_F(Cli, TrainWritesArtifactsDeterministically) {
  const std::string m = corpus();
  for (const char* out : {"m1", "m2"})
    ASSERT_EQ(run({"train", "--stage", "asr", "--corpus", m, "--out", path(out), "--epochs", "1"}).code, 0);
  EXPECT_EQ(read("m1"), read("m2"));
  EXPECT_EQ(read("m1.lm.json"), read("m2.lm.json"));
  EXPECT_TRUE(fs::exists(path("m1.json")));
  auto report = json::parse(read("m1.report.json"));
  EXPECT_EQ(report["stage"], "asr");
  Result r = run({"train", "--stage", "mtl", "--corpus", m, "--init", path("m1"), "--out", path("m3"), "--epochs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(read("m3"), read("m1"));
}

TEST_F(Cli, FlagBeatsConfigBeatsDefault) {
  const std::string m = corpus();
  binary::write_text(path("cfg.json"), R"({"epochs": 2, "stage": "vad", "batch-size": 2})");
  auto epochs = [&](std::vector<std::string> extra) {
    std::vector<std::string> args{"train", "--corpus", m, "--out", path("m")};
    args.insert(args.end(), extra.begin(), extra.end());
    Result r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    auto j = json::parse(r.out);
    return std::make_pair(j["epochs"].size(), j["stage"].get<std::string>());
  };
  EXPECT_EQ(epochs({"--config", path("cfg.json")}), std::make_pair(std::size_t{2}, std::string("vad")));
  EXPECT_EQ(epochs({"--config", path("cfg.json"), "--epochs", "1"}), std::make_pair(std::size_t{1}, std::string("vad")));
  EXPECT_EQ(epochs({"--epochs", "1"}), std::make_pair(std::size_t{1}, std::string("mtl")));
  binary::write_text(path("bad.json"), R"({"epochs": 1, "epoch": 2})");
  Result r = run({"train", "--corpus", m, "--out", path("m"), "--config", path("bad.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("epoch"), std::string::npos) << r.err;
}

TEST_F(Cli, TranscribeAndSegmentEmitValidEvents) {
  const std::string m = corpus();
  save_model(path("model"), init_model(ModelDims{}, synthetic_vocab(5), 3));
  for (const char* sub : {"transcribe", "segment"}) {
    Result r = run({sub, "--model", path("model"), "--wav", path("c/wavs/utt00000.wav"), "--validate",
                    "--vad-threshold", "0.0", "--max-chunk-s", "0.3"});
    ASSERT_EQ(r.code, 0) << sub << r.err;
    // threshold 0 marks every frame as speech, so the utterance is cut at capacity
    std::istringstream lines(r.out);
    std::size_t n = 0;
    for (std::string line; std::getline(lines, line); ++n) {
      auto e = json::parse(line);
      EXPECT_LE(e["end_s"].get<double>() - e["start_s"].get<double>(), 0.3 + 1e-9);
    }
    EXPECT_GT(n, 1u);
  }
  EXPECT_EQ(run({"segment", "--model", path("model"), "--wav", path("nope.wav")}).code, 2);
}

TEST_F(Cli, ScoreOfIdenticalInputsIsZero) {
  const std::string m = corpus(1);
  binary::write_text(path("ref.txt"), "a b c\nd e\n");
  Result r = run({"score", "--ref-text", path("ref.txt"), "--hyp-text", path("ref.txt"), "--ref-mask",
                  path("c/masks/utt00000.vmsk"), "--hyp-mask", path("c/masks/utt00000.vmsk")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_EQ(j["cer"], 0.0);
  EXPECT_EQ(j["deter"], 0.0);
  EXPECT_EQ(j["n_utts"], 2);
  binary::write_text(path("hyp.txt"), "a c\nd e\n");
  j = json::parse(run({"score", "--ref-text", path("ref.txt"), "--hyp-text", path("hyp.txt")}).out);
  EXPECT_DOUBLE_EQ(j["cer"].get<double>(), 0.2);
  binary::write_text(path("short.txt"), "a c\n");
  EXPECT_EQ(run({"score", "--ref-text", path("ref.txt"), "--hyp-text", path("short.txt")}).code, 2);
  EXPECT_EQ(run({"score"}).code, 1);
}

TEST_F(Cli, ScoresEventsAgainstMaskAndText) {
  binary::write_text(path("ev.jsonl"),
                     "{\"start_s\":0.0,\"end_s\":0.04,\"text\":\"a\",\"cause\":\"end-of-utterance\"}\n"
                     "{\"start_s\":0.08,\"end_s\":0.1,\"text\":\"b\",\"cause\":\"finalize\"}\n");
  write_mask(path("ref.vmsk"), Mask{1, 1, 0, 0, 1});
  binary::write_text(path("ref.txt"), "a\nb\n");
  Result r = run({"score", "--ref-mask", path("ref.vmsk"), "--hyp-events", path("ev.jsonl"), "--ref-text", path("ref.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_EQ(j["deter"], 0.0);
  EXPECT_EQ(j["cer"], 0.0);
  binary::write_text(path("broken.jsonl"), "{\"start_s\":0.0}\n");
  EXPECT_EQ(run({"score", "--ref-mask", path("ref.vmsk"), "--hyp-events", path("broken.jsonl")}).code, 2);
}

TEST_F(Cli, DecodePosteriors) {
  // Two peaked frames on "b" then a blank: both decoders give "b".
  PosteriorGrid g;
  g.vocab = {"a", "b"};
  g.log_probs = Tensor({3, 3});
  const double rows[3][3] = {{0.1, 0.8, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}};
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t k = 0; k < 3; ++k) g.log_probs.at(t, k) = std::log(rows[t][k]);
  write_external_posteriors(path("g.vap"), g);
  for (const char* mode : {"--greedy", "--beam=4"}) {
    Result r = run({"decode-posteriors", "--posteriors", path("g.vap"), mode});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["text"], "b");
  }
  std::string bytes = read("g.vap");
  binary::write_text(path("g.vap"), bytes.substr(0, bytes.size() - 5));
  Result r = run({"decode-posteriors", "--posteriors", path("g.vap")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bytes"), std::string::npos) << r.err;
}

TEST_F(Cli, EvaluateBothModes) {
  const std::string m = corpus(2);
  save_model(path("model"), init_model(ModelDims{}, synthetic_vocab(5), 3));
  Result seg = run({"evaluate", "--model", path("model"), "--corpus", m, "--beam", "2"});
  ASSERT_EQ(seg.code, 0) << seg.err;
  EXPECT_EQ(json::parse(seg.out)["n_utts"], 2);
  Result st = run({"evaluate", "--model", path("model"), "--corpus", m, "--mode", "streaming", "--beam", "2",
                   "--l-asr", "0.64", "5"});
  ASSERT_EQ(st.code, 0) << st.err;
  auto runs = json::parse(st.out)["runs"];
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[1]["l_asr_s"], 5.0);
}

}  // namespace
}  // namespace vadasr
