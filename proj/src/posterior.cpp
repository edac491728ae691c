#include "vadasr/posterior.hpp"

#include <cmath>

#include "json.hpp"
#include "vadasr/binary_io.hpp"
#include "vadasr/error.hpp"

namespace vadasr {

double max_normalization_error(const Tensor& log_probs) {
  double worst = 0.0;
  for (std::size_t r = 0; r < log_probs.rows(); ++r) {
    double acc = 0.0;
    for (double v : log_probs.row(r)) acc += std::exp(v);
    worst = std::max(worst, std::abs(acc - 1.0));
  }
  return worst;
}

std::vector<char> encode_posteriors(const Tensor& log_probs) {
  binary::Writer w;
  w.bytes("VAP1");
  w.u32(static_cast<std::uint32_t>(log_probs.rows()));
  w.u32(static_cast<std::uint32_t>(log_probs.cols()));
  for (double v : log_probs.data()) w.f64(v);
  return w.buffer();
}

Tensor decode_posteriors(const std::vector<char>& bytes) {
  binary::Reader r(bytes, "posteriors");
  if (r.bytes(4) != "VAP1") throw FormatError("posteriors: bad magic, expected VAP1");
  const std::uint32_t frames = r.u32();
  const std::uint32_t classes = r.u32();
  if (classes < 2) throw FormatError("posteriors: need at least one token plus blank");
  const std::size_t expected = 12 + static_cast<std::size_t>(frames) * classes * 8;
  if (bytes.size() != expected)
    throw FormatError("posteriors: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));
  Tensor t({frames, classes});
  for (double& v : t.data()) v = r.f64();
  return t;
}

void write_external_posteriors(const std::string& path, const PosteriorGrid& grid) {
  binary::write_file(path, encode_posteriors(grid.log_probs));
  nlohmann::json side{{"vocab", grid.vocab}, {"blank_index", grid.blank_index()}};
  binary::write_text(path + ".json", side.dump() + "\n");
}

PosteriorGrid load_external_posteriors(const std::string& path) {
  PosteriorGrid grid;
  grid.log_probs = decode_posteriors(binary::read_file(path));
  try {
    const auto side = nlohmann::json::parse(binary::read_text(path + ".json"));
    grid.vocab = side.at("vocab").get<std::vector<std::string>>();
    const int blank = side.at("blank_index").get<int>();
    if (blank != static_cast<int>(grid.vocab.size()))
      throw FormatError("posteriors: blank_index must be the last class (" +
                        std::to_string(grid.vocab.size()) + "), got " + std::to_string(blank));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("posteriors sidecar: ") + e.what());
  }
  if (grid.classes() != grid.log_probs.cols())
    throw FormatError("posteriors: sidecar lists " + std::to_string(grid.classes()) +
                      " classes, grid has " + std::to_string(grid.log_probs.cols()));
  for (double v : grid.log_probs.data())
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw FormatError("posteriors: log-probabilities must be finite or -inf");
  const double err = max_normalization_error(grid.log_probs);
  if (err > 1e-3)
    throw FormatError("posteriors: rows not normalized (max deviation " + std::to_string(err) + ")");
  return grid;
}

}  // namespace vadasr
