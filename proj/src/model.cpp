#include "vadasr/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "json.hpp"
#include "vadasr/binary_io.hpp"
#include "vadasr/error.hpp"
#include "vadasr/ops.hpp"
#include "vadasr/rng.hpp"

namespace vadasr {
namespace {

std::atomic<std::uint64_t> g_attention_calls{0};

// conv1 80/40 pad 20 then conv2 16/8 pad 4: 320 samples in, 1 row out
constexpr std::size_t kConv1Kernel = 80, kConv1Stride = 40, kConv1Pad = 20;
constexpr std::size_t kConv2Kernel = 16, kConv2Stride = 8, kConv2Pad = 4;

Var linear(const ModelVars& m, Var x, const std::string& name, bool bias = true) {
  Var y = ops::matmul(x, m(name + ".w"));
  return bias ? ops::add_bias(y, m(name + ".b")) : y;
}

// q [Tq x d], k and v [Tk x d]; heads split the columns.
Var multi_head(Var q, Var k, Var v, std::size_t heads) {
  ++g_attention_calls;
  const std::size_t d = q.shape()[1];
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = ops::slice(q, 1, h * dh, (h + 1) * dh);
    Var kh = ops::slice(k, 1, h * dh, (h + 1) * dh);
    Var vh = ops::slice(v, 1, h * dh, (h + 1) * dh);
    Var att = ops::softmax_rows(ops::scale(ops::matmul(qh, ops::transpose(kh)), scale));
    outs.push_back(ops::matmul(att, vh));
  }
  return heads == 1 ? outs.front() : ops::concat(outs, 1);
}

Tensor positional(std::size_t T, std::size_t d, double scale) {
  Tensor pe({T, d});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      pe.at(t, i) = scale * std::sin(static_cast<double>(t) * freq);
      if (i + 1 < d) pe.at(t, i + 1) = scale * std::cos(static_cast<double>(t) * freq);
    }
  }
  return pe;
}

Var block(const ModelVars& m, Var x) {
  const std::size_t heads = m.params->dims.heads;
  Var n1 = ops::layer_norm(x, m("ctx.ln1.g"), m("ctx.ln1.b"));
  Var att = multi_head(linear(m, n1, "ctx.q"), linear(m, n1, "ctx.k"), linear(m, n1, "ctx.v"), heads);
  Var h = ops::add(x, linear(m, att, "ctx.o"));
  Var n2 = ops::layer_norm(h, m("ctx.ln2.g"), m("ctx.ln2.b"));
  Var ff = linear(m, ops::relu(linear(m, n2, "ctx.ff1")), "ctx.ff2");
  return ops::add(h, ff);
}

struct Spec {
  std::string name;
  Shape shape;
  enum Init { kZero, kOne, kNormal } init;
  double fan_in = 1.0;
  double gain = 1.0;
};

std::vector<Spec> layout_of(const ModelDims& d) {
  const std::size_t K = d.vocab_size + 1, D = d.d_model;
  std::vector<Spec> s{
      {"enc.conv1.w", {d.enc_channels, 1, kConv1Kernel}, Spec::kNormal, double(kConv1Kernel), 2.0},
      {"enc.conv1.b", {d.enc_channels}, Spec::kZero},
      {"enc.conv2.w", {D, d.enc_channels, kConv2Kernel}, Spec::kNormal,
       double(d.enc_channels * kConv2Kernel), 2.0},
      {"enc.conv2.b", {D}, Spec::kZero},
      {"vad.conv.w", {D, D / d.vad_groups, d.vad_kernel}, Spec::kNormal,
       double(D / d.vad_groups * d.vad_kernel), 2.0},
      {"vad.conv.b", {D}, Spec::kZero},
      {"vad.fc.w", {D, 1}, Spec::kNormal, double(D)},
      {"vad.fc.b", {1}, Spec::kZero},
      {"ctx.ln1.g", {D}, Spec::kOne},
      {"ctx.ln1.b", {D}, Spec::kZero},
      {"ctx.ln2.g", {D}, Spec::kOne},
      {"ctx.ln2.b", {D}, Spec::kZero},
      {"ctx.ff1.w", {D, d.ffn}, Spec::kNormal, double(D), 2.0},
      {"ctx.ff1.b", {d.ffn}, Spec::kZero},
      {"ctx.ff2.w", {d.ffn, D}, Spec::kNormal, double(d.ffn)},
      {"ctx.ff2.b", {D}, Spec::kZero},
      {"asr.w", {D, K}, Spec::kNormal, double(D)},
      {"asr.b", {K}, Spec::kZero},
  };
  for (const char* p : {"ctx.q", "ctx.k", "ctx.v", "ctx.o"}) {
    s.push_back({std::string(p) + ".w", {D, D}, Spec::kNormal, double(D)});
    s.push_back({std::string(p) + ".b", {D}, Spec::kZero});
  }
  for (const char* p : {"xatt.q", "xatt.k", "xatt.v", "xatt.o"})
    s.push_back({std::string(p) + ".w", {D, D}, Spec::kNormal, double(D)});
  return s;
}

void require_frames(const Tensor& frames) {
  if (frames.size() == 0 || frames.rank() != 2 || frames.rows() == 0)
    throw EmptyInput("model: no input frames");
  if (frames.cols() != kSamplesPerLatent)
    throw DimensionError("model: frames must hold " + std::to_string(kSamplesPerLatent) +
                         " samples (16 kHz, 20 ms), got " + shape_string(frames.shape()));
}

}  // namespace

std::uint64_t attention_calls() { return g_attention_calls.load(); }

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw FormatError("model: missing parameter '" + name + "'");
  return it->second;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

void validate_dims(const ModelDims& d) {
  auto fail = [](const std::string& msg) { throw ConfigError("model dims: " + msg); };
  if (d.d_model == 0 || d.heads == 0 || d.ffn == 0 || d.enc_channels == 0) fail("sizes must be positive");
  if (d.d_model % d.heads) fail("heads (" + std::to_string(d.heads) + ") must divide d_model (" +
                                std::to_string(d.d_model) + ")");
  if (d.vad_groups == 0 || d.d_model % d.vad_groups) fail("vad_groups must divide d_model");
  if (d.vad_kernel % 2 == 0) fail("vad_kernel must be odd");
  if (d.vocab_size == 0) fail("vocab_size must be positive");
}

ModelParams init_model(const ModelDims& dims, std::vector<std::string> vocab, std::uint64_t seed) {
  validate_dims(dims);
  if (vocab.size() != dims.vocab_size)
    throw ConfigError("model: vocab has " + std::to_string(vocab.size()) + " tokens, dims say " +
                      std::to_string(dims.vocab_size));
  ModelParams p{dims, std::move(vocab), {}};
  Rng rng(seed);
  for (const Spec& s : layout_of(dims)) {
    Tensor t(s.shape, s.init == Spec::kOne ? 1.0 : 0.0);
    if (s.init == Spec::kNormal) {
      const double sd = std::sqrt(s.gain / s.fan_in);
      for (double& v : t.data()) v = rng.normal(0.0, sd);
    }
    p.tensors.emplace(s.name, std::move(t));
  }
  return p;
}

void save_model(const std::string& path, const ModelParams& p) {
  save_tensors(path, p.tensors);
  const ModelDims& d = p.dims;
  nlohmann::json side{{"d_model", d.d_model},       {"heads", d.heads},
                      {"ffn", d.ffn},               {"enc_channels", d.enc_channels},
                      {"vad_groups", d.vad_groups}, {"vad_kernel", d.vad_kernel},
                      {"vocab_size", d.vocab_size}, {"pe_scale", d.pe_scale},
                      {"vocab", p.vocab}};
  binary::write_text(path + ".json", side.dump(1) + "\n");
}

ModelParams load_model(const std::string& path) {
  ModelParams p;
  try {
    const auto j = nlohmann::json::parse(binary::read_text(path + ".json"));
    ModelDims& d = p.dims;
    d.d_model = j.at("d_model").get<std::size_t>();
    d.heads = j.at("heads").get<std::size_t>();
    d.ffn = j.at("ffn").get<std::size_t>();
    d.enc_channels = j.at("enc_channels").get<std::size_t>();
    d.vad_groups = j.at("vad_groups").get<std::size_t>();
    d.vad_kernel = j.at("vad_kernel").get<std::size_t>();
    d.vocab_size = j.at("vocab_size").get<std::size_t>();
    d.pe_scale = j.at("pe_scale").get<double>();
    p.vocab = j.at("vocab").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model sidecar: ") + e.what());
  }
  validate_dims(p.dims);
  if (p.vocab.size() != p.dims.vocab_size) throw FormatError("model sidecar: vocab size mismatch");
  p.tensors = load_tensors(path);
  for (const Spec& s : layout_of(p.dims)) {
    const Tensor& t = p.at(s.name);
    if (t.shape() != s.shape)
      throw FormatError("model: parameter '" + s.name + "' has shape " + shape_string(t.shape()) +
                        ", expected " + shape_string(s.shape));
  }
  if (p.tensors.size() != layout_of(p.dims).size()) throw FormatError("model: unexpected parameters in checkpoint");
  return p;
}

Var ModelVars::operator()(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw UsageError("model: parameter '" + name + "' not bound");
  return it->second;
}

ModelVars bind_params(Tape& tape, const ModelParams& params, bool trainable,
                      const std::vector<std::string>& only) {
  ModelVars m{&params, {}, &tape};
  for (const auto& [name, t] : params.tensors) {
    const bool learn = trainable && (only.empty() || std::find(only.begin(), only.end(), name) != only.end());
    m.vars.emplace(name, learn ? tape.leaf(t, name) : tape.constant(t));
  }
  return m;
}

std::vector<std::string> param_names(const ModelParams& params, const std::string& prefix) {
  std::vector<std::string> out;
  for (const auto& [name, t] : params.tensors)
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
  return out;
}

Var encode_features(const ModelVars& m, const Tensor& frames) {
  require_frames(frames);
  Var wave = m.tape->constant(frames.reshaped({frames.size(), 1}));
  Var h = ops::relu(ops::conv1d(wave, m("enc.conv1.w"), m("enc.conv1.b"), kConv1Stride, kConv1Pad));
  return ops::relu(ops::conv1d(h, m("enc.conv2.w"), m("enc.conv2.b"), kConv2Stride, kConv2Pad));
}

VadVars vad_forward(const ModelVars& m, Var z) {
  const ModelDims& d = m.params->dims;
  VadVars v;
  v.hidden = ops::relu(ops::grouped_conv1d(z, m("vad.conv.w"), m("vad.conv.b"), d.vad_groups, d.vad_kernel / 2));
  v.logits = linear(m, v.hidden, "vad.fc");
  v.probs = ops::sigmoid(v.logits);
  return v;
}

std::vector<double> vad_score_frames(const Tensor& frames, const ModelParams& params) {
  Tape tape(false);
  ModelVars m = bind_params(tape, params, false);
  const Tensor& p = vad_forward(m, encode_features(m, frames)).probs.value();
  return p.values();
}

Var context_forward(const ModelVars& m, Var z, const ChunkLayout* layout) {
  const std::size_t T = z.shape()[0];
  const ModelDims& d = m.params->dims;
  Var x = ops::add(z, m.tape->constant(positional(T, z.shape()[1], d.pe_scale)));
  if (!layout) return block(m, x);
  if (layout->total_T != T)
    throw LayoutError("context_forward: layout covers " + std::to_string(layout->total_T) +
                      " frames, input has " + std::to_string(T));
  validate_layout(*layout);
  std::vector<Var> bodies;
  for (const Chunk& c : layout->chunks) {
    const FrameRange w = c.window();
    Var out = block(m, ops::slice(x, 0, w.begin, w.end));
    bodies.push_back(ops::slice(out, 0, c.body.begin - w.begin, c.body.end - w.begin));
  }
  return bodies.size() == 1 ? bodies.front() : ops::concat(bodies, 0);
}

Var cross_task_attend(const ModelVars& m, Var c, Var h_vad) {
  const std::size_t heads = m.params->dims.heads;
  if (c.shape().size() != 2 || h_vad.shape().size() != 2 || c.shape()[0] != h_vad.shape()[0])
    throw DimensionError("cross_task_attend: C " + shape_string(c.shape()) + " vs H_vad " +
                         shape_string(h_vad.shape()));
  if (heads == 0 || c.shape()[1] % heads)
    throw ConfigError("cross_task_attend: " + std::to_string(heads) + " heads do not divide d_model " +
                      std::to_string(c.shape()[1]));
  Var att = multi_head(linear(m, c, "xatt.q", false), linear(m, h_vad, "xatt.k", false),
                       linear(m, h_vad, "xatt.v", false), heads);
  return ops::add(c, linear(m, att, "xatt.o", false));
}

Var asr_head(const ModelVars& m, Var g) { return ops::log_softmax(linear(m, g, "asr")); }

ForwardVars forward(const ModelVars& m, const Tensor& frames, const ChunkLayout* layout) {
  ForwardVars f;
  f.z = encode_features(m, frames);
  VadVars v = vad_forward(m, f.z);
  f.h_vad = v.hidden;
  f.vad_logits = v.logits;
  f.speech_probs = v.probs;
  f.c = context_forward(m, f.z, layout);
  f.g = cross_task_attend(m, f.c, f.h_vad);
  f.log_probs = asr_head(m, f.g);
  return f;
}

ForwardArtifacts run_forward(const ModelParams& params, const Tensor& frames, const ChunkLayout* layout) {
  Tape tape(false);
  ModelVars m = bind_params(tape, params, false);
  ForwardVars f = forward(m, frames, layout);
  ForwardArtifacts a;
  a.Z = f.z.value();
  a.H_vad = f.h_vad.value();
  a.speech_probs = f.speech_probs.value().values();
  a.C = f.c.value();
  a.G = f.g.value();
  a.log_posteriors.log_probs = f.log_probs.value();
  a.log_posteriors.vocab = params.vocab;
  return a;
}

}  // namespace vadasr
