#include "vadasr/audio.hpp"

#include <algorithm>
#include <cmath>

#include "vadasr/binary_io.hpp"
#include "vadasr/error.hpp"

namespace vadasr {

FrameSequence FrameSequence::sub(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size())
    throw RangeError("frame range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + std::to_string(size()) + " frames");
  const std::size_t dim = frame_dim();
  std::vector<double> data(frames.data().begin() + static_cast<std::ptrdiff_t>(begin * dim),
                           frames.data().begin() + static_cast<std::ptrdiff_t>(end * dim));
  FrameSequence out;
  out.frames = Tensor({end - begin, dim}, std::move(data));
  out.frame_duration_s = frame_duration_s;
  out.origin_offset_s = time_of(begin);
  out.sample_rate_hz = sample_rate_hz;
  return out;
}

SampleBuffer decode_wav(const std::vector<char>& bytes) {
  binary::Reader r(bytes, "wav");
  if (bytes.size() < 12 || r.bytes(4) != "RIFF") throw FormatError("wav: missing RIFF header");
  r.u32();
  if (r.bytes(4) != "WAVE") throw FormatError("wav: missing WAVE tag");

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (r.remaining() >= 8) {
    const std::string id = r.bytes(4);
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      if (size < 16) throw FormatError("wav: fmt chunk too short");
      const std::uint16_t format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      r.skip(size - 16);
      if (format != 1) throw UnsupportedFormat("wav: only PCM is supported (format tag " +
                                               std::to_string(format) + ")");
      if (channels != 1)
        throw UnsupportedFormat("wav: only mono is supported, got " +
                                std::to_string(channels) + " channels");
      if (bits != 16)
        throw UnsupportedFormat("wav: only 16-bit samples are supported, got " +
                                std::to_string(bits));
      if (rate == 0) throw FormatError("wav: zero sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      if (size % 2 != 0) throw FormatError("wav: odd data chunk size");
      r.need(size);
      SampleBuffer buf;
      buf.sample_rate_hz = static_cast<int>(rate);
      buf.samples.resize(size / 2);
      for (double& s : buf.samples) s = static_cast<double>(r.i16()) / 32768.0;
      return buf;
    } else {
      r.skip(size + (size & 1));
    }
  }
  throw FormatError("wav: no data chunk");
}

SampleBuffer read_wav(const std::string& path) { return decode_wav(binary::read_file(path)); }

std::vector<char> encode_wav(const SampleBuffer& buf) {
  const auto n = static_cast<std::uint32_t>(buf.samples.size());
  binary::Writer w;
  w.bytes("RIFF");
  w.u32(36 + 2 * n);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(1);
  w.u16(1);
  w.u32(static_cast<std::uint32_t>(buf.sample_rate_hz));
  w.u32(static_cast<std::uint32_t>(buf.sample_rate_hz) * 2);
  w.u16(2);
  w.u16(16);
  w.bytes("data");
  w.u32(2 * n);
  for (double s : buf.samples) {
    const double scaled = std::round(s * 32768.0);
    w.i16(static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0)));
  }
  return w.buffer();
}

void write_wav(const std::string& path, const SampleBuffer& buf) {
  binary::write_file(path, encode_wav(buf));
}

std::size_t samples_per_frame(int sample_rate_hz, double frame_duration_s) {
  if (!(frame_duration_s > 0.0)) throw InvalidArgument("frame duration must be positive");
  if (sample_rate_hz <= 0) throw InvalidArgument("sample rate must be positive");
  const auto window = static_cast<std::size_t>(std::lround(frame_duration_s * sample_rate_hz));
  if (window == 0) throw InvalidArgument("frame shorter than one sample");
  return window;
}

FrameSequence frame_stream(const SampleBuffer& buf, double frame_duration_s) {
  const std::size_t window = samples_per_frame(buf.sample_rate_hz, frame_duration_s);
  const std::size_t count = buf.samples.size() / window;
  FrameSequence out;
  out.frame_duration_s = frame_duration_s;
  out.sample_rate_hz = buf.sample_rate_hz;
  out.frames = Tensor({count, window},
                      std::vector<double>(buf.samples.begin(),
                                          buf.samples.begin() +
                                              static_cast<std::ptrdiff_t>(count * window)));
  return out;
}

}  // namespace vadasr
