#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vadasr/tensor.hpp"

namespace vadasr {

inline constexpr int kCanonicalSampleRate = 16000;
inline constexpr double kCanonicalFrameSeconds = 0.02;

struct SampleBuffer {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate_hz = kCanonicalSampleRate;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// Fixed-rate frames; row t is the window starting at
// origin_offset_s + t * frame_duration_s.
struct FrameSequence {
  Tensor frames;  // [T x samples_per_frame]
  double frame_duration_s = kCanonicalFrameSeconds;
  double origin_offset_s = 0.0;
  int sample_rate_hz = kCanonicalSampleRate;

  std::size_t size() const { return frames.size() == 0 ? 0 : frames.rows(); }
  std::size_t frame_dim() const { return frames.rank() == 2 ? frames.cols() : 0; }
  bool empty() const { return size() == 0; }
  double time_of(std::size_t t) const {
    return origin_offset_s + static_cast<double>(t) * frame_duration_s;
  }
  // Frames [begin, end) as a new sequence with the matching time origin.
  FrameSequence sub(std::size_t begin, std::size_t end) const;
};

// RIFF/WAVE, PCM 16-bit mono only. Samples divided by 32768.
SampleBuffer read_wav(const std::string& path);
SampleBuffer decode_wav(const std::vector<char>& bytes);
std::vector<char> encode_wav(const SampleBuffer& buf);
void write_wav(const std::string& path, const SampleBuffer& buf);

// floor(duration / frame_duration_s) frames; a trailing partial window is
// dropped.
FrameSequence frame_stream(const SampleBuffer& buf,
                           double frame_duration_s = kCanonicalFrameSeconds);

std::size_t samples_per_frame(int sample_rate_hz, double frame_duration_s);

}  // namespace vadasr
