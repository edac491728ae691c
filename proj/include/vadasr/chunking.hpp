#pragma once

#include <cstddef>
#include <vector>

#include "vadasr/posterior.hpp"
#include "vadasr/rng.hpp"
#include "vadasr/tensor.hpp"

namespace vadasr {

struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool empty() const { return end == begin; }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

struct Chunk {
  FrameRange body;
  FrameRange left_ctx;
  FrameRange right_ctx;
  // [left_ctx.begin, right_ctx.end): what the context block sees
  FrameRange window() const {
    return {left_ctx.empty() ? body.begin : left_ctx.begin,
            right_ctx.empty() ? body.end : right_ctx.end};
  }
};

struct ChunkLayout {
  std::vector<Chunk> chunks;
  std::size_t total_T = 0;
};

ChunkLayout plan_chunks(std::size_t total_T, std::size_t body_len, std::size_t left_len,
                        std::size_t right_len);

// Throws LayoutError unless bodies tile [0, total_T) in order and every
// context adjoins its body inside the stream.
void validate_layout(const ChunkLayout& layout);

std::size_t seconds_to_frames(double seconds);

// Uniform length in [min_s, max_s], rounded to whole frames.
std::size_t sample_chunk_len(Rng& rng, double min_s = 0.5, double max_s = 3.0);

// Concatenates per-chunk outputs; chunk i must have exactly
// layout.chunks[i].body.size() rows.
Tensor stitch_outputs(const std::vector<Tensor>& per_chunk, const ChunkLayout& layout);
PosteriorGrid stitch_outputs(const std::vector<PosteriorGrid>& per_chunk, const ChunkLayout& layout);

}  // namespace vadasr
