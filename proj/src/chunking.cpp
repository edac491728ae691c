#include "vadasr/chunking.hpp"

#include <algorithm>
#include <cmath>

#include "vadasr/audio.hpp"
#include "vadasr/error.hpp"

namespace vadasr {

ChunkLayout plan_chunks(std::size_t total_T, std::size_t body_len, std::size_t left_len,
                        std::size_t right_len) {
  if (body_len < 1) throw InvalidArgument("plan_chunks: body length must be >= 1");
  ChunkLayout layout;
  layout.total_T = total_T;
  for (std::size_t b = 0; b < total_T; b += body_len) {
    Chunk c;
    c.body = {b, std::min(total_T, b + body_len)};
    c.left_ctx = {b - std::min(b, left_len), b};
    c.right_ctx = {c.body.end, std::min(total_T, c.body.end + right_len)};
    layout.chunks.push_back(c);
  }
  return layout;
}

void validate_layout(const ChunkLayout& layout) {
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < layout.chunks.size(); ++i) {
    const Chunk& c = layout.chunks[i];
    const std::string where = "chunk " + std::to_string(i);
    if (c.body.begin != cursor)
      throw LayoutError(where + ": body starts at " + std::to_string(c.body.begin) +
                        ", expected " + std::to_string(cursor));
    if (c.body.empty()) throw LayoutError(where + ": empty body");
    if (c.left_ctx.end != c.body.begin || c.left_ctx.begin > c.left_ctx.end)
      throw LayoutError(where + ": left context does not adjoin body");
    if (c.right_ctx.begin != c.body.end || c.right_ctx.end < c.right_ctx.begin ||
        c.right_ctx.end > layout.total_T)
      throw LayoutError(where + ": right context does not adjoin body");
    cursor = c.body.end;
  }
  if (cursor != layout.total_T)
    throw LayoutError("bodies cover " + std::to_string(cursor) + " of " +
                      std::to_string(layout.total_T) + " frames");
}

std::size_t seconds_to_frames(double seconds) {
  if (!(seconds >= 0.0)) throw InvalidArgument("negative duration " + std::to_string(seconds));
  return static_cast<std::size_t>(std::llround(seconds / kCanonicalFrameSeconds));
}

std::size_t sample_chunk_len(Rng& rng, double min_s, double max_s) {
  if (min_s > max_s)
    throw InvalidArgument("sample_chunk_len: min " + std::to_string(min_s) + " > max " +
                          std::to_string(max_s));
  return std::max<std::size_t>(1, seconds_to_frames(rng.uniform(min_s, max_s)));
}

Tensor stitch_outputs(const std::vector<Tensor>& per_chunk, const ChunkLayout& layout) {
  validate_layout(layout);
  if (per_chunk.size() != layout.chunks.size())
    throw LayoutError("stitch: " + std::to_string(per_chunk.size()) + " outputs for " +
                      std::to_string(layout.chunks.size()) + " chunks");
  if (per_chunk.empty()) return Tensor({0, 0});
  const std::size_t cols = per_chunk.front().cols();
  Tensor out({layout.total_T, cols});
  for (std::size_t i = 0; i < per_chunk.size(); ++i) {
    const Tensor& part = per_chunk[i];
    const FrameRange body = layout.chunks[i].body;
    if (part.rank() != 2 || part.rows() != body.size() || part.cols() != cols)
      throw LayoutError("stitch: chunk " + std::to_string(i) + " output " +
                        shape_string(part.shape()) + " does not cover body of " +
                        std::to_string(body.size()) + " frames");
    std::copy(part.data().begin(), part.data().end(), out.row(body.begin).begin());
  }
  return out;
}

PosteriorGrid stitch_outputs(const std::vector<PosteriorGrid>& per_chunk, const ChunkLayout& layout) {
  std::vector<Tensor> parts;
  for (const auto& g : per_chunk) {
    if (!per_chunk.empty() && g.vocab != per_chunk.front().vocab)
      throw LayoutError("stitch: chunks disagree on vocabulary");
    parts.push_back(g.log_probs);
  }
  PosteriorGrid out;
  out.log_probs = stitch_outputs(parts, layout);
  if (!per_chunk.empty()) out.vocab = per_chunk.front().vocab;
  return out;
}

}  // namespace vadasr
