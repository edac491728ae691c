#include "vadasr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "vadasr/error.hpp"

namespace vadasr {

VadReport vad_report(std::size_t n_total, std::size_t n_fa, std::size_t n_miss) {
  if (n_total == 0) throw EmptyInput("vad metrics: no frames to score");
  VadReport r;
  r.n_total = n_total;
  r.n_fa = n_fa;
  r.n_miss = n_miss;
  const double n = static_cast<double>(n_total);
  r.fa = static_cast<double>(n_fa) / n;
  r.miss = static_cast<double>(n_miss) / n;
  r.deter = r.fa + r.miss;
  return r;
}

VadReport vad_metrics(const Mask& ref, const Mask& hyp, std::size_t collar) {
  if (ref.size() != hyp.size())
    throw DimensionError("vad metrics: reference has " + std::to_string(ref.size()) +
                         " frames, hypothesis " + std::to_string(hyp.size()));
  if (ref.empty()) throw EmptyInput("vad metrics: empty masks");
  std::vector<bool> skip(ref.size(), false);
  if (collar > 0) {
    for (std::size_t t = 1; t < ref.size(); ++t) {
      if (bool(ref[t]) == bool(ref[t - 1])) continue;
      const std::size_t lo = t > collar ? t - collar : 0, hi = std::min(ref.size(), t + collar);
      for (std::size_t k = lo; k < hi; ++k) skip[k] = true;
    }
  }
  std::size_t total = 0, fa = 0, miss = 0;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    if (skip[t]) continue;
    ++total;
    if (hyp[t] && !ref[t]) ++fa;
    if (!hyp[t] && ref[t]) ++miss;
  }
  return vad_report(total, fa, miss);
}

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& o) {
  sub += o.sub;
  del += o.del;
  ins += o.ins;
  ref_len += o.ref_len;
  return *this;
}

ErrorCounts edit_counts(const TokenSeq& ref, const TokenSeq& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto D = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) D(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) D(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      D(i, j) = std::min({D(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]), D(i, j - 1) + 1, D(i - 1, j) + 1});
  ErrorCounts c;
  c.ref_len = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && D(i, j) == D(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1])) {
      c.sub += ref[i - 1] != hyp[j - 1];
      --i, --j;
    } else if (j > 0 && D(i, j) == D(i, j - 1) + 1) {
      ++c.ins;
      --j;
    } else {
      ++c.del;
      --i;
    }
  }
  return c;
}

ErrorRateReport error_rate(const ErrorCounts& c) {
  if (c.ref_len == 0) throw EmptyInput("error rate undefined for an empty reference");
  const double n = static_cast<double>(c.ref_len);
  ErrorRateReport r;
  r.ref_len = c.ref_len;
  r.sub = static_cast<double>(c.sub) / n;
  r.del = static_cast<double>(c.del) / n;
  r.ins = static_cast<double>(c.ins) / n;
  r.rate = r.sub + r.del + r.ins;
  return r;
}

ErrorRateReport token_error_rate(const TokenSeq& ref, const TokenSeq& hyp) {
  return error_rate(edit_counts(ref, hyp));
}

Mask segments_to_mask(const std::vector<TimeSpan>& spans, std::size_t T, double dur) {
  if (!(dur > 0.0)) throw InvalidArgument("frame duration must be positive");
  Mask mask(T, 0);
  const double limit = static_cast<double>(T) * dur;
  const double tol = 1e-9 * std::max(1.0, limit);
  for (const TimeSpan& s : spans) {
    if (!(s.start_s >= -tol && s.end_s >= s.start_s && s.end_s <= limit + tol))
      throw RangeError("segment [" + std::to_string(s.start_s) + ", " + std::to_string(s.end_s) +
                       ") outside [0, " + std::to_string(limit) + "]");
    const auto lo = static_cast<std::size_t>(std::max(0LL, std::llround(s.start_s / dur)));
    const auto hi = std::min<std::size_t>(T, static_cast<std::size_t>(std::llround(s.end_s / dur)));
    for (std::size_t t = lo; t < hi; ++t) mask[t] = 1;
  }
  return mask;
}

Mask segments_to_mask(const std::vector<SegmentEvent>& events, std::size_t T, double dur) {
  std::vector<TimeSpan> spans;
  for (const auto& e : events) spans.push_back({e.start_s, e.end_s});
  return segments_to_mask(spans, T, dur);
}

std::vector<FrameRange> mask_to_runs(const Mask& mask) {
  std::vector<FrameRange> runs;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    if (!runs.empty() && runs.back().end == t)
      ++runs.back().end;
    else
      runs.push_back({t, t + 1});
  }
  return runs;
}

std::vector<TimeSpan> runs_to_spans(const std::vector<FrameRange>& runs, double dur) {
  std::vector<TimeSpan> out;
  for (const auto& r : runs) out.push_back({static_cast<double>(r.begin) * dur, static_cast<double>(r.end) * dur});
  return out;
}

std::string score_report_json(const VadReport& vad, const ErrorRateReport& cer, std::size_t n_utts) {
  nlohmann::json j{{"deter", vad.deter}, {"fa", vad.fa},   {"miss", vad.miss}, {"cer", cer.rate},
                   {"sub", cer.sub},     {"del", cer.del}, {"ins", cer.ins},   {"n_utts", n_utts}};
  return j.dump();
}

}  // namespace vadasr
