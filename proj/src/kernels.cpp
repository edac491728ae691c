#include "vadasr/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vadasr::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

inline void prepare(std::span<double> c, bool accumulate) {
  if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
}

// Row kernels shared by both builds; the builds differ only in how rows are
// distributed.
inline void gemm_nn_row(std::size_t i, std::size_t k, std::size_t n,
                        const double* a, const double* b, double* c) {
  double* ci = c + i * n;
  const double* ai = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = ai[p];
    if (av == 0.0) continue;
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
  }
}

inline void gemm_nt_row(std::size_t i, std::size_t k, std::size_t n,
                        const double* a, const double* b, double* c) {
  const double* ai = a + i * k;
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    const double* bj = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
    ci[j] += acc;
  }
}

inline void gemm_tn_row(std::size_t i, std::size_t m, std::size_t k,
                        std::size_t n, const double* a, const double* b,
                        double* c) {
  double* ci = c + i * n;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p * m + i];
    if (av == 0.0) continue;
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
  }
}

inline void im2col_row(const ConvGeometry& g, std::size_t o, const double* x,
                       double* cols) {
  double* row = cols + o * g.patch();
  const auto base = static_cast<std::ptrdiff_t>(o * g.stride) -
                    static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t ci = 0; ci < g.channel_count; ++ci) {
    const std::size_t channel = g.channel_begin + ci;
    for (std::size_t j = 0; j < g.kernel; ++j) {
      const std::ptrdiff_t pos = base + static_cast<std::ptrdiff_t>(j);
      row[ci * g.kernel + j] =
          (pos < 0 || pos >= static_cast<std::ptrdiff_t>(g.length))
              ? 0.0
              : x[static_cast<std::size_t>(pos) * g.channels + channel];
    }
  }
}

inline void col2im_channel(const ConvGeometry& g, std::size_t ci,
                           const double* cols, double* dx) {
  const std::size_t out_len = g.out_length();
  const std::size_t channel = g.channel_begin + ci;
  for (std::size_t o = 0; o < out_len; ++o) {
    const double* row = cols + o * g.patch() + ci * g.kernel;
    const auto base = static_cast<std::ptrdiff_t>(o * g.stride) -
                      static_cast<std::ptrdiff_t>(g.padding);
    for (std::size_t j = 0; j < g.kernel; ++j) {
      const std::ptrdiff_t pos = base + static_cast<std::ptrdiff_t>(j);
      if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(g.length)) continue;
      dx[static_cast<std::size_t>(pos) * g.channels + channel] += row[j];
    }
  }
}

}  // namespace

namespace serial {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  prepare(c, accumulate);
  for (std::size_t i = 0; i < m; ++i) gemm_nn_row(i, k, n, a.data(), b.data(), c.data());
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  prepare(c, accumulate);
  for (std::size_t i = 0; i < m; ++i) gemm_nt_row(i, k, n, a.data(), b.data(), c.data());
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  prepare(c, accumulate);
  for (std::size_t i = 0; i < m; ++i)
    gemm_tn_row(i, m, k, n, a.data(), b.data(), c.data());
}

void im2col(const ConvGeometry& g, std::span<const double> x,
            std::span<double> cols) {
  const std::size_t out_len = g.out_length();
  for (std::size_t o = 0; o < out_len; ++o) im2col_row(g, o, x.data(), cols.data());
}

void col2im_add(const ConvGeometry& g, std::span<const double> cols,
                std::span<double> dx) {
  for (std::size_t ci = 0; ci < g.channel_count; ++ci)
    col2im_channel(g, ci, cols.data(), dx.data());
}

}  // namespace serial

namespace omp {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  prepare(c, accumulate);
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    gemm_nn_row(static_cast<std::size_t>(i), k, n, a.data(), b.data(), c.data());
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  prepare(c, accumulate);
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    gemm_nt_row(static_cast<std::size_t>(i), k, n, a.data(), b.data(), c.data());
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  prepare(c, accumulate);
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    gemm_tn_row(static_cast<std::size_t>(i), m, k, n, a.data(), b.data(), c.data());
}

void im2col(const ConvGeometry& g, std::span<const double> x,
            std::span<double> cols) {
  const auto out_len = static_cast<std::ptrdiff_t>(g.out_length());
#pragma omp parallel for schedule(static) if (g.out_length() * g.patch() >= kParallelWork)
  for (std::ptrdiff_t o = 0; o < out_len; ++o)
    im2col_row(g, static_cast<std::size_t>(o), x.data(), cols.data());
}

void col2im_add(const ConvGeometry& g, std::span<const double> cols,
                std::span<double> dx) {
  // Channels write disjoint columns of dx, so they can run concurrently.
  const auto count = static_cast<std::ptrdiff_t>(g.channel_count);
#pragma omp parallel for schedule(static) if (g.out_length() * g.patch() >= kParallelWork)
  for (std::ptrdiff_t ci = 0; ci < count; ++ci)
    col2im_channel(g, static_cast<std::size_t>(ci), cols.data(), dx.data());
}

}  // namespace omp

}  // namespace vadasr::kernels
