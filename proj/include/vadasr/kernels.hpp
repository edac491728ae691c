#pragma once

// Dense inner loops behind the tensor ops. Two builds of every kernel:
// `serial` is the plain reference, `omp` splits the outermost independent
// loop across OpenMP threads. Each output element is accumulated in the
// same order in both, so results are bit-identical.

#include <cstddef>
#include <span>

namespace vadasr::kernels {

struct ConvGeometry {
  std::size_t length = 0;    // input rows (time)
  std::size_t channels = 0;  // input columns
  std::size_t channel_begin = 0;
  std::size_t channel_count = 0;  // channels gathered into each patch
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_length() const {
    const std::size_t padded = length + 2 * padding;
    return padded < kernel ? 0 : (padded - kernel) / stride + 1;
  }
  std::size_t patch() const { return channel_count * kernel; }
};

#define VADASR_DECLARE_KERNELS                                                  \
  /* C (+)= A[m x k] * B[k x n] */                                              \
  void gemm_nn(std::size_t m, std::size_t k, std::size_t n,                     \
               std::span<const double> a, std::span<const double> b,            \
               std::span<double> c, bool accumulate);                           \
  /* C (+)= A[m x k] * B[n x k]^T */                                            \
  void gemm_nt(std::size_t m, std::size_t k, std::size_t n,                     \
               std::span<const double> a, std::span<const double> b,            \
               std::span<double> c, bool accumulate);                           \
  /* C (+)= A[k x m]^T * B[k x n] */                                            \
  void gemm_tn(std::size_t m, std::size_t k, std::size_t n,                     \
               std::span<const double> a, std::span<const double> b,            \
               std::span<double> c, bool accumulate);                           \
  /* Patch matrix [out_length x channel_count*kernel], column ci*kernel+j. */   \
  void im2col(const ConvGeometry& g, std::span<const double> x,                 \
              std::span<double> cols);                                          \
  /* Scatter-add of a patch-matrix gradient back onto the input gradient. */    \
  void col2im_add(const ConvGeometry& g, std::span<const double> cols,          \
                  std::span<double> dx);

namespace serial {
VADASR_DECLARE_KERNELS
}  // namespace serial

namespace omp {
VADASR_DECLARE_KERNELS
// Threads OpenMP will use for a parallel region (1 without OpenMP).
int max_threads();
}  // namespace omp

#undef VADASR_DECLARE_KERNELS

}  // namespace vadasr::kernels
