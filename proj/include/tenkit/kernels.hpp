#pragma once

#include <cstddef>
#include <string>

namespace tenkit::kernels {

/// Dispatch table for the dense inner-loop primitives every hot kernel is
/// built from. All functions operate on contiguous double buffers of
/// length n; aliasing between dst and src is not allowed.
struct Table {
  void (*fill)(double* dst, double value, std::size_t n);
  void (*mul)(double* dst, const double* src, std::size_t n);    // dst *= src
  void (*mul_to)(double* dst, const double* a, const double* b,
                 std::size_t n);                                 // dst = a*b
  void (*add)(double* dst, const double* src, std::size_t n);    // dst += src
  void (*axpy)(double* dst, double alpha, const double* x,
               std::size_t n);                                   // dst += alpha*x
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sumsq)(const double* x, std::size_t n);
  const char* name;
};

const Table& scalar();

bool avx2_available();
// Valid to call only when avx2_available() is true.
const Table& avx2();

/// Active table. On first use the TENKIT_SIMD environment variable is
/// consulted ("scalar", "avx2", "auto"); unset behaves like "auto",
/// which picks the widest variant the CPU supports.
const Table& active();

/// Force a variant ("scalar", "avx2", "auto"). Returns the name of the
/// variant actually installed.
std::string select(const std::string& which);

}  // namespace tenkit::kernels
