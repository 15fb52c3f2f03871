#include "tenkit/kernels.hpp"

namespace tenkit::kernels {
namespace {

void fill_scalar(double* dst, double value, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = value;
}

void mul_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] *= src[i];
}

void mul_to_scalar(double* dst, const double* a, const double* b,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void add_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void axpy_scalar(double* dst, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += alpha * x[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sumsq_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

}  // namespace

const Table& scalar() {
  static const Table table = {fill_scalar, mul_scalar, mul_to_scalar,
                              add_scalar,  axpy_scalar, dot_scalar,
                              sumsq_scalar, "scalar"};
  return table;
}

}  // namespace tenkit::kernels
