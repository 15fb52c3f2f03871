#include "tenkit/ops.hpp"

#include <cstring>
#include <stdexcept>

#include "tenkit/kernels.hpp"
#include "threading.hpp"

namespace tenkit {
namespace {

void check_mode(const std::vector<index_t>& shape, index_t mode) {
  if (mode < 0 || mode >= static_cast<index_t>(shape.size()))
    throw std::invalid_argument("mode out of range");
}

void check_factor_shapes(const std::vector<index_t>& shape,
                         const std::vector<Matrix>& factors, index_t mode) {
  if (static_cast<index_t>(factors.size()) != static_cast<index_t>(shape.size()))
    throw std::invalid_argument("mttkrp: factor count does not match order");
  index_t f = -1;
  for (size_t m = 0; m < factors.size(); ++m) {
    if (static_cast<index_t>(m) == mode) continue;
    if (factors[m].rows() != shape[m])
      throw std::invalid_argument("mttkrp: factor rows do not match shape");
    if (f < 0)
      f = factors[m].cols();
    else if (factors[m].cols() != f)
      throw std::invalid_argument("mttkrp: factor column counts differ");
  }
}

// Row-major copies of the factor rows so that length-F rows are contiguous
// for the inner-loop kernels.
std::vector<Matrix> transpose_factors(const std::vector<Matrix>& factors,
                                      index_t skip) {
  std::vector<Matrix> t(factors.size());
  for (size_t m = 0; m < factors.size(); ++m)
    if (static_cast<index_t>(m) != skip && factors[m].size() > 0)
      t[m] = factors[m].transpose();
  return t;
}

// Odometer over the modes != mode of `shape`, visiting them column-major
// (lowest mode fastest). Maintains the running elementwise product of the
// skipped-mode factor rows in w.
class OtherModesProduct {
 public:
  OtherModesProduct(const std::vector<index_t>& shape,
                    const std::vector<Matrix>& factors_t, index_t mode,
                    index_t f)
      : f_(f) {
    for (size_t m = 0; m < shape.size(); ++m)
      if (static_cast<index_t>(m) != mode) {
        extents_.push_back(shape[m]);
        cols_.push_back(factors_t[m].data());
      }
    idx_.assign(extents_.size(), 0);
    // prefix_[j] = product of rows for other-modes < j; prefix_[0] = ones.
    prefix_.assign((extents_.size() + 1) * f_, 1.0);
    recompute_from(0);
  }

  const double* w() const { return prefix_.data() + extents_.size() * f_; }

  bool advance() {
    for (size_t m = 0; m < extents_.size(); ++m) {
      if (++idx_[m] < extents_[m]) {
        // modes below m wrapped to zero, so every prefix level changed
        recompute_from(0);
        return true;
      }
      idx_[m] = 0;
    }
    return false;
  }

 private:
  void recompute_from(size_t first) {
    const auto& k = kernels::active();
    for (size_t m = first; m < extents_.size(); ++m)
      k.mul_to(prefix_.data() + (m + 1) * f_, prefix_.data() + m * f_,
               cols_[m] + idx_[m] * f_, f_);
  }

  index_t f_;
  std::vector<index_t> extents_;
  std::vector<const double*> cols_;  // row-major factor data, rows length f_
  std::vector<index_t> idx_;
  std::vector<double> prefix_;
};

}  // namespace

Matrix unfold(const DenseTensor& t, index_t mode) {
  check_mode(t.shape(), mode);
  const auto& shape = t.shape();
  index_t below = 1, above = 1;
  for (index_t m = 0; m < mode; ++m) below *= shape[m];
  for (index_t m = mode + 1; m < t.order(); ++m) above *= shape[m];
  const index_t in = shape[mode];

  Matrix out(below * above, in);
  const double* src = t.data();
  for (index_t r = 0; r < above; ++r)
    for (index_t i = 0; i < in; ++i)
      std::memcpy(out.col(i).data() + r * below,
                  src + below * (i + in * r), sizeof(double) * below);
  return out;
}

DenseTensor fold(const Matrix& m, index_t mode,
                 const std::vector<index_t>& shape) {
  check_mode(shape, mode);
  index_t below = 1, above = 1;
  for (index_t mm = 0; mm < mode; ++mm) below *= shape[mm];
  for (size_t mm = mode + 1; mm < shape.size(); ++mm) above *= shape[mm];
  const index_t in = shape[mode];
  if (m.rows() != below * above || m.cols() != in)
    throw std::invalid_argument("fold: matrix dimensions inconsistent");

  DenseTensor out(shape);
  double* dst = out.data();
  for (index_t r = 0; r < above; ++r)
    for (index_t i = 0; i < in; ++i)
      std::memcpy(dst + below * (i + in * r),
                  m.col(i).data() + r * below, sizeof(double) * below);
  return out;
}

Matrix gram_hadamard(const std::vector<Matrix>& factors, index_t skip) {
  index_t f = -1;
  for (size_t m = 0; m < factors.size(); ++m) {
    if (static_cast<index_t>(m) == skip) continue;
    if (f < 0)
      f = factors[m].cols();
    else if (factors[m].cols() != f)
      throw std::invalid_argument("gram_hadamard: column counts differ");
  }
  if (f < 0) throw std::invalid_argument("gram_hadamard: no factors");

  Matrix g = Matrix::Ones(f, f);
  for (size_t m = 0; m < factors.size(); ++m) {
    if (static_cast<index_t>(m) == skip) continue;
    g = g.cwiseProduct((factors[m].transpose() * factors[m]).eval());
  }
  return g;
}

Matrix mttkrp(const DenseTensor& t, const std::vector<Matrix>& factors,
              index_t mode) {
  check_mode(t.shape(), mode);
  check_factor_shapes(t.shape(), factors, mode);
  const auto& shape = t.shape();
  const index_t in = shape[mode];
  index_t f = 0;
  for (size_t m = 0; m < factors.size(); ++m)
    if (static_cast<index_t>(m) != mode) f = factors[m].cols();

  index_t below = 1, above = 1;
  for (index_t m = 0; m < mode; ++m) below *= shape[m];
  for (index_t m = mode + 1; m < t.order(); ++m) above *= shape[m];

  const auto factors_t = transpose_factors(factors, mode);
  const double* src = t.data();
  const auto& k = kernels::active();

  // Parallel contract: partition over output rows; every worker sweeps the
  // whole tensor restricted to its row range, so results are independent of
  // the worker count.
  Matrix out_t = Matrix::Zero(f, in);  // row-major view of the I_n x F result
  detail::parallel_chunks(in, detail::num_threads(), [&](int, index_t lo,
                                                         index_t hi) {
    OtherModesProduct odo(shape, factors_t, mode, f);
    std::vector<double> w(f);
    index_t r = 0, l = 0;
    do {
      // current other-modes position: below part l, above part r
      for (index_t i = lo; i < hi; ++i) {
        const double x = src[l + below * (i + in * r)];
        k.axpy(out_t.col(i).data(), x, odo.w(), f);
      }
      if (++l == below) {
        l = 0;
        ++r;
      }
    } while (odo.advance());
  });
  return out_t.transpose();
}

Matrix mttkrp(const SparseTensor& t, const std::vector<Matrix>& factors,
              index_t mode) {
  check_mode(t.shape(), mode);
  check_factor_shapes(t.shape(), factors, mode);
  const index_t n = t.order();
  const index_t in = t.extent(mode);
  index_t f = 0;
  for (size_t m = 0; m < factors.size(); ++m)
    if (static_cast<index_t>(m) != mode) f = factors[m].cols();

  const auto factors_t = transpose_factors(factors, mode);
  const auto& k = kernels::active();
  const auto& idx = t.indices();
  const auto& vals = t.values();

  // Parallel contract: partition over nonzeros with one dense accumulator
  // per worker, merged once in worker order. No atomics in the hot loop.
  const int nt = detail::num_threads();
  std::vector<Matrix> acc(nt);
  detail::parallel_chunks(t.nnz(), nt, [&](int c, index_t lo, index_t hi) {
    acc[c] = Matrix::Zero(f, in);
    std::vector<double> row(f);
    for (index_t e = lo; e < hi; ++e) {
      k.fill(row.data(), vals[e], f);
      for (index_t m = 0; m < n; ++m) {
        if (m == mode) continue;
        k.mul(row.data(), factors_t[m].data() + idx[e * n + m] * f, f);
      }
      k.add(acc[c].col(idx[e * n + mode]).data(), row.data(), f);
    }
  });
  for (int c = 1; c < nt && c < static_cast<int>(acc.size()); ++c)
    if (acc[c].size() > 0) acc[0] += acc[c];
  if (acc[0].size() == 0) acc[0] = Matrix::Zero(f, in);
  return acc[0].transpose();
}

KruskalModel::KruskalModel(std::vector<Matrix> f)
    : factors(std::move(f)) {
  if (!factors.empty()) weights = Vector::Ones(factors[0].cols());
  validate();
}

std::vector<index_t> KruskalModel::shape() const {
  std::vector<index_t> s;
  s.reserve(factors.size());
  for (const auto& a : factors) s.push_back(a.rows());
  return s;
}

void KruskalModel::validate() const {
  if (factors.empty())
    throw std::invalid_argument("kruskal model: no factor matrices");
  const index_t f = factors[0].cols();
  if (f < 1) throw std::invalid_argument("kruskal model: rank must be >= 1");
  for (const auto& a : factors)
    if (a.cols() != f)
      throw std::invalid_argument("kruskal model: factor column counts differ");
  if (weights.size() != f)
    throw std::invalid_argument("kruskal model: weight length mismatch");
  for (index_t i = 0; i < f; ++i)
    if (weights(i) < 0.0)
      throw std::invalid_argument("kruskal model: weights must be nonnegative");
}

DenseTensor kruskal_reconstruct(const KruskalModel& m) {
  m.validate();
  const index_t f = m.rank();
  const auto shape = m.shape();
  DenseTensor out(shape);
  const index_t i0 = shape[0];
  const auto& a0 = m.factors[0];
  const auto& k = kernels::active();

  // Scaled row product over modes >= 1 (weights folded in), then one
  // axpy per component along the contiguous mode-0 fibers.
  std::vector<Matrix> factors_t(m.factors.size());
  for (size_t mm = 1; mm < m.factors.size(); ++mm)
    factors_t[mm] = m.factors[mm].transpose();

  std::vector<index_t> idx(m.order(), 0);
  std::vector<double> c(f);
  double* dst = out.data();
  const index_t fibers = out.size() / i0;
  for (index_t fib = 0; fib < fibers; ++fib) {
    for (index_t r = 0; r < f; ++r) c[r] = m.weights(r);
    for (index_t mm = 1; mm < m.order(); ++mm)
      k.mul(c.data(), factors_t[mm].data() + idx[mm] * f, f);
    double* fiber = dst + fib * i0;
    for (index_t r = 0; r < f; ++r)
      k.axpy(fiber, c[r], a0.col(r).data(), i0);
    for (index_t mm = 1; mm < m.order(); ++mm) {
      if (++idx[mm] < shape[mm]) break;
      idx[mm] = 0;
    }
  }
  return out;
}

double model_norm_sq(const KruskalModel& m) {
  const Matrix g = gram_hadamard(m.factors, -1);
  return m.weights.dot(g * m.weights);
}

double model_inner(const SparseTensor& t, const KruskalModel& m) {
  if (t.shape() != m.shape())
    throw std::invalid_argument("model_inner: shape mismatch");
  const index_t n = t.order();
  const index_t f = m.rank();
  std::vector<Matrix> factors_t(m.factors.size());
  for (size_t mm = 0; mm < m.factors.size(); ++mm)
    factors_t[mm] = m.factors[mm].transpose();
  const auto& k = kernels::active();
  const auto& idx = t.indices();
  std::vector<double> row(f);
  double acc = 0.0;
  for (index_t e = 0; e < t.nnz(); ++e) {
    k.fill(row.data(), 1.0, f);
    for (index_t mm = 0; mm < n; ++mm)
      k.mul(row.data(), factors_t[mm].data() + idx[e * n + mm] * f, f);
    acc += t.value(e) * k.dot(row.data(), m.weights.data(), f);
  }
  return acc;
}

double model_fit_residual(const DenseTensor& t, const KruskalModel& m) {
  if (t.shape() != m.shape())
    throw std::invalid_argument("model_fit_residual: shape mismatch");
  // Streamed along mode-0 fibers; never stores the full reconstruction.
  const index_t f = m.rank();
  const auto& shape = t.shape();
  const index_t i0 = shape[0];
  const auto& a0 = m.factors[0];
  const auto& k = kernels::active();

  std::vector<Matrix> factors_t(m.factors.size());
  for (size_t mm = 1; mm < m.factors.size(); ++mm)
    factors_t[mm] = m.factors[mm].transpose();

  std::vector<index_t> idx(m.order(), 0);
  std::vector<double> c(f);
  std::vector<double> fiber(i0);
  const double* src = t.data();
  const index_t fibers = t.size() / i0;
  double acc = 0.0;
  for (index_t fib = 0; fib < fibers; ++fib) {
    for (index_t r = 0; r < f; ++r) c[r] = m.weights(r);
    for (index_t mm = 1; mm < m.order(); ++mm)
      k.mul(c.data(), factors_t[mm].data() + idx[mm] * f, f);
    k.fill(fiber.data(), 0.0, i0);
    for (index_t r = 0; r < f; ++r)
      k.axpy(fiber.data(), c[r], a0.col(r).data(), i0);
    const double* x = src + fib * i0;
    for (index_t i = 0; i < i0; ++i) {
      const double d = x[i] - fiber[i];
      acc += d * d;
    }
    for (index_t mm = 1; mm < m.order(); ++mm) {
      if (++idx[mm] < shape[mm]) break;
      idx[mm] = 0;
    }
  }
  return acc;
}

double model_fit_residual(const SparseTensor& t, const KruskalModel& m) {
  if (t.shape() != m.shape())
    throw std::invalid_argument("model_fit_residual: shape mismatch");
  return t.norm_sq() - 2.0 * model_inner(t, m) + model_norm_sq(m);
}

}  // namespace tenkit
