#include "tenkit/linalg.hpp"

#include <stdexcept>

namespace tenkit {

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw std::invalid_argument("khatri_rao: column counts differ");
  const index_t ia = a.rows(), jb = b.rows(), f = a.cols();
  Matrix out(ia * jb, f);
  for (index_t c = 0; c < f; ++c)
    for (index_t i = 0; i < ia; ++i)
      out.block(i * jb, c, jb, 1) = a(i, c) * b.col(c);
  return out;
}

Matrix khatri_rao_chain(const std::vector<Matrix>& factors,
                        const std::vector<index_t>& modes) {
  if (modes.empty()) throw std::invalid_argument("khatri_rao_chain: empty");
  Matrix out = factors[modes[0]];
  for (size_t i = 1; i < modes.size(); ++i)
    out = khatri_rao(out, factors[modes[i]]);
  return out;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (index_t i = 0; i < a.rows(); ++i)
    for (index_t j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("hadamard: dimension mismatch");
  return a.cwiseProduct(b);
}

DenseTensor outer(const std::vector<Vector>& vectors) {
  if (vectors.size() < 2)
    throw std::invalid_argument("outer: need at least two vectors");
  std::vector<index_t> shape;
  for (const auto& v : vectors) {
    if (v.size() == 0) throw std::invalid_argument("outer: empty vector");
    shape.push_back(v.size());
  }
  DenseTensor out(shape);
  const index_t n = out.order();
  std::vector<index_t> idx(n, 0);
  for (index_t lin = 0; lin < out.size(); ++lin) {
    double prod = 1.0;
    for (index_t m = 0; m < n; ++m) prod *= vectors[m](idx[m]);
    out[lin] = prod;
    for (index_t m = 0; m < n; ++m) {
      if (++idx[m] < shape[m]) break;
      idx[m] = 0;
    }
  }
  return out;
}

Vector commutation_apply(index_t m, index_t n, const Vector& v) {
  if (v.size() != m * n)
    throw std::invalid_argument("commutation_apply: length mismatch");
  Vector out(m * n);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = 0; i < m; ++i) out(i * n + j) = v(j * m + i);
  return out;
}

Matrix commutation_matrix(index_t m, index_t n) {
  Matrix k = Matrix::Zero(m * n, m * n);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = 0; i < m; ++i) k(i * n + j, j * m + i) = 1.0;
  return k;
}

Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix unvec(const Vector& v, index_t rows, index_t cols) {
  if (v.size() != rows * cols)
    throw std::invalid_argument("unvec: length mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

index_t numerical_rank(const Matrix& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  index_t r = 0;
  for (index_t i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) ++r;
  return r;
}

Matrix pinv(const Matrix& m, double tol) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Vector inv = Vector::Zero(s.size());
  const double cutoff = s.size() ? tol * s(0) : 0.0;
  for (index_t i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace tenkit
