#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tenkit/tensor.hpp"

namespace tenkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Column-wise Kronecker product: column f of the result is
/// kron(a(:,f), b(:,f)), size (rows(a)*rows(b)) x F.
Matrix khatri_rao(const Matrix& a, const Matrix& b);

/// Khatri-Rao chain over factors[modes] in the given order, left to right.
Matrix khatri_rao_chain(const std::vector<Matrix>& factors,
                        const std::vector<index_t>& modes);

Matrix kronecker(const Matrix& a, const Matrix& b);

Matrix hadamard(const Matrix& a, const Matrix& b);

/// Outer product of N >= 2 vectors; entry (i_1..i_N) = prod_n v_n(i_n).
DenseTensor outer(const std::vector<Vector>& vectors);

/// y = K_{m,n} * v applied as an index permutation, so that
/// K_{m,n} vec(S) = vec(S^T) for S of size m x n.
Vector commutation_apply(index_t m, index_t n, const Vector& v);

/// Dense commutation matrix K_{m,n}; desk-scale verification only.
Matrix commutation_matrix(index_t m, index_t n);

Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, index_t rows, index_t cols);

/// Numerical rank: number of singular values > tol * sigma_max.
index_t numerical_rank(const Matrix& m, double tol = 1e-9);

/// Moore-Penrose pseudo-inverse via SVD with tolerance tol * sigma_max.
Matrix pinv(const Matrix& m, double tol = 1e-12);

}  // namespace tenkit
