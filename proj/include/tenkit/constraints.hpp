#pragma once

#include <Eigen/Cholesky>
#include <functional>
#include <optional>

#include "tenkit/linalg.hpp"

namespace tenkit {

enum class ConstraintKind {
  none,
  nonnegative,
  l1,                     // soft sparsity, parameter = lambda
  simplex,                // columns on the probability simplex
  smooth,                 // parameter = smoothness weight rho_s
  hard_sparsity,          // parameter = number of nonzeros kept
  monotone_nondecreasing,
  symmetric_with,         // parameter = other mode; penalty in `weight`
};

struct ConstraintDescriptor {
  ConstraintKind kind = ConstraintKind::none;
  double parameter = 0.0;
  double weight = 1.0;  // symmetric_with: quadratic penalty coefficient

  static ConstraintDescriptor none() { return {}; }
  static ConstraintDescriptor nonnegative() {
    return {ConstraintKind::nonnegative, 0.0, 1.0};
  }
  static ConstraintDescriptor l1(double lambda);
  static ConstraintDescriptor simplex() {
    return {ConstraintKind::simplex, 0.0, 1.0};
  }
  static ConstraintDescriptor smooth(double rho_s);
  static ConstraintDescriptor hard_sparsity(index_t keep);
  static ConstraintDescriptor monotone() {
    return {ConstraintKind::monotone_nondecreasing, 0.0, 1.0};
  }
  static ConstraintDescriptor symmetric_with(index_t mode,
                                             double penalty = 1.0);

  bool is_none() const { return kind == ConstraintKind::none; }
  bool has_prox() const;
  void validate(index_t column_length) const;
};

/// Proximity operator of the constraint at penalty rho, applied column-wise
/// to v. For set constraints this is the Euclidean projection.
Vector prox_apply(const Vector& v, const ConstraintDescriptor& constraint,
                  double rho);

/// Warm-startable ADMM state for one factor matrix (rows x F layout).
struct AdmmState {
  Matrix aux;    // feasible auxiliary factor
  Matrix dual;   // scaled dual variable
  double rho = 0.0;
  index_t last_inner_iterations = 0;
};

/// Solves min_{rows of factor in constraint set} ||X_(n) - M factor^T||_F^2
/// given gram = M^T M (F x F) and rhs = X_(n)^T M (rows x F), by ADMM with
/// a cached Cholesky factorization. Residual test is relative with
/// tolerance 1e-4; inner cap 50 iterations.
Matrix admm_constrained_ls(const Matrix& gram, const Matrix& rhs,
                           const ConstraintDescriptor& constraint,
                           AdmmState& warm);

/// Optimal scaling update (rank-1 constrained LS): the optimal constrained
/// column is the projection of the unconstrained LS coefficient vector
/// c~ = (m^T residual / ||m||^2)^T onto the constraint set.
Vector optimal_scaling_update(const Matrix& residual, const Vector& m,
                              const std::function<Vector(const Vector&)>& projector);
Vector optimal_scaling_update(const Matrix& residual, const Vector& m,
                              const ConstraintDescriptor& projector);

/// Best symmetric rank-1 direction for partially symmetric slabs: leading
/// eigenvector of Q = sum_k c(k) (S_k + S_k^T), unit norm, with the sign
/// chosen to align with `current` when given.
Vector partial_symmetry_update(const std::vector<Matrix>& slabs,
                               const Vector& c_column,
                               const Vector* current = nullptr);

}  // namespace tenkit
