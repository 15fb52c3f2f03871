#include "tenkit/constraints.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace tenkit {
namespace {

// Euclidean projection onto the probability simplex, sorting-based.
// Ties are resolved by index order through the stable sort.
Vector project_simplex(const Vector& v) {
  const index_t n = v.size();
  std::vector<index_t> order(n);
  std::iota(order.begin(), order.end(), index_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](index_t a, index_t b) { return v(a) > v(b); });
  double cumsum = 0.0, theta = 0.0;
  for (index_t j = 0; j < n; ++j) {
    cumsum += v(order[j]);
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (v(order[j]) - candidate > 0.0) theta = candidate;
  }
  Vector out(n);
  for (index_t i = 0; i < n; ++i) out(i) = std::max(v(i) - theta, 0.0);
  return out;
}

// Pool-adjacent-violators isotonic regression (nondecreasing).
Vector isotonic_nondecreasing(const Vector& v) {
  const index_t n = v.size();
  std::vector<double> level(n), weight(n);
  std::vector<index_t> len(n);
  index_t blocks = 0;
  for (index_t i = 0; i < n; ++i) {
    level[blocks] = v(i);
    weight[blocks] = 1.0;
    len[blocks] = 1;
    ++blocks;
    while (blocks > 1 && level[blocks - 2] >= level[blocks - 1]) {
      const double w = weight[blocks - 2] + weight[blocks - 1];
      level[blocks - 2] = (weight[blocks - 2] * level[blocks - 2] +
                           weight[blocks - 1] * level[blocks - 1]) /
                          w;
      weight[blocks - 2] = w;
      len[blocks - 2] += len[blocks - 1];
      --blocks;
    }
  }
  Vector out(n);
  index_t pos = 0;
  for (index_t b = 0; b < blocks; ++b)
    for (index_t r = 0; r < len[b]; ++r) out(pos++) = level[b];
  return out;
}

// Solve (2 rho_s T^T T + rho I) c = rho v with T the first-difference
// matrix; T^T T is tridiagonal, solved by the Thomas algorithm.
Vector smooth_prox(const Vector& v, double rho_s, double rho) {
  const index_t n = v.size();
  if (n == 1) return v;
  const double s = 2.0 * rho_s;
  Vector diag(n), off(n - 1), rhs = rho * v;
  for (index_t i = 0; i < n; ++i) {
    double d = 0.0;
    if (i > 0) d += s;
    if (i < n - 1) d += s;
    diag(i) = d + rho;
  }
  off.setConstant(-s);
  for (index_t i = 1; i < n; ++i) {
    const double w = off(i - 1) / diag(i - 1);
    diag(i) -= w * off(i - 1);
    rhs(i) -= w * rhs(i - 1);
  }
  Vector out(n);
  out(n - 1) = rhs(n - 1) / diag(n - 1);
  for (index_t i = n - 2; i >= 0; --i)
    out(i) = (rhs(i) - off(i) * out(i + 1)) / diag(i);
  return out;
}

Vector hard_sparsify(const Vector& v, index_t keep) {
  const index_t n = v.size();
  if (keep >= n) return v;
  std::vector<index_t> order(n);
  std::iota(order.begin(), order.end(), index_t{0});
  std::stable_sort(order.begin(), order.end(), [&](index_t a, index_t b) {
    return std::abs(v(a)) > std::abs(v(b));
  });
  Vector out = Vector::Zero(n);
  for (index_t j = 0; j < keep; ++j) out(order[j]) = v(order[j]);
  return out;
}

}  // namespace

ConstraintDescriptor ConstraintDescriptor::l1(double lambda) {
  if (lambda <= 0.0)
    throw std::invalid_argument("constraint l1: lambda must be positive");
  return {ConstraintKind::l1, lambda, 1.0};
}

ConstraintDescriptor ConstraintDescriptor::smooth(double rho_s) {
  if (rho_s <= 0.0)
    throw std::invalid_argument("constraint smooth: weight must be positive");
  return {ConstraintKind::smooth, rho_s, 1.0};
}

ConstraintDescriptor ConstraintDescriptor::hard_sparsity(index_t keep) {
  if (keep < 1)
    throw std::invalid_argument("constraint hard_sparsity: keep must be >= 1");
  return {ConstraintKind::hard_sparsity, static_cast<double>(keep), 1.0};
}

ConstraintDescriptor ConstraintDescriptor::symmetric_with(index_t mode,
                                                          double penalty) {
  if (penalty <= 0.0)
    throw std::invalid_argument("constraint symmetric_with: penalty <= 0");
  return {ConstraintKind::symmetric_with, static_cast<double>(mode), penalty};
}

bool ConstraintDescriptor::has_prox() const {
  return kind != ConstraintKind::symmetric_with;
}

void ConstraintDescriptor::validate(index_t column_length) const {
  if (kind == ConstraintKind::hard_sparsity &&
      static_cast<index_t>(parameter) > column_length)
    throw std::invalid_argument(
        "constraint hard_sparsity: keep exceeds column length");
}

Vector prox_apply(const Vector& v, const ConstraintDescriptor& c,
                  double rho) {
  switch (c.kind) {
    case ConstraintKind::none:
      return v;
    case ConstraintKind::nonnegative:
      return v.cwiseMax(0.0);
    case ConstraintKind::l1: {
      const double thr = c.parameter / rho;
      return v.unaryExpr([thr](double x) {
        return x > thr ? x - thr : (x < -thr ? x + thr : 0.0);
      });
    }
    case ConstraintKind::simplex:
      return project_simplex(v);
    case ConstraintKind::smooth:
      return smooth_prox(v, c.parameter, rho);
    case ConstraintKind::hard_sparsity:
      return hard_sparsify(v, static_cast<index_t>(c.parameter));
    case ConstraintKind::monotone_nondecreasing:
      return isotonic_nondecreasing(v);
    case ConstraintKind::symmetric_with:
      break;
  }
  throw std::invalid_argument("prox_apply: constraint has no prox rule");
}

Matrix admm_constrained_ls(const Matrix& gram, const Matrix& rhs,
                           const ConstraintDescriptor& constraint,
                           AdmmState& warm) {
  const index_t f = gram.rows();
  const index_t rows = rhs.rows();
  if (gram.cols() != f || rhs.cols() != f)
    throw std::invalid_argument("admm_constrained_ls: dimension mismatch");
  if (!constraint.has_prox())
    throw std::invalid_argument("admm_constrained_ls: no prox rule");
  constraint.validate(rows);

  const double rho = gram.trace() / static_cast<double>(f);
  if (!(rho > 0.0))
    throw std::runtime_error("admm_constrained_ls: gram not positive definite");
  if (constraint.is_none()) {
    // one effective step: the unconstrained least-squares solution
    warm.rho = rho;
    warm.last_inner_iterations = 1;
    Matrix solution = gram.ldlt().solve(rhs.transpose()).transpose();
    warm.aux = solution;
    warm.dual = Matrix::Zero(rows, f);
    return solution;
  }
  Eigen::LLT<Matrix> chol(gram + rho * Matrix::Identity(f, f));
  if (chol.info() != Eigen::Success)
    throw std::runtime_error("admm_constrained_ls: gram not positive definite");

  if (warm.aux.rows() != rows || warm.aux.cols() != f) {
    warm.aux = Matrix::Zero(rows, f);
    warm.dual = Matrix::Zero(rows, f);
  }
  warm.rho = rho;

  Matrix factor;
  const double eps = 1e-12;
  const index_t cap = 50;
  index_t it = 0;
  while (it < cap) {
    ++it;
    factor = chol.solve((rhs + rho * (warm.aux + warm.dual)).transpose())
                 .transpose();
    const Matrix prev_aux = warm.aux;
    const Matrix target = factor - warm.dual;
    for (index_t c = 0; c < f; ++c)
      warm.aux.col(c) = prox_apply(target.col(c), constraint, rho);
    warm.dual += warm.aux - factor;

    // Relative residuals. The stop is much tighter than the outer sweep
    // needs because ADMM's linear rate leaves an optimality gap of the
    // same order as the step size; inactive constraints are expected to
    // land within 1e-6 of the unconstrained solution.
    const double primal =
        (warm.aux - factor).norm() / std::max(factor.norm(), eps);
    const double dual =
        (warm.aux - prev_aux).norm() / std::max(warm.aux.norm(), eps);
    if (primal < 1e-8 && dual < 1e-8) break;
  }
  warm.last_inner_iterations = it;
  // The feasible iterate is the factor we hand back to the sweep.
  return warm.aux;
}

Vector optimal_scaling_update(
    const Matrix& residual, const Vector& m,
    const std::function<Vector(const Vector&)>& projector) {
  const double nsq = m.squaredNorm();
  if (nsq == 0.0)
    throw std::invalid_argument("optimal_scaling_update: zero direction");
  if (residual.rows() != m.size())
    throw std::invalid_argument("optimal_scaling_update: shape mismatch");
  Vector unconstrained = residual.transpose() * (m / nsq);
  return projector(unconstrained);
}

Vector optimal_scaling_update(const Matrix& residual, const Vector& m,
                              const ConstraintDescriptor& projector) {
  switch (projector.kind) {
    case ConstraintKind::none:
    case ConstraintKind::nonnegative:
    case ConstraintKind::simplex:
    case ConstraintKind::hard_sparsity:
    case ConstraintKind::monotone_nondecreasing:
      break;
    default:
      throw std::invalid_argument(
          "optimal_scaling_update: constraint is not a set projection");
  }
  return optimal_scaling_update(residual, m, [&](const Vector& v) {
    return prox_apply(v, projector, 1.0);
  });
}

Vector partial_symmetry_update(const std::vector<Matrix>& slabs,
                               const Vector& c_column, const Vector* current) {
  if (slabs.empty())
    throw std::invalid_argument("partial_symmetry_update: no slabs");
  const index_t n = slabs[0].rows();
  if (static_cast<index_t>(slabs.size()) != c_column.size())
    throw std::invalid_argument("partial_symmetry_update: slab count");
  Matrix q = Matrix::Zero(n, n);
  for (size_t k = 0; k < slabs.size(); ++k) {
    if (slabs[k].rows() != n || slabs[k].cols() != n)
      throw std::invalid_argument("partial_symmetry_update: slabs not square");
    q += c_column(static_cast<index_t>(k)) * (slabs[k] + slabs[k].transpose());
  }
  const double scale = q.cwiseAbs().maxCoeff();
  if (scale == 0.0 || !std::isfinite(scale))
    throw std::runtime_error("partial_symmetry_update: zero matrix");

  Eigen::SelfAdjointEigenSolver<Matrix> es(q);
  Vector v = es.eigenvectors().col(n - 1);  // largest eigenvalue
  if (current && current->size() == n && current->dot(v) < 0.0) v = -v;
  return v;
}

}  // namespace tenkit
