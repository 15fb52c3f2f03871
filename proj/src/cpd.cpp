#include "tenkit/cpd.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "tenkit/crb.hpp"
#include "tenkit/rng.hpp"
#include "threading.hpp"

namespace tenkit {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Conditional solve factor = rhs * G^{-1} with the ridge guard: when
// cond(G) > 1e12, add 1e-12 * trace(G) to the diagonal and flag it.
Matrix solve_gram(const Matrix& gram, const Matrix& rhs, bool* ridge_flag) {
  Matrix g = gram;
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmin > 0.0) || lmax > 1e12 * lmin) {
    g += (1e-12 * g.trace()) * Matrix::Identity(g.rows(), g.cols());
    if (ridge_flag) *ridge_flag = true;
  }
  return g.ldlt().solve(rhs.transpose()).transpose();
}

double max_column_norm(const std::vector<Matrix>& factors) {
  double v = 0.0;
  for (const auto& a : factors)
    for (index_t c = 0; c < a.cols(); ++c)
      v = std::max(v, a.col(c).norm());
  return v;
}

// Reparametrize so modes 0..N-2 have unit columns, all scale concentrated
// in the last mode. Leaves the represented tensor unchanged.
void rebalance_into_last_mode(std::vector<Matrix>& factors) {
  const index_t n = static_cast<index_t>(factors.size());
  const index_t f = factors[0].cols();
  for (index_t c = 0; c < f; ++c) {
    double scale = 1.0;
    for (index_t m = 0; m + 1 < n; ++m) {
      const double nc = factors[m].col(c).norm();
      if (nc > 0.0) {
        factors[m].col(c) /= nc;
        scale *= nc;
      }
    }
    factors[n - 1].col(c) *= scale;
  }
}

std::vector<Matrix> random_factors(const std::vector<index_t>& shape,
                                   index_t rank, Rng& rng) {
  std::vector<Matrix> factors;
  factors.reserve(shape.size());
  for (index_t s : shape) {
    Matrix a(s, rank);
    for (index_t c = 0; c < rank; ++c) {
      for (index_t i = 0; i < s; ++i) a(i, c) = rng.normal();
      const double nc = a.col(c).norm();
      if (nc > 0.0) a.col(c) /= nc;
    }
    factors.push_back(std::move(a));
  }
  return factors;
}

// Crude rank bound from the matricizations: F <= min_n prod_{m != n} I_m.
bool rank_overspecified(const std::vector<index_t>& shape, index_t rank) {
  index_t bound = std::numeric_limits<index_t>::max();
  index_t total = 1;
  for (index_t s : shape) total *= s;
  for (index_t s : shape) bound = std::min(bound, total / s);
  return rank > bound;
}

// Regularizer value the AO objective adds for penalty-type constraints
// (zero for set constraints, whose iterates are feasible).
double penalty_value(const Matrix& factor, const ConstraintDescriptor& c) {
  switch (c.kind) {
    case ConstraintKind::l1:
      return c.parameter * factor.cwiseAbs().sum();
    case ConstraintKind::smooth: {
      double acc = 0.0;
      for (index_t col = 0; col < factor.cols(); ++col)
        for (index_t i = 0; i + 1 < factor.rows(); ++i) {
          const double d = factor(i + 1, col) - factor(i, col);
          acc += d * d;
        }
      return c.parameter * acc;
    }
    default:
      return 0.0;
  }
}

// The objective admm_constrained_ls works on: (1/2)||X - M C^T||^2 plus
// the penalty, dropping the constant ||X||^2 term.
double conditional_objective(const Matrix& factor, const Matrix& gram,
                             const Matrix& rhs,
                             const ConstraintDescriptor& c) {
  return 0.5 * (factor * gram).cwiseProduct(factor).sum() -
         factor.cwiseProduct(rhs).sum() + penalty_value(factor, c);
}

// Bring a random start into the constraint set so the AO objective
// comparisons are feasible-versus-feasible from the first sweep.
void project_initial_factors(std::vector<Matrix>& factors,
                             const std::vector<ConstraintDescriptor>& cs) {
  for (size_t m = 0; m < factors.size(); ++m) {
    if (cs[m].is_none() || !cs[m].has_prox()) continue;
    for (index_t col = 0; col < factors[m].cols(); ++col)
      factors[m].col(col) = prox_apply(factors[m].col(col), cs[m], 1.0);
    // an all-zero projected column would make the model degenerate
    for (index_t col = 0; col < factors[m].cols(); ++col)
      if (factors[m].col(col).norm() == 0.0)
        factors[m](0, col) = 1.0;
  }
}

struct InitContext {
  const FitOptions& opts;
  bool gevd_ok = false;
  KruskalModel gevd_model;
  bool gevd_near_defective = false;
};

template <class TensorT>
std::vector<Matrix> initial_factors(const TensorT& t, const FitOptions& opts,
                                    index_t restart, InitContext& ctx,
                                    FitReport& rep) {
  if (opts.init == InitStrategy::provided) {
    if (!opts.initial) throw std::invalid_argument("cpd: no initial model");
    KruskalModel m = *opts.initial;
    if (m.shape() != t.shape() || m.rank() != opts.rank)
      throw std::invalid_argument("cpd: provided initial model mismatch");
    // absorb weights into the last mode
    m.factors.back() *= m.weights.asDiagonal();
    return m.factors;
  }
  if (opts.init == InitStrategy::gevd && restart == 0 && ctx.gevd_ok) {
    rep.gevd_used = true;
    rep.gevd_near_defective = ctx.gevd_near_defective;
    return ctx.gevd_model.factors;
  }
  Rng rng = Rng::derive(opts.seed, static_cast<uint64_t>(restart));
  return random_factors(t.shape(), opts.rank, rng);
}

// One ALS pass over all modes, honoring per-mode constraints.
template <class TensorT>
void als_sweep(const TensorT& t, std::vector<Matrix>& factors,
               const std::vector<ConstraintDescriptor>& constraints,
               std::vector<AdmmState>& admm, FitReport& rep) {
  const index_t n = static_cast<index_t>(factors.size());
  for (index_t mode = 0; mode < n; ++mode) {
    const Matrix rhs = mttkrp(t, factors, mode);
    const Matrix gram = gram_hadamard(factors, mode);
    const ConstraintDescriptor& c = constraints[mode];
    if (c.is_none()) {
      factors[mode] = solve_gram(gram, rhs, &rep.ridge_applied);
    } else if (c.kind == ConstraintKind::symmetric_with) {
      // quadratic penalty ||A_mode - A_partner||^2 with weight c.weight
      const index_t partner = static_cast<index_t>(c.parameter);
      const double rho = c.weight;
      const Matrix g = gram + rho * Matrix::Identity(gram.rows(), gram.cols());
      factors[mode] =
          solve_gram(g, rhs + rho * factors[partner], &rep.ridge_applied);
    } else {
      // AO-ADMM with a keep-old safeguard so the outer loss stays monotone
      // even when the inner loop stops early. Both sides of the comparison
      // are feasible because constrained starts are projected.
      const double q_old = conditional_objective(factors[mode], gram, rhs, c);
      Matrix candidate = admm_constrained_ls(gram, rhs, c, admm[mode]);
      double q_new = conditional_objective(candidate, gram, rhs, c);
      int extra = 0;
      while (q_new > q_old + 1e-14 * (1.0 + std::abs(q_old)) && extra < 4) {
        candidate = admm_constrained_ls(gram, rhs, c, admm[mode]);
        q_new = conditional_objective(candidate, gram, rhs, c);
        ++extra;
      }
      if (q_new <= q_old + 1e-12 * (1.0 + std::abs(q_old)))
        factors[mode] = candidate;
    }
  }
}

// Exact partially-symmetric sweep (opt-in): per component, the optimal
// unit symmetric direction is the leading eigenvector of the symmetrized
// weighted residual slabs; the coupled-mode column is refit afterwards.
void symmetric_rank1_sweep(const DenseTensor& t, std::vector<Matrix>& factors,
                           index_t mode_a, index_t mode_b, index_t mode_c) {
  const index_t rank = factors[0].cols();
  const index_t k_dim = t.extent(mode_c);
  const index_t i_dim = t.extent(mode_a);

  for (index_t f = 0; f < rank; ++f) {
    // residual without component f
    KruskalModel rest({factors[0], factors[1], factors[2]});
    rest.weights = Vector::Ones(rank);
    rest.weights(f) = 0.0;
    DenseTensor recon = kruskal_reconstruct(rest);
    std::vector<Matrix> slabs(k_dim, Matrix(i_dim, i_dim));
    std::vector<index_t> idx(3);
    for (index_t k = 0; k < k_dim; ++k)
      for (index_t j = 0; j < i_dim; ++j)
        for (index_t i = 0; i < i_dim; ++i) {
          idx[mode_a] = i;
          idx[mode_b] = j;
          idx[mode_c] = k;
          slabs[k](i, j) = t.at(std::span<const index_t>(idx)) -
                           recon.at(std::span<const index_t>(idx));
        }
    const Vector current = factors[mode_a].col(f).normalized();
    Vector a = partial_symmetry_update(slabs, factors[mode_c].col(f),
                                       &current);
    factors[mode_a].col(f) = a;
    factors[mode_b].col(f) = a;
    for (index_t k = 0; k < k_dim; ++k)
      factors[mode_c](k, f) = a.dot(slabs[k] * a);
  }
}

template <class TensorT>
std::pair<KruskalModel, FitReport> als_impl(const TensorT& t,
                                            const FitOptions& opts) {
  opts.validate();
  const auto& shape = t.shape();
  const index_t n = static_cast<index_t>(shape.size());
  std::vector<ConstraintDescriptor> constraints = opts.mode_constraints;
  if (constraints.empty()) constraints.assign(n, ConstraintDescriptor::none());
  if (static_cast<index_t>(constraints.size()) != n)
    throw std::invalid_argument("cpd_als: one constraint per mode expected");
  bool unconstrained = true;
  index_t sym_a = -1, sym_b = -1;
  for (index_t m = 0; m < n; ++m) {
    if (!constraints[m].is_none()) unconstrained = false;
    if (constraints[m].kind == ConstraintKind::symmetric_with) {
      sym_a = m;
      sym_b = static_cast<index_t>(constraints[m].parameter);
      if (sym_b < 0 || sym_b >= n || sym_b == m)
        throw std::invalid_argument("cpd_als: bad symmetric_with partner");
    }
  }
  const bool exact_symmetric = opts.exact_symmetry_update && sym_a >= 0;
  if (exact_symmetric) {
    if (n != 3)
      throw std::invalid_argument(
          "cpd_als: exact symmetry updates require a third-order tensor");
    if (shape[sym_a] != shape[sym_b])
      throw std::invalid_argument(
          "cpd_als: symmetric modes must have equal extents");
  }

  InitContext ctx{opts};
  if (opts.init == InitStrategy::gevd) {
    if constexpr (std::is_same_v<TensorT, DenseTensor>) {
      GevdInfo info;
      try {
        ctx.gevd_model = gevd_init(t, opts.rank, &info, opts.seed);
        ctx.gevd_ok = true;
        ctx.gevd_near_defective = info.near_defective;
      } catch (const GevdComplexEigenvalues&) {
        if (opts.restarts <= 1) throw;
      }
    } else {
      GevdInfo info;
      ctx.gevd_model = gevd_init(t.densify(), opts.rank, &info, opts.seed);
      ctx.gevd_ok = true;
      ctx.gevd_near_defective = info.near_defective;
    }
  }

  const double xnorm = std::sqrt(t.norm_sq());
  const auto t0 = Clock::now();

  KruskalModel best;
  FitReport best_rep;
  double best_loss = std::numeric_limits<double>::infinity();

  for (index_t restart = 0; restart < opts.restarts; ++restart) {
    FitReport rep;
    rep.rank_overspecified = rank_overspecified(shape, opts.rank);
    std::vector<Matrix> factors = initial_factors(t, opts, restart, ctx, rep);
    if (!unconstrained) project_initial_factors(factors, constraints);
    std::vector<AdmmState> admm(n);

    rep.max_column_norm_trajectory.push_back(max_column_norm(factors));
    double prev_sqrt_loss = -1.0;
    for (index_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      if (exact_symmetric) {
        index_t other = 3 - sym_a - sym_b;
        if constexpr (std::is_same_v<TensorT, DenseTensor>) {
          symmetric_rank1_sweep(t, factors, sym_a, sym_b, other);
        } else {
          throw std::invalid_argument(
              "cpd_als: exact symmetry updates need a dense tensor");
        }
      } else {
        als_sweep(t, factors, constraints, admm, rep);
      }
      if (unconstrained) rebalance_into_last_mode(factors);

      KruskalModel current(factors);
      const double loss = model_fit_residual(t, current);
      rep.loss_trajectory.push_back(loss);
      rep.max_column_norm_trajectory.push_back(max_column_norm(factors));
      rep.sweeps = sweep + 1;

      const double sq = std::sqrt(std::max(loss, 0.0));
      if (prev_sqrt_loss >= 0.0) {
        rep.terminal_relative_change =
            std::abs(prev_sqrt_loss - sq) / std::max(xnorm, 1e-300);
        if (rep.terminal_relative_change < opts.tolerance) break;
      }
      prev_sqrt_loss = sq;
    }

    const double base = rep.max_column_norm_trajectory.empty()
                            ? 0.0
                            : rep.max_column_norm_trajectory.front();
    for (double v : rep.max_column_norm_trajectory)
      if (v > 10.0 * base) rep.diverged = true;

    const double terminal = rep.loss_trajectory.empty()
                                ? std::numeric_limits<double>::infinity()
                                : rep.loss_trajectory.back();
    if (terminal < best_loss) {
      best_loss = terminal;
      best = KruskalModel(factors);
      best_rep = rep;
      best_rep.best_restart = restart;
    }
  }

  best = normalize_model(best);
  best_rep.component_weights = best.weights;
  best_rep.wall_time_seconds = seconds_since(t0);
  return {best, best_rep};
}

// --- exact line search helpers ---

double polyval(const Vector& coeffs, double x) {
  double acc = 0.0;
  for (index_t i = coeffs.size() - 1; i >= 0; --i) acc = acc * x + coeffs(i);
  return acc;
}

// Real roots of the polynomial sum_i c_i x^i via the companion matrix.
std::vector<double> real_roots(Vector coeffs) {
  const double scale = coeffs.cwiseAbs().maxCoeff();
  std::vector<double> roots;
  if (scale == 0.0) return roots;
  index_t degree = coeffs.size() - 1;
  while (degree > 0 && std::abs(coeffs(degree)) < 1e-13 * scale) --degree;
  if (degree == 0) return roots;
  if (degree == 1) {
    roots.push_back(-coeffs(0) / coeffs(1));
    return roots;
  }
  Matrix companion = Matrix::Zero(degree, degree);
  for (index_t i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (index_t i = 0; i < degree; ++i)
    companion(i, degree - 1) = -coeffs(i) / coeffs(degree);
  Eigen::EigenSolver<Matrix> es(companion);
  for (index_t i = 0; i < degree; ++i) {
    const auto ev = es.eigenvalues()(i);
    if (std::abs(ev.imag()) <= 1e-9 * (1.0 + std::abs(ev.real())))
      roots.push_back(ev.real());
  }
  return roots;
}

}  // namespace

// --- MissingMask / FitOptions ---

index_t MissingMask::count_observed() const {
  index_t c = 0;
  for (uint8_t v : observed) c += (v != 0);
  return c;
}

bool MissingMask::all_observed() const {
  return count_observed() == static_cast<index_t>(observed.size());
}

void MissingMask::validate(const std::vector<index_t>& data_shape) const {
  if (shape != data_shape)
    throw std::invalid_argument("missing mask: shape mismatch");
  index_t total = 1;
  for (index_t s : shape) total *= s;
  if (static_cast<index_t>(observed.size()) != total)
    throw std::invalid_argument("missing mask: indicator length mismatch");
}

void FitOptions::validate() const {
  if (rank < 1) throw std::invalid_argument("fit options: rank must be >= 1");
  if (!(tolerance > 0.0))
    throw std::invalid_argument("fit options: tolerance must be positive");
  if (restarts < 1)
    throw std::invalid_argument("fit options: restarts must be >= 1");
  if (max_sweeps < 1)
    throw std::invalid_argument("fit options: max sweeps must be >= 1");
}

// --- public entry points ---

std::pair<KruskalModel, FitReport> cpd_als(const DenseTensor& t,
                                           const FitOptions& opts) {
  if (opts.mask) {
    FitOptions inner = opts;
    inner.mask.reset();
    return cpd_als_missing(t, *opts.mask, inner);
  }
  return als_impl(t, opts);
}

std::pair<KruskalModel, FitReport> cpd_als(const SparseTensor& t,
                                           const FitOptions& opts) {
  if (opts.mask)
    throw std::invalid_argument(
        "cpd_als: missing-data masks apply to dense tensors");
  return als_impl(t, opts);
}

KruskalModel gevd_init(const DenseTensor& t, index_t rank, GevdInfo* info,
                       uint64_t seed) {
  if (t.order() != 3)
    throw std::invalid_argument("gevd_init: third-order tensor required");
  const index_t i_dim = t.extent(0), j_dim = t.extent(1), k_dim = t.extent(2);
  if (rank > std::min(i_dim, j_dim))
    throw std::invalid_argument("gevd_init: rank must be <= min(I, J)");
  if (k_dim < 2) throw std::invalid_argument("gevd_init: need K >= 2 slabs");

  // Two random slab mixtures; uniform [0,1] mixing makes the pencil
  // generic whenever any two columns of the third factor are independent.
  Rng rng = Rng::derive(seed, 0x9e3d);
  Matrix mix1 = Matrix::Zero(i_dim, j_dim), mix2 = Matrix::Zero(i_dim, j_dim);
  for (index_t k = 0; k < k_dim; ++k) {
    const auto slab = Eigen::Map<const Matrix>(t.data() + k * i_dim * j_dim,
                                               i_dim, j_dim);
    mix1 += rng.uniform() * slab;
    mix2 += rng.uniform() * slab;
  }

  Matrix stacked(2 * i_dim, j_dim);
  stacked.topRows(i_dim) = mix1;
  stacked.bottomRows(i_dim) = mix2;
  Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeThinU);
  if (svd.singularValues()(rank - 1) <
      1e-12 * svd.singularValues()(0))
    throw std::runtime_error("gevd_init: data has numerical rank below F");
  const Matrix u1 = svd.matrixU().topRows(i_dim).leftCols(rank);
  const Matrix u2 = svd.matrixU().bottomRows(i_dim).leftCols(rank);

  const Matrix r1 = u1.transpose() * u1;
  const Matrix r2 = u1.transpose() * u2;
  const Matrix pencil = r1.partialPivLu().solve(r2);

  Eigen::EigenSolver<Matrix> es(pencil);
  const auto& evals = es.eigenvalues();
  double eig_scale = 0.0;
  for (index_t i = 0; i < rank; ++i)
    eig_scale = std::max(eig_scale, std::abs(evals(i)));
  for (index_t i = 0; i < rank; ++i)
    if (std::abs(evals(i).imag()) > 1e-9 * (1.0 + std::abs(evals(i).real())))
      throw GevdComplexEigenvalues();
  if (info) {
    for (index_t i = 0; i < rank && !info->near_defective; ++i)
      for (index_t j = i + 1; j < rank; ++j)
        if (std::abs(evals(i).real() - evals(j).real()) <
            1e-10 * (1.0 + eig_scale)) {
          info->near_defective = true;
          break;
        }
  }

  const Matrix minv = es.eigenvectors().real();
  const Matrix a_mixed = u1 * minv;  // A up to column scaling / permutation
  const Matrix a_pinv = pinv(a_mixed);

  // Back-substitution: rows f of A^+ X(:,:,k) trace out rank-1 (c, b) pairs.
  Matrix b(j_dim, rank), c(k_dim, rank);
  Matrix z(k_dim, j_dim);
  for (index_t f = 0; f < rank; ++f) {
    for (index_t k = 0; k < k_dim; ++k) {
      const auto slab = Eigen::Map<const Matrix>(t.data() + k * i_dim * j_dim,
                                                 i_dim, j_dim);
      z.row(k) = a_pinv.row(f) * slab;
    }
    Eigen::JacobiSVD<Matrix> rank1(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    c.col(f) = rank1.matrixU().col(0) * rank1.singularValues()(0);
    b.col(f) = rank1.matrixV().col(0);
  }

  // Final least-squares half-step for the first mode.
  std::vector<Matrix> factors = {Matrix(), b, c};
  const Matrix rhs = mttkrp(t, factors, 0);
  const Matrix gram = gram_hadamard(factors, 0);
  factors[0] = solve_gram(gram, rhs, nullptr);
  return KruskalModel(factors);
}

std::vector<Matrix> cpd_gradient(const DenseTensor& t, const KruskalModel& m) {
  if (t.shape() != m.shape())
    throw std::invalid_argument("cpd_gradient: shape mismatch");
  const auto lambda = m.weights.asDiagonal();
  std::vector<Matrix> grads;
  grads.reserve(m.factors.size());
  for (index_t mode = 0; mode < m.order(); ++mode) {
    const Matrix rhs = mttkrp(t, m.factors, mode);
    const Matrix gram = gram_hadamard(m.factors, mode);
    grads.push_back(2.0 * (m.factors[mode] * lambda * gram * lambda -
                           rhs * lambda));
  }
  return grads;
}

LineSearchResult exact_line_search(const DenseTensor& t, const KruskalModel& m,
                                   const std::vector<Matrix>& direction,
                                   double window_lo, double window_hi,
                                   double prev_step) {
  if (direction.size() != m.factors.size())
    throw std::invalid_argument("exact_line_search: direction mode count");
  for (size_t i = 0; i < direction.size(); ++i)
    if (direction[i].rows() != m.factors[i].rows() ||
        direction[i].cols() != m.factors[i].cols())
      throw std::invalid_argument("exact_line_search: direction shape");
  if (!(window_lo <= window_hi))
    throw std::invalid_argument("exact_line_search: empty window");

  const index_t n = m.order();
  const index_t degree = 2 * n;
  double s = prev_step != 0.0 ? prev_step : 1.0;

  // Sample ladder {0, ±s/4, ±s/2, s, 2s}, exactly the 2N+1 = 7 points a
  // third-order loss needs; higher orders extend with ±4s, ±8s, ...
  std::vector<double> ladder = {0.0, 0.25, -0.25, 0.5, -0.5, 1.0, 2.0};
  double next = -1.0;
  while (static_cast<index_t>(ladder.size()) < degree + 1) {
    ladder.push_back(next);
    next = next < 0 ? -4.0 * next : -next;  // -1, 4, -4, 16, -16, ...
  }
  ladder.resize(degree + 1);

  auto loss_at = [&](double mu) {
    KruskalModel probe = m;
    for (index_t mm = 0; mm < n; ++mm) probe.factors[mm] += mu * direction[mm];
    return model_fit_residual(t, probe);
  };

  Vector nodes(degree + 1), values(degree + 1);
  for (index_t i = 0; i <= degree; ++i) {
    nodes(i) = ladder[i];  // in units of s
    values(i) = loss_at(ladder[i] * s);
  }
  for (index_t i = 0; i <= degree; ++i)
    for (index_t j = i + 1; j <= degree; ++j)
      if (nodes(i) == nodes(j))
        throw std::runtime_error("exact_line_search: duplicate sample nodes");

  Matrix vand(degree + 1, degree + 1);
  for (index_t i = 0; i <= degree; ++i) {
    double p = 1.0;
    for (index_t j = 0; j <= degree; ++j) {
      vand(i, j) = p;
      p *= nodes(i);
    }
  }
  const Vector coeffs = vand.fullPivLu().solve(values);  // in nu = mu / s

  const double cscale = coeffs.cwiseAbs().maxCoeff();
  bool constant = true;
  for (index_t i = 1; i <= degree; ++i)
    if (std::abs(coeffs(i)) > 1e-14 * std::max(cscale, 1.0)) constant = false;
  if (constant) {
    const double mu = std::clamp(0.0, window_lo, window_hi);
    return {mu, coeffs(0)};
  }

  Vector dcoeffs(degree);
  for (index_t i = 1; i <= degree; ++i)
    dcoeffs(i - 1) = coeffs(i) * static_cast<double>(i);

  std::vector<double> candidates;
  for (double r : real_roots(dcoeffs)) {
    const double mu = r * s;
    if (mu >= window_lo && mu <= window_hi) candidates.push_back(mu);
  }
  if (std::isfinite(window_lo)) candidates.push_back(window_lo);
  if (std::isfinite(window_hi)) candidates.push_back(window_hi);
  if (candidates.empty()) {
    // no real roots in range: fall back to the best sampled step
    index_t best = 0;
    for (index_t i = 1; i <= degree; ++i)
      if (values(i) < values(best)) best = i;
    const double mu = std::clamp(nodes(best) * s, window_lo, window_hi);
    return {mu, polyval(coeffs, mu / s)};
  }

  double best_mu = candidates[0];
  double best_val = polyval(coeffs, best_mu / s);
  for (double mu : candidates) {
    const double v = polyval(coeffs, mu / s);
    if (v < best_val) {
      best_val = v;
      best_mu = mu;
    }
  }
  return {best_mu, best_val};
}

// --- SGD ---

void sgd_update(KruskalModel& m, std::span<const index_t> idx, double value,
                double eta) {
  const index_t n = m.order();
  const index_t f = m.rank();
  if (static_cast<index_t>(idx.size()) != n)
    throw std::invalid_argument("sgd_update: index arity mismatch");

  // leave-one-out row products via prefix/suffix sweeps
  Matrix rows(n, f);
  for (index_t mode = 0; mode < n; ++mode)
    rows.row(mode) = m.factors[mode].row(idx[mode]);
  Matrix prefix = Matrix::Ones(n + 1, f), suffix = Matrix::Ones(n + 1, f);
  for (index_t mode = 0; mode < n; ++mode)
    prefix.row(mode + 1) =
        prefix.row(mode).cwiseProduct(rows.row(mode));
  for (index_t mode = n - 1; mode >= 0; --mode)
    suffix.row(mode) = suffix.row(mode + 1).cwiseProduct(rows.row(mode));

  const double model_value =
      prefix.row(n).cwiseProduct(m.weights.transpose()).sum();
  const double err = value - model_value;
  for (index_t mode = 0; mode < n; ++mode) {
    const auto leave_out =
        prefix.row(mode).cwiseProduct(suffix.row(mode + 1));
    m.factors[mode].row(idx[mode]) +=
        2.0 * eta * err *
        leave_out.cwiseProduct(m.weights.transpose());
  }
}

void sgd_update_batch(KruskalModel& m,
                      const std::vector<std::vector<index_t>>& idx,
                      const std::vector<double>& values, double eta) {
  if (idx.size() != values.size())
    throw std::invalid_argument("sgd_update_batch: size mismatch");
  const index_t n = m.order();
  for (index_t mode = 0; mode < n; ++mode) {
    std::vector<index_t> seen;
    for (const auto& sample : idx) seen.push_back(sample[mode]);
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      throw std::invalid_argument(
          "sgd_update_batch: samples conflict in a mode");
  }
  detail::parallel_chunks(
      static_cast<index_t>(idx.size()), detail::num_threads(),
      [&](int, index_t lo, index_t hi) {
        for (index_t e = lo; e < hi; ++e)
          sgd_update(m, std::span<const index_t>(idx[e]), values[e], eta);
      });
}

namespace {

template <class TensorT>
std::pair<KruskalModel, FitReport> sgd_impl(const TensorT& t,
                                            const FitOptions& opts) {
  opts.validate();
  const auto& shape = t.shape();
  const index_t n = static_cast<index_t>(shape.size());

  // Sample pool: stored entries for sparse tensors, observed elements for
  // dense (all elements when no mask). Unobserved entries are never drawn.
  std::vector<index_t> pool_idx;
  std::vector<double> pool_val;
  if constexpr (std::is_same_v<TensorT, SparseTensor>) {
    pool_idx = t.indices();
    pool_val = t.values();
  } else {
    if (opts.mask) opts.mask->validate(t.shape());
    std::vector<index_t> idx(n, 0);
    for (index_t lin = 0; lin < t.size(); ++lin) {
      if (!opts.mask || opts.mask->observed[lin]) {
        pool_idx.insert(pool_idx.end(), idx.begin(), idx.end());
        pool_val.push_back(t[lin]);
      }
      for (index_t mm = 0; mm < n; ++mm) {
        if (++idx[mm] < shape[mm]) break;
        idx[mm] = 0;
      }
    }
  }
  const index_t nnz = static_cast<index_t>(pool_val.size());
  if (nnz == 0) throw std::invalid_argument("cpd_sgd: no samples");

  Rng rng = Rng::derive(opts.seed, 0x56d);
  KruskalModel model(random_factors(shape, opts.rank, rng));
  if (opts.init == InitStrategy::provided) {
    if (!opts.initial) throw std::invalid_argument("cpd_sgd: no initial");
    model = *opts.initial;
  }

  FitReport rep;
  const auto t0 = Clock::now();
  const double tau = 10.0 * static_cast<double>(nnz);
  uint64_t step_count = 0;
  std::vector<index_t> sample(n);
  for (index_t epoch = 0; epoch < opts.max_sweeps; ++epoch) {
    for (index_t s = 0; s < nnz; ++s) {
      const index_t e = static_cast<index_t>(rng.below(nnz));
      for (index_t mm = 0; mm < n; ++mm) sample[mm] = pool_idx[e * n + mm];
      const double eta =
          opts.sgd_step0 / (1.0 + static_cast<double>(step_count) / tau);
      sgd_update(model, sample, pool_val[e], eta);
      ++step_count;
    }
    rep.loss_trajectory.push_back(model_fit_residual(t, model));
    rep.sweeps = epoch + 1;
  }
  KruskalModel out = normalize_model(model);
  rep.component_weights = out.weights;
  rep.wall_time_seconds = seconds_since(t0);
  return {out, rep};
}

}  // namespace

std::pair<KruskalModel, FitReport> cpd_sgd(const DenseTensor& t,
                                           const FitOptions& opts) {
  return sgd_impl(t, opts);
}

std::pair<KruskalModel, FitReport> cpd_sgd(const SparseTensor& t,
                                           const FitOptions& opts) {
  return sgd_impl(t, opts);
}

// --- missing data ---

std::pair<KruskalModel, FitReport> cpd_als_missing(const DenseTensor& t,
                                                   const MissingMask& mask,
                                                   const FitOptions& opts) {
  opts.validate();
  mask.validate(t.shape());
  if (mask.all_observed()) return cpd_als(t, opts);
  if (opts.init == InitStrategy::gevd)
    throw std::invalid_argument(
        "cpd_als_missing: gevd initialization needs complete data");

  const auto& shape = t.shape();
  const index_t n = static_cast<index_t>(shape.size());
  const index_t f = opts.rank;

  double masked_norm_sq = 0.0;
  for (index_t lin = 0; lin < t.size(); ++lin)
    if (mask.observed[lin]) masked_norm_sq += t[lin] * t[lin];
  const double xnorm = std::sqrt(masked_norm_sq);

  const auto t0 = Clock::now();
  KruskalModel best;
  FitReport best_rep;
  double best_loss = std::numeric_limits<double>::infinity();

  for (index_t restart = 0; restart < opts.restarts; ++restart) {
    FitReport rep;
    std::vector<Matrix> factors;
    if (opts.init == InitStrategy::provided) {
      if (!opts.initial) throw std::invalid_argument("cpd: no initial model");
      factors = opts.initial->factors;
      factors.back() *= opts.initial->weights.asDiagonal();
    } else {
      Rng rng = Rng::derive(opts.seed, static_cast<uint64_t>(restart));
      factors = random_factors(shape, f, rng);
    }

    // per-element row product buffer
    auto masked_loss = [&]() {
      double acc = 0.0;
      std::vector<index_t> idx(n, 0);
      for (index_t lin = 0; lin < t.size(); ++lin) {
        if (mask.observed[lin]) {
          double val = 0.0;
          for (index_t c = 0; c < f; ++c) {
            double p = 1.0;
            for (index_t mm = 0; mm < n; ++mm) p *= factors[mm](idx[mm], c);
            val += p;
          }
          const double d = t[lin] - val;
          acc += d * d;
        }
        for (index_t mm = 0; mm < n; ++mm) {
          if (++idx[mm] < shape[mm]) break;
          idx[mm] = 0;
        }
      }
      return acc;
    };

    double prev_sqrt_loss = -1.0;
    for (index_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      for (index_t mode = 0; mode < n; ++mode) {
        std::vector<Matrix> grams(shape[mode], Matrix::Zero(f, f));
        Matrix rhs = Matrix::Zero(shape[mode], f);
        std::vector<index_t> idx(n, 0);
        Vector w(f);
        for (index_t lin = 0; lin < t.size(); ++lin) {
          if (mask.observed[lin]) {
            w.setOnes();
            for (index_t mm = 0; mm < n; ++mm)
              if (mm != mode)
                w = w.cwiseProduct(factors[mm].row(idx[mm]).transpose());
            grams[idx[mode]] += w * w.transpose();
            rhs.row(idx[mode]) += t[lin] * w.transpose();
          }
          for (index_t mm = 0; mm < n; ++mm) {
            if (++idx[mm] < shape[mm]) break;
            idx[mm] = 0;
          }
        }
        for (index_t row = 0; row < shape[mode]; ++row) {
          if (grams[row].trace() == 0.0) {
            if (sweep == 0) rep.skipped_rows.emplace_back(mode, row);
            continue;  // no observed entries in this row
          }
          factors[mode].row(row) =
              solve_gram(grams[row], rhs.row(row), &rep.ridge_applied);
        }
      }

      const double loss = masked_loss();
      rep.loss_trajectory.push_back(loss);
      rep.max_column_norm_trajectory.push_back(max_column_norm(factors));
      rep.sweeps = sweep + 1;
      const double sq = std::sqrt(std::max(loss, 0.0));
      if (prev_sqrt_loss >= 0.0) {
        rep.terminal_relative_change =
            std::abs(prev_sqrt_loss - sq) / std::max(xnorm, 1e-300);
        if (rep.terminal_relative_change < opts.tolerance) break;
      }
      prev_sqrt_loss = sq;
    }

    const double terminal = rep.loss_trajectory.empty()
                                ? std::numeric_limits<double>::infinity()
                                : rep.loss_trajectory.back();
    if (terminal < best_loss) {
      best_loss = terminal;
      best = KruskalModel(factors);
      best_rep = rep;
      best_rep.best_restart = restart;
    }
  }
  best = normalize_model(best);
  best_rep.component_weights = best.weights;
  best_rep.wall_time_seconds = seconds_since(t0);
  return {best, best_rep};
}

DenseTensor em_initial_imputation(const DenseTensor& t,
                                  const MissingMask& mask) {
  mask.validate(t.shape());
  double sum = 0.0;
  index_t count = 0;
  for (index_t lin = 0; lin < t.size(); ++lin)
    if (mask.observed[lin]) {
      sum += t[lin];
      ++count;
    }
  if (count == 0)
    throw std::invalid_argument("em_impute_fit: no observed entries");
  const double mean = sum / static_cast<double>(count);
  DenseTensor filled = t;
  for (index_t lin = 0; lin < filled.size(); ++lin)
    if (!mask.observed[lin]) filled[lin] = mean;
  return filled;
}

std::pair<KruskalModel, FitReport> em_impute_fit(const DenseTensor& t,
                                                 const MissingMask& mask,
                                                 const FitOptions& opts) {
  opts.validate();
  mask.validate(t.shape());
  if (mask.all_observed()) return cpd_als(t, opts);

  DenseTensor filled = em_initial_imputation(t, mask);
  Rng rng = Rng::derive(opts.seed, 0);
  std::vector<Matrix> factors;
  if (opts.init == InitStrategy::provided && opts.initial) {
    factors = opts.initial->factors;
    factors.back() *= opts.initial->weights.asDiagonal();
  } else {
    factors = random_factors(t.shape(), opts.rank, rng);
  }
  std::vector<ConstraintDescriptor> none(t.order(),
                                         ConstraintDescriptor::none());
  std::vector<AdmmState> admm(t.order());

  FitReport rep;
  const auto t0 = Clock::now();
  const double xnorm = std::sqrt(t.norm_sq());
  double prev_sqrt_loss = -1.0;
  for (index_t outer = 0; outer < opts.max_sweeps; ++outer) {
    als_sweep(filled, factors, none, admm, rep);
    // re-impute: unobserved entries take the model values
    KruskalModel current(factors);
    DenseTensor recon = kruskal_reconstruct(current);
    double surrogate = 0.0;
    for (index_t lin = 0; lin < filled.size(); ++lin) {
      if (!mask.observed[lin]) filled[lin] = recon[lin];
      const double d = filled[lin] - recon[lin];
      surrogate += d * d;  // equals the masked residual after imputation
    }
    rep.loss_trajectory.push_back(surrogate);
    rep.sweeps = outer + 1;
    const double sq = std::sqrt(std::max(surrogate, 0.0));
    if (prev_sqrt_loss >= 0.0) {
      rep.terminal_relative_change =
          std::abs(prev_sqrt_loss - sq) / std::max(xnorm, 1e-300);
      if (rep.terminal_relative_change < opts.tolerance) break;
    }
    prev_sqrt_loss = sq;
  }
  KruskalModel out = normalize_model(KruskalModel(factors));
  rep.component_weights = out.weights;
  rep.wall_time_seconds = seconds_since(t0);
  return {out, rep};
}

KruskalModel gauss_newton_step(const DenseTensor& t, const KruskalModel& m,
                               double damping) {
  if (!(damping > 0.0))
    throw std::invalid_argument(
        "gauss_newton_step: damping must be positive (the Gauss-Newton "
        "normal matrix is rank deficient)");
  if (t.shape() != m.shape())
    throw std::invalid_argument("gauss_newton_step: shape mismatch");

  KruskalModel work = m;
  work.factors[0] *= work.weights.asDiagonal();
  work.weights.setOnes();

  const FimBlocks fim = build_fim(work, 1.0);
  const Matrix psi = fim.assemble_dense();  // J^T J
  const auto grads = cpd_gradient(t, work);

  index_t total = 0;
  for (const auto& g : grads) total += g.size();
  Vector gvec(total);
  index_t at = 0;
  for (const auto& g : grads) {
    gvec.segment(at, g.size()) = Eigen::Map<const Vector>(g.data(), g.size());
    at += g.size();
  }

  Matrix lhs = psi + damping * Matrix::Identity(total, total);
  const Vector p = lhs.ldlt().solve(-0.5 * gvec);

  KruskalModel out = work;
  at = 0;
  for (index_t mode = 0; mode < out.order(); ++mode) {
    const index_t sz = out.factors[mode].size();
    out.factors[mode] += Eigen::Map<const Matrix>(
        p.data() + at, out.factors[mode].rows(), out.factors[mode].cols());
    at += sz;
  }
  return out;
}

KruskalModel normalize_model(const KruskalModel& m, bool* zero_column_flagged) {
  m.validate();
  KruskalModel out = m;
  const index_t f = out.rank();
  const index_t n = out.order();
  if (zero_column_flagged) *zero_column_flagged = false;

  for (index_t c = 0; c < f; ++c) {
    double scale = out.weights(c);
    for (index_t mode = 0; mode < n; ++mode) {
      const double nc = out.factors[mode].col(c).norm();
      if (nc == 0.0) {
        if (zero_column_flagged) *zero_column_flagged = true;
        scale = 0.0;
        out.factors[mode].col(c).setZero();
        out.factors[mode](0, c) = 1.0;
      } else if (std::abs(nc - 1.0) >
                 8.0 * std::numeric_limits<double>::epsilon()) {
        // columns already at unit norm are left untouched so that
        // normalization is exactly idempotent
        out.factors[mode].col(c) /= nc;
        scale *= nc;
      }
    }
    out.weights(c) = scale;
    // sign convention: largest-magnitude entry of the first factor's
    // column positive; compensate in the second mode
    if (n >= 2) {
      index_t arg = 0;
      out.factors[0].col(c).cwiseAbs().maxCoeff(&arg);
      if (out.factors[0](arg, c) < 0.0) {
        out.factors[0].col(c) = -out.factors[0].col(c);
        out.factors[1].col(c) = -out.factors[1].col(c);
      }
    }
  }

  // sort components by descending weight, stable in the original order
  std::vector<index_t> order(f);
  std::iota(order.begin(), order.end(), index_t{0});
  std::stable_sort(order.begin(), order.end(), [&](index_t a, index_t b) {
    return out.weights(a) > out.weights(b);
  });
  KruskalModel sorted = out;
  for (index_t c = 0; c < f; ++c) {
    sorted.weights(c) = out.weights(order[c]);
    for (index_t mode = 0; mode < n; ++mode)
      sorted.factors[mode].col(c) = out.factors[mode].col(order[c]);
  }
  return sorted;
}

MatchResult match_factors(const KruskalModel& reference,
                          const KruskalModel& estimate) {
  if (reference.rank() != estimate.rank() ||
      reference.shape() != estimate.shape())
    throw std::invalid_argument("match_factors: rank or shape mismatch");
  const index_t f = reference.rank();
  const index_t n = reference.order();

  // unit-normalize columns in place; deliberately no reordering so the
  // returned permutation refers to the caller's column indices
  auto unit_columns = [](const KruskalModel& m) {
    std::vector<Matrix> factors = m.factors;
    for (auto& a : factors)
      for (index_t c = 0; c < a.cols(); ++c) {
        const double nc = a.col(c).norm();
        if (nc > 0.0) a.col(c) /= nc;
      }
    return factors;
  };
  const std::vector<Matrix> ref = unit_columns(reference);
  const std::vector<Matrix> est = unit_columns(estimate);

  // products over modes of |column correlations|
  Matrix congruence = Matrix::Ones(f, f);
  std::vector<Matrix> corr(n);
  for (index_t mode = 0; mode < n; ++mode) {
    corr[mode] = ref[mode].transpose() * est[mode];
    congruence = congruence.cwiseProduct(corr[mode].cwiseAbs());
  }

  // greedy assignment on the congruence products
  MatchResult result;
  result.permutation.assign(f, -1);
  std::vector<bool> used_ref(f, false), used_est(f, false);
  for (index_t pick = 0; pick < f; ++pick) {
    index_t bi = -1, bj = -1;
    double best = -1.0;
    for (index_t i = 0; i < f; ++i) {
      if (used_ref[i]) continue;
      for (index_t j = 0; j < f; ++j) {
        if (used_est[j]) continue;
        if (congruence(i, j) > best) {
          best = congruence(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    result.permutation[bi] = bj;
    used_ref[bi] = true;
    used_est[bj] = true;
  }

  result.mode_scalings.assign(n, Vector::Ones(f));
  double min_product = std::numeric_limits<double>::infinity();
  double max_err = 0.0;
  for (index_t i = 0; i < f; ++i) {
    const index_t j = result.permutation[i];
    double product = 1.0;
    for (index_t mode = 0; mode < n; ++mode) {
      const double s = corr[mode](i, j);  // signed, unit columns
      result.mode_scalings[mode](i) = s;
      product *= std::abs(s);
      const double err = (ref[mode].col(i) - s * est[mode].col(j)).norm();
      max_err = std::max(max_err, err);
    }
    min_product = std::min(min_product, product);
  }
  result.score = std::max(0.0, std::min(1.0, min_product));
  result.max_rel_column_error = max_err;
  return result;
}

}  // namespace tenkit
