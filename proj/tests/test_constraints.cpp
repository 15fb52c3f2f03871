#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "tenkit/constraints.hpp"
#include "tenkit/cpd.hpp"
#include "tenkit/fixtures.hpp"
#include "tenkit/ops.hpp"
#include "tenkit/rng.hpp"

using namespace tenkit;

namespace {

// Projected-gradient reference for min ||X - M C^T||^2, C >= 0, expressed
// through gram = M^T M and rhs = X^T M. Independent of the ADMM path.
Matrix nnls_projected_gradient(const Matrix& gram, const Matrix& rhs,
                               index_t iters) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const double step = 1.0 / es.eigenvalues().maxCoeff();
  Matrix c = Matrix::Zero(rhs.rows(), rhs.cols());
  for (index_t it = 0; it < iters; ++it)
    c = (c - step * (c * gram - rhs)).cwiseMax(0.0);
  return c;
}

}  // namespace

TEST_CASE("prox operators") {
  SUBCASE("nonnegative clamps at zero") {
    Vector v(2);
    v << -1.0, 2.0;
    Vector p = prox_apply(v, ConstraintDescriptor::nonnegative(), 1.0);
    CHECK(p(0) == 0.0);
    CHECK(p(1) == 2.0);
  }

  SUBCASE("l1 soft-thresholds by lambda/rho") {
    Vector v(2);
    v << 3.0, -0.5;
    Vector p = prox_apply(v, ConstraintDescriptor::l1(1.0), 1.0);
    CHECK(p(0) == doctest::Approx(2.0));
    CHECK(p(1) == 0.0);
  }

  SUBCASE("simplex projection satisfies the KKT conditions") {
    Vector v(3);
    v << 0.5, 0.5, 0.5;
    Vector p = prox_apply(v, ConstraintDescriptor::simplex(), 1.0);
    for (index_t i = 0; i < 3; ++i) CHECK(p(i) == doctest::Approx(1.0 / 3));

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      Vector r = oracle::randn(rng, 6, 1).col(0);
      Vector q = prox_apply(r, ConstraintDescriptor::simplex(), 1.0);
      CHECK(q.minCoeff() >= 0.0);
      CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-12));
      // KKT: a single threshold theta with q_i = max(r_i - theta, 0)
      double theta = -1e300;
      for (index_t i = 0; i < 6; ++i)
        if (q(i) > 0.0) theta = std::max(theta, r(i) - q(i));
      for (index_t i = 0; i < 6; ++i) {
        if (q(i) > 0.0)
          CHECK(std::abs(r(i) - q(i) - theta) < 1e-10);
        else
          CHECK(r(i) <= theta + 1e-10);
      }
    }
  }

  SUBCASE("smoothness prox solves the tridiagonal system") {
    std::mt19937_64 rng(11);
    Vector v = oracle::randn(rng, 8, 1).col(0);
    const double rho_s = 2.5, rho = 0.7;
    Vector p = prox_apply(v, ConstraintDescriptor::smooth(rho_s), rho);
    // residual of (2 rho_s T^T T + rho I) p = rho v
    Matrix t = Matrix::Zero(7, 8);
    for (index_t i = 0; i < 7; ++i) {
      t(i, i) = -1.0;
      t(i, i + 1) = 1.0;
    }
    Vector lhs = 2.0 * rho_s * (t.transpose() * (t * p)) + rho * p;
    CHECK((lhs - rho * v).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("hard sparsity keeps the largest magnitudes") {
    Vector v(4);
    v << 0.1, -3.0, 2.0, -0.5;
    Vector p = prox_apply(v, ConstraintDescriptor::hard_sparsity(2), 1.0);
    CHECK(p(0) == 0.0);
    CHECK(p(1) == -3.0);
    CHECK(p(2) == 2.0);
    CHECK(p(3) == 0.0);
  }

  SUBCASE("monotone projection minimizes distance among monotone vectors") {
    std::mt19937_64 rng(13);
    Vector v = oracle::randn(rng, 6, 1).col(0);
    Vector p = prox_apply(v, ConstraintDescriptor::monotone(), 1.0);
    for (index_t i = 1; i < 6; ++i) CHECK(p(i) >= p(i - 1) - 1e-14);
    const double best = (v - p).squaredNorm();
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
      Vector candidate(6);
      candidate(0) = u(rng);
      for (index_t i = 1; i < 6; ++i)
        candidate(i) = candidate(i - 1) + std::abs(u(rng));
      CHECK(best <= (v - candidate).squaredNorm() + 1e-12);
    }
  }

  SUBCASE("unknown kinds are rejected") {
    Vector v(2);
    v << 1.0, 2.0;
    CHECK_THROWS(prox_apply(v, ConstraintDescriptor::symmetric_with(1), 1.0));
  }
}

TEST_CASE("admm constrained least squares") {
  std::mt19937_64 rng(17);
  const Matrix m = oracle::randn(rng, 30, 3);
  const Matrix gram = m.transpose() * m;
  const Matrix x = oracle::randn(rng, 30, 6);
  const Matrix rhs = x.transpose() * m;  // 6 x 3
  const Matrix unconstrained =
      gram.ldlt().solve(rhs.transpose()).transpose();

  SUBCASE("no constraint reproduces the least-squares solution") {
    AdmmState state;
    Matrix c = admm_constrained_ls(gram, rhs, ConstraintDescriptor::none(),
                                   state);
    CHECK((c - unconstrained).cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("inactive nonnegativity matches the unconstrained solution") {
    // build a problem whose LS solution is strictly positive; a few
    // warm-started calls settle on the interior optimum
    Matrix c_true = oracle::randn(rng, 6, 3).cwiseAbs().array() + 0.5;
    Matrix x_pos = m * c_true.transpose();
    Matrix rhs_pos = x_pos.transpose() * m;
    AdmmState state;
    Matrix c;
    for (int outer = 0; outer < 4; ++outer)
      c = admm_constrained_ls(gram, rhs_pos,
                              ConstraintDescriptor::nonnegative(), state);
    const Matrix want = gram.ldlt().solve(rhs_pos.transpose()).transpose();
    CHECK((c - want).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + want.norm()));
  }

  SUBCASE("active nonnegativity matches the projected-gradient oracle") {
    AdmmState state;
    Matrix c = admm_constrained_ls(gram, rhs,
                                   ConstraintDescriptor::nonnegative(), state);
    // a handful of warm-started outer calls, as ALS would issue
    for (int outer = 0; outer < 20; ++outer)
      c = admm_constrained_ls(gram, rhs, ConstraintDescriptor::nonnegative(),
                              state);
    CHECK(c.minCoeff() >= 0.0);
    const Matrix want = nnls_projected_gradient(gram, rhs, 20000);
    CHECK((c - want).cwiseAbs().maxCoeff() < 1e-4 * (1.0 + want.norm()));
  }

  SUBCASE("warm start shortens later inner loops") {
    std::vector<index_t> first, later;
    for (uint64_t seed = 1; seed <= 9; ++seed) {
      std::mt19937_64 local(seed);
      const Matrix mm = oracle::randn(local, 25, 3);
      const Matrix g = mm.transpose() * mm;
      const Matrix xx = oracle::randn(local, 25, 5).cwiseAbs();
      const Matrix r = xx.transpose() * mm;
      AdmmState state;
      admm_constrained_ls(g, r, ConstraintDescriptor::nonnegative(), state);
      first.push_back(state.last_inner_iterations);
      for (int outer = 0; outer < 6; ++outer)
        admm_constrained_ls(g, r, ConstraintDescriptor::nonnegative(), state);
      later.push_back(state.last_inner_iterations);
    }
    std::sort(first.begin(), first.end());
    std::sort(later.begin(), later.end());
    CHECK(later[later.size() / 2] <= first[first.size() / 2]);
  }
}

TEST_CASE("optimal scaling update") {
  std::mt19937_64 rng(19);
  const Matrix residual = oracle::randn(rng, 12, 5);
  const Vector m = oracle::randn(rng, 12, 1).col(0);

  SUBCASE("identity projector gives the rank-1 LS coefficients") {
    Vector c = optimal_scaling_update(residual, m,
                                      ConstraintDescriptor::none());
    const Vector want = residual.transpose() * m / m.squaredNorm();
    CHECK((c - want).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("hard sparsity zeroes all but the largest entries") {
    Vector c = optimal_scaling_update(residual, m,
                                      ConstraintDescriptor::hard_sparsity(2));
    index_t nonzeros = 0;
    for (index_t i = 0; i < c.size(); ++i) nonzeros += (c(i) != 0.0);
    CHECK(nonzeros == 2);
  }

  SUBCASE("constrained optimum beats random feasible alternatives") {
    for (auto kind : {ConstraintDescriptor::nonnegative(),
                      ConstraintDescriptor::monotone()}) {
      Vector c = optimal_scaling_update(residual, m, kind);
      const double best = (residual - m * c.transpose()).squaredNorm();
      for (int trial = 0; trial < 100; ++trial) {
        Vector candidate =
            prox_apply(oracle::randn(rng, 5, 1).col(0), kind, 1.0);
        CHECK(best <=
              (residual - m * candidate.transpose()).squaredNorm() + 1e-12);
      }
    }
  }

  CHECK_THROWS(optimal_scaling_update(residual, Vector::Zero(12),
                                      ConstraintDescriptor::none()));
  CHECK_THROWS(optimal_scaling_update(residual, m,
                                      ConstraintDescriptor::l1(1.0)));
}

TEST_CASE("partial symmetry update") {
  std::mt19937_64 rng(23);

  SUBCASE("single symmetric slab returns its principal direction") {
    Vector v = oracle::randn(rng, 5, 1).col(0);
    Matrix slab = v * v.transpose();
    Vector c(1);
    c << 1.0;
    Vector a = partial_symmetry_update({slab}, c);
    CHECK(std::abs(std::abs(a.dot(v.normalized())) - 1.0) < 1e-12);
  }

  SUBCASE("matches a dense eigensolver on a known spectrum") {
    Matrix q = oracle::randn(rng, 4, 4);
    std::vector<Matrix> slabs = {q, oracle::randn(rng, 4, 4)};
    Vector c(2);
    c << 1.0, -2.0;
    Matrix total = c(0) * (slabs[0] + slabs[0].transpose()) +
                   c(1) * (slabs[1] + slabs[1].transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(total);
    Vector want = es.eigenvectors().col(3);
    Vector got = partial_symmetry_update(slabs, c);
    CHECK(std::abs(std::abs(got.dot(want)) - 1.0) < 1e-10);
  }

  SUBCASE("scale invariance of the returned direction") {
    std::vector<Matrix> slabs = {oracle::randn(rng, 3, 3),
                                 oracle::randn(rng, 3, 3)};
    Vector c(2);
    c << 0.3, 1.1;
    Vector a = partial_symmetry_update(slabs, c);
    std::vector<Matrix> doubled = {2.0 * slabs[0], 2.0 * slabs[1]};
    Vector b = partial_symmetry_update(doubled, c, &a);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }

  CHECK_THROWS(partial_symmetry_update({Matrix::Zero(3, 3)}, Vector::Ones(1)));
}

TEST_CASE("nonnegative cpd via ao-admm stays monotone and feasible") {
  Rng rng(29);
  std::vector<Matrix> factors;
  for (index_t s : {7, 6, 5}) {
    Matrix a(s, 3);
    for (index_t i = 0; i < a.size(); ++i)
      a.data()[i] = std::abs(rng.normal());
    factors.push_back(a);
  }
  DenseTensor tensor = kruskal_reconstruct(KruskalModel(factors));

  FitOptions opts;
  opts.rank = 3;
  opts.seed = 31;
  opts.max_sweeps = 200;
  opts.mode_constraints.assign(3, ConstraintDescriptor::nonnegative());
  auto [model, report] = cpd_als(tensor, opts);

  for (size_t i = 1; i < report.loss_trajectory.size(); ++i)
    CHECK(report.loss_trajectory[i] <=
          report.loss_trajectory[i - 1] + 1e-10 * (1.0 + tensor.norm_sq()));
  for (const auto& f : model.factors) CHECK(f.minCoeff() >= 0.0);

  FitOptions free_opts = opts;
  free_opts.mode_constraints.clear();
  auto [free_model, free_report] = cpd_als(tensor, free_opts);
  CHECK(std::sqrt(report.loss_trajectory.back()) <=
        std::sqrt(free_report.loss_trajectory.back()) +
            1e-3 * std::sqrt(tensor.norm_sq()));
}

TEST_CASE("symmetric factorizations by penalty and by exact updates") {
  // partially symmetric planted model: first two modes share a factor
  Rng rng(37);
  Matrix a(5, 2), c(4, 2);
  for (index_t i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  for (index_t i = 0; i < c.size(); ++i) c.data()[i] = rng.normal();
  DenseTensor tensor = kruskal_reconstruct(KruskalModel({a, a, c}));

  FitOptions opts;
  opts.rank = 2;
  opts.seed = 41;
  opts.max_sweeps = 400;
  opts.mode_constraints = {ConstraintDescriptor::none(),
                           ConstraintDescriptor::symmetric_with(0, 1.0),
                           ConstraintDescriptor::none()};

  SUBCASE("quadratic penalty pulls the modes together") {
    auto [model, report] = cpd_als(tensor, opts);
    CHECK(report.loss_trajectory.back() < 1e-4 * tensor.norm_sq());
  }

  SUBCASE("exact rank-1 eigenvector updates enforce symmetry tightly") {
    opts.exact_symmetry_update = true;
    auto [model, report] = cpd_als(tensor, opts);
    CHECK(report.loss_trajectory.back() < 1e-10 * tensor.norm_sq());
    for (index_t f = 0; f < 2; ++f) {
      const Vector va = model.factors[0].col(f);
      const Vector vb = model.factors[1].col(f);
      CHECK(std::abs(std::abs(va.dot(vb)) - 1.0) < 1e-8);
    }
  }
}
