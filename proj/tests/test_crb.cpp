#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "tenkit/crb.hpp"
#include "tenkit/fixtures.hpp"
#include "tenkit/linalg.hpp"
#include "tenkit/ops.hpp"

using namespace tenkit;

namespace {

// Finite-difference Jacobian of phi(theta) = vec(model tensor) in the
// stacked factor parameters.
Matrix fd_jacobian(const KruskalModel& m, double h) {
  KruskalModel work = m;
  index_t total = 0;
  for (const auto& f : work.factors) total += f.size();
  const DenseTensor base = oracle::kruskal_dense(work);
  Matrix jac(base.size(), total);
  index_t col = 0;
  for (index_t mode = 0; mode < work.order(); ++mode)
    for (index_t j = 0; j < work.factors[mode].size(); ++j) {
      KruskalModel up = work, dn = work;
      up.factors[mode].data()[j] += h;
      dn.factors[mode].data()[j] -= h;
      const DenseTensor fu = oracle::kruskal_dense(up);
      const DenseTensor fd = oracle::kruskal_dense(dn);
      for (index_t i = 0; i < fu.size(); ++i)
        jac(i, col) = (fu[i] - fd[i]) / (2.0 * h);
      ++col;
    }
  return jac;
}

}  // namespace

TEST_CASE("fim diagonal block matches the kronecker closed form") {
  std::mt19937_64 rng(3);
  auto m = oracle::random_model(rng, {3, 3, 2}, 2);
  FimBlocks fim = build_fim(m, 1.0);
  Matrix psi = fim.assemble_dense();
  const Matrix want =
      oracle::kron(hadamard(m.factors[1].transpose() * m.factors[1],
                            m.factors[2].transpose() * m.factors[2]),
                   Matrix::Identity(3, 3));
  CHECK((psi.topLeftCorner(6, 6) - want).cwiseAbs().maxCoeff() <
        1e-12 * (1.0 + want.norm()));
}

TEST_CASE("dense fim equals the finite-difference jacobian gram") {
  std::mt19937_64 rng(5);
  auto m = oracle::random_model(rng, {3, 3, 2}, 2);
  FimBlocks fim = build_fim(m, 1.0);
  const Matrix psi = fim.assemble_dense();
  const Matrix jac = fd_jacobian(m, 1e-6);
  const Matrix want = jac.transpose() * jac;
  CHECK((psi - want).norm() / want.norm() < 1e-6);
  CHECK((psi - psi.transpose()).norm() <= 1e-12 * psi.norm());
  Eigen::SelfAdjointEigenSolver<Matrix> es(psi);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
}

TEST_CASE("fim operator application matches the dense matrix") {
  std::mt19937_64 rng(7);
  auto m = oracle::random_model(rng, {4, 3, 2}, 3);
  FimBlocks fim = build_fim(m, 1.0);
  const Matrix psi = fim.assemble_dense();
  for (int trial = 0; trial < 5; ++trial) {
    Vector v = oracle::randn(rng, psi.rows(), 1).col(0);
    CHECK((fim.apply(v) - psi * v).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + psi.norm()));
  }
}

TEST_CASE("constructed null basis annihilates the fim") {
  std::mt19937_64 rng(11);
  for (auto dims : {std::vector<index_t>{4, 4, 4},
                    std::vector<index_t>{3, 4, 2, 3}}) {
    auto m = oracle::random_model(rng, dims, 2);
    FimBlocks fim = build_fim(m, 1.0);
    const Matrix psi = fim.assemble_dense();
    const Matrix l = fim.null_basis();
    CHECK((psi * l).norm() <= 1e-10 * psi.norm() * l.norm());
  }
}

TEST_CASE("fim rank deficiency is (N-1)F for identifiable models") {
  std::mt19937_64 rng(13);
  auto m3 = oracle::random_model(rng, {4, 4, 4}, 2);
  CHECK(fim_rank_deficiency(build_fim(m3, 1.0)) == 4);

  auto m4 = oracle::random_model(rng, {3, 3, 2, 3}, 2);
  CHECK(fim_rank_deficiency(build_fim(m4, 1.0)) == 6);

  // a repeated third-mode column inflates the deficiency
  auto degenerate = oracle::random_model(rng, {4, 4, 4}, 2);
  degenerate.factors[2].col(1) = degenerate.factors[2].col(0);
  CHECK(fim_rank_deficiency(build_fim(degenerate, 1.0)) > 4);
}

TEST_CASE("structured pseudo-inverse matches the dense oracle") {
  std::mt19937_64 rng(17);
  for (auto dims : {std::vector<index_t>{6, 6, 6},
                    std::vector<index_t>{8, 5, 4}}) {
    const index_t rank = dims[0] == 6 ? 2 : 3;
    auto m = oracle::random_model(rng, dims, rank);
    FimBlocks fim = build_fim(m, 1.0);
    Matrix structured;
    CrbReport report = crb_pinv(fim, &structured);
    CHECK(report.structured);
    CHECK(report.detected_deficiency == 2 * rank);

    const Matrix psi = fim.assemble_dense();
    const Matrix dense = pinv(psi, 1e-9);
    CHECK((structured - dense).norm() / dense.norm() < 1e-8);

    // Moore-Penrose conditions against the dense Psi
    CHECK((psi * structured * psi - psi).norm() <= 1e-8 * psi.norm());
    CHECK((structured * psi * structured - structured).norm() <=
          1e-8 * structured.norm());
    CHECK((psi * structured - (psi * structured).transpose()).norm() <=
          1e-8 * psi.norm() * structured.norm());
    CHECK((structured * psi - (structured * psi).transpose()).norm() <=
          1e-8 * psi.norm() * structured.norm());

    // per-mode traces match the dense blocks
    index_t offset = 0;
    for (index_t mode = 0; mode < static_cast<index_t>(dims.size()); ++mode) {
      const index_t sz = m.factors[mode].size();
      const double want = dense.block(offset, offset, sz, sz).trace();
      CHECK(report.psi_pinv_mode_traces[mode] ==
            doctest::Approx(want).epsilon(1e-8));
      offset += sz;
    }
  }
}

TEST_CASE("sigma scaling and the dense fallback") {
  std::mt19937_64 rng(19);
  auto m = oracle::random_model(rng, {5, 4, 3}, 2);
  FimBlocks fim1 = build_fim(m, 1.0);
  FimBlocks fim4 = build_fim(m, 4.0);
  CrbReport r1 = crb_pinv(fim1);
  CrbReport r4 = crb_pinv(fim4);
  CHECK(r4.bound_total() == doctest::Approx(4.0 * r1.bound_total()));

  // non-identifiable model triggers the dense fallback and still matches
  // the dense pseudo-inverse
  auto degenerate = oracle::random_model(rng, {4, 4, 4}, 2);
  degenerate.factors[2].col(1) = degenerate.factors[2].col(0);
  FimBlocks fim = build_fim(degenerate, 1.0);
  Matrix fallback;
  CrbReport report = crb_pinv(fim, &fallback);
  CHECK_FALSE(report.structured);
  const Matrix dense = pinv(fim.assemble_dense(), 1e-9);
  CHECK((fallback - dense).norm() <= 1e-8 * (1.0 + dense.norm()));
}

TEST_CASE("matrix factorization crb") {
  std::mt19937_64 rng(23);
  const Matrix w = oracle::randn(rng, 5, 2);
  const Matrix h = oracle::randn(rng, 4, 2);

  SUBCASE("closed forms match the dense pseudo-inverse block traces") {
    auto [beta_w, beta_h] = crb_matrix_factorization(w, h, 1.0);
    const Matrix psi = mf_fim_dense(w, h);
    const Matrix dense = pinv(psi, 1e-9);
    const double want_w = dense.topLeftCorner(10, 10).trace();
    const double want_h = dense.bottomRightCorner(8, 8).trace();
    CHECK(beta_w == doctest::Approx(want_w).epsilon(1e-8));
    CHECK(beta_h == doctest::Approx(want_h).epsilon(1e-8));
  }

  SUBCASE("role swap exchanges the two bounds") {
    auto [beta_w, beta_h] = crb_matrix_factorization(w, h, 1.0);
    auto [swapped_w, swapped_h] = crb_matrix_factorization(h, w, 1.0);
    CHECK(beta_w == doctest::Approx(swapped_h).epsilon(1e-12));
    CHECK(beta_h == doctest::Approx(swapped_w).epsilon(1e-12));
  }

  SUBCASE("mf fim rank deficiency is k^2") {
    const Matrix psi = mf_fim_dense(w, h);
    Eigen::JacobiSVD<Matrix> svd(psi);
    index_t rank = 0;
    for (index_t i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > 1e-9 * svd.singularValues()(0)) ++rank;
    CHECK(psi.rows() - rank == 4);  // k^2 with k = 2
  }

  Matrix deficient = w;
  deficient.col(1) = deficient.col(0);
  CHECK_THROWS(crb_matrix_factorization(deficient, h, 1.0));
}

TEST_CASE("noise rescaling") {
  std::mt19937_64 rng(29);
  auto m = oracle::random_model(rng, {4, 4, 3}, 2);
  const double sigma_sq = 0.25;
  CrbReport gauss = crb_pinv(build_fim(m, sigma_sq));

  // b chosen so 2/b^2 equals 1/sigma^2 gives an identical bound
  const double b = std::sqrt(2.0 * sigma_sq);
  CrbReport lap = noise_rescale(gauss, NoiseModel::laplacian, b);
  CHECK(lap.bound_total() == doctest::Approx(gauss.bound_total()));

  // cauchy: bound = 2 gamma^2 tr(psi^+)
  const double gamma = 0.7;
  CrbReport cauchy = noise_rescale(gauss, NoiseModel::cauchy, gamma);
  CHECK(cauchy.bound_total() ==
        doctest::Approx(2.0 * gamma * gamma * gauss.psi_pinv_trace));

  // rescaling twice composes
  CrbReport back = noise_rescale(cauchy, NoiseModel::gaussian, sigma_sq);
  CHECK(back.bound_total() == doctest::Approx(gauss.bound_total()));

  CHECK_THROWS(noise_rescale(gauss, NoiseModel::laplacian, 0.0));
  CHECK_THROWS(build_fim(m, 0.0));
}
