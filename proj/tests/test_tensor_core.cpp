#include "doctest.h"

#include <cstdlib>
#include <random>

#include "oracles.hpp"
#include "tenkit/linalg.hpp"
#include "tenkit/ops.hpp"

using namespace tenkit;
using oracle::max_abs_diff;

namespace {

KruskalModel rank1_abc() {
  Matrix a(2, 1), b(2, 1), c(2, 1);
  a << 1, 2;
  b << 1, 0;
  c << 1, 3;
  return KruskalModel({a, b, c});
}

}  // namespace

TEST_CASE("unfold follows the slab convention") {
  const DenseTensor t = kruskal_reconstruct(rank1_abc());

  Matrix m3 = unfold(t, 2);
  Matrix want(4, 2);
  want << 1, 3, 2, 6, 0, 0, 0, 0;
  CHECK(max_abs_diff(m3, want) == 0.0);

  // singleton tensor, any mode
  DenseTensor s({1, 1, 1}, {5.0});
  for (index_t mode = 0; mode < 3; ++mode) {
    Matrix u = unfold(s, mode);
    REQUIRE(u.rows() == 1);
    REQUIRE(u.cols() == 1);
    CHECK(u(0, 0) == 5.0);
  }

  // matches the elementwise oracle on a random tensor, every mode
  std::mt19937_64 rng(7);
  DenseTensor r = oracle::randn_tensor(rng, {3, 4, 2});
  for (index_t mode = 0; mode < 3; ++mode)
    CHECK(max_abs_diff(unfold(r, mode), oracle::unfold(r, mode)) == 0.0);
}

TEST_CASE("fold is the exact inverse of unfold") {
  std::mt19937_64 rng(11);
  DenseTensor t = oracle::randn_tensor(rng, {3, 4, 2});
  for (index_t mode = 0; mode < 3; ++mode) {
    DenseTensor back = fold(unfold(t, mode), mode, t.shape());
    for (index_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);  // bitwise
  }

  DenseTensor s = fold(Matrix::Constant(1, 1, 5.0), 0, {1, 1, 1});
  CHECK(s[0] == 5.0);

  Matrix m(4, 2);
  m << 1, 3, 2, 6, 0, 0, 0, 0;
  DenseTensor r1 = fold(m, 2, {2, 2, 2});
  DenseTensor want = kruskal_reconstruct(rank1_abc());
  for (index_t i = 0; i < want.size(); ++i) CHECK(r1[i] == want[i]);

  CHECK_THROWS(fold(m, 0, {2, 2, 3}));
}

TEST_CASE("khatri_rao expands column-wise kroneckers") {
  Matrix a(2, 1), b(2, 1);
  a << 1, 2;
  b << 3, 4;
  Matrix kr = khatri_rao(a, b);
  Matrix want(4, 1);
  want << 3, 4, 6, 8;
  CHECK(max_abs_diff(kr, want) == 0.0);

  Matrix id = Matrix::Identity(2, 2);
  Matrix kr2 = khatri_rao(id, id);
  CHECK(kr2(0, 0) == 1.0);
  CHECK(kr2(3, 1) == 1.0);
  CHECK(kr2.sum() == 2.0);

  CHECK_THROWS(khatri_rao(Matrix::Ones(2, 2), Matrix::Ones(2, 3)));

  std::mt19937_64 rng(3);
  Matrix ra = oracle::randn(rng, 4, 3), rb = oracle::randn(rng, 5, 3);
  CHECK(max_abs_diff(khatri_rao(ra, rb), oracle::khatri_rao(ra, rb)) == 0.0);
}

TEST_CASE("khatri_rao of full-k-rank Vandermonde pair can drop rank") {
  // 2x6 and 3x6 Vandermonde factors with generators 1..6 and sqrt(1..6):
  // the 6x6 Khatri-Rao product has rank 5.
  Matrix a(2, 6), b(3, 6);
  for (index_t f = 0; f < 6; ++f) {
    const double alpha = static_cast<double>(f + 1);
    const double beta = std::sqrt(alpha);
    a(0, f) = 1.0;
    a(1, f) = alpha;
    b(0, f) = 1.0;
    b(1, f) = beta;
    b(2, f) = beta * beta;
  }
  Matrix kr = khatri_rao(a, b);
  REQUIRE(kr.rows() == 6);
  CHECK(numerical_rank(kr) == 5);
  // the I=3, J=2 shape assignment of the same generators is full rank
  Matrix a3(3, 6), b2(2, 6);
  for (index_t f = 0; f < 6; ++f) {
    const double alpha = static_cast<double>(f + 1);
    const double beta = std::sqrt(alpha);
    a3(0, f) = 1.0;
    a3(1, f) = alpha;
    a3(2, f) = alpha * alpha;
    b2(0, f) = 1.0;
    b2(1, f) = beta;
  }
  CHECK(numerical_rank(khatri_rao(a3, b2)) == 6);
}

TEST_CASE("kronecker product basics and rank multiplicativity") {
  Matrix a(2, 1), b(2, 1);
  a << 1, 2;
  b << 3, 4;
  // b^T ⊗ a == a b^T
  CHECK(max_abs_diff(kronecker(b.transpose(), a), a * b.transpose()) == 0.0);

  Matrix id2 = Matrix::Identity(2, 2);
  CHECK(max_abs_diff(kronecker(id2, id2), Matrix::Identity(4, 4)) == 0.0);

  std::mt19937_64 rng(5);
  Matrix ra = oracle::randn(rng, 3, 2), rb = oracle::randn(rng, 2, 4);
  CHECK(max_abs_diff(kronecker(ra, rb), oracle::kron(ra, rb)) == 0.0);
  CHECK(numerical_rank(kronecker(ra, rb)) ==
        numerical_rank(ra) * numerical_rank(rb));
}

TEST_CASE("hadamard product") {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  CHECK(max_abs_diff(hadamard(a, Matrix::Ones(2, 2)), a) == 0.0);
  CHECK(hadamard(a, Matrix::Zero(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(hadamard(a, Matrix::Ones(3, 2)));

  std::mt19937_64 rng(9);
  Matrix ra = oracle::randn(rng, 4, 3), rb = oracle::randn(rng, 5, 3);
  Matrix kr = oracle::khatri_rao(rb, ra);
  Matrix lhs = hadamard(rb.transpose() * rb, ra.transpose() * ra);
  CHECK(max_abs_diff(lhs, kr.transpose() * kr) < 1e-12 * lhs.norm());
}

TEST_CASE("outer product") {
  Vector a(2), b(3);
  a << 1, 2;
  b << 3, -1, 4;
  DenseTensor m = outer({a, b});
  Matrix want = a * b.transpose();
  for (index_t j = 0; j < 3; ++j)
    for (index_t i = 0; i < 2; ++i) CHECK(m.at({i, j}) == want(i, j));

  Vector e(2);
  e << 1, 0;
  DenseTensor t = outer({e, e, e});
  CHECK(t.at({0, 0, 0}) == 1.0);
  CHECK(oracle::frob_sq(t) == 1.0);

  CHECK_THROWS(outer({a}));
  CHECK_THROWS(outer({a, Vector()}));

  // sum of 3 outer products reproduces an F=3 reconstruction
  std::mt19937_64 rng(13);
  auto model = oracle::random_model(rng, {3, 4, 2}, 3);
  DenseTensor sum({3, 4, 2});
  for (index_t f = 0; f < 3; ++f) {
    DenseTensor o = outer({model.factors[0].col(f), model.factors[1].col(f),
                           model.factors[2].col(f)});
    for (index_t i = 0; i < sum.size(); ++i) sum[i] += o[i];
  }
  DenseTensor rec = kruskal_reconstruct(model);
  for (index_t i = 0; i < sum.size(); ++i)
    CHECK(sum[i] == doctest::Approx(rec[i]).epsilon(1e-12));
}

TEST_CASE("commutation_apply is the vec-transpose permutation") {
  Vector v1(1);
  v1 << 4.5;
  CHECK(commutation_apply(1, 1, v1)(0) == 4.5);

  std::mt19937_64 rng(17);
  Matrix s = oracle::randn(rng, 2, 3);
  Vector vs = vec(s);
  Vector vt = commutation_apply(2, 3, vs);
  CHECK(max_abs_diff(unvec(vt, 3, 2), s.transpose()) == 0.0);

  // K_{n,m} K_{m,n} = I
  Vector v(12);
  for (index_t i = 0; i < 12; ++i) v(i) = static_cast<double>(i) - 3.5;
  Vector round = commutation_apply(4, 3, commutation_apply(3, 4, v));
  CHECK((round - v).cwiseAbs().maxCoeff() == 0.0);

  // dense commutation matrix agrees with the index permutation
  Matrix k = commutation_matrix(3, 4);
  CHECK(max_abs_diff(k * v, commutation_apply(3, 4, v)) == 0.0);
  CHECK(max_abs_diff(k.transpose() * k, Matrix::Identity(12, 12)) == 0.0);

  CHECK_THROWS(commutation_apply(2, 3, v1));
}

TEST_CASE("gram_hadamard") {
  std::mt19937_64 rng(19);
  Vector a = oracle::randn(rng, 3, 1).col(0);
  Vector b = oracle::randn(rng, 4, 1).col(0);
  Matrix g = gram_hadamard({Matrix(a), Matrix(b)}, -1);
  CHECK(g(0, 0) ==
        doctest::Approx(a.squaredNorm() * b.squaredNorm()).epsilon(1e-12));

  // orthonormal columns in every mode -> identity
  Matrix q1 = Eigen::HouseholderQR<Matrix>(oracle::randn(rng, 5, 3))
                  .householderQ() *
              Matrix::Identity(5, 3);
  Matrix q2 = Eigen::HouseholderQR<Matrix>(oracle::randn(rng, 6, 3))
                  .householderQ() *
              Matrix::Identity(6, 3);
  CHECK(max_abs_diff(gram_hadamard({q1, q2}, -1), Matrix::Identity(3, 3)) <
        1e-12);

  // equals the explicit Khatri-Rao Gram with one mode skipped
  Matrix c = oracle::randn(rng, 4, 3);
  Matrix kr = oracle::khatri_rao(q2, q1);  // descending order, skip mode 2
  CHECK(max_abs_diff(gram_hadamard({q1, q2, c}, 2),
                     kr.transpose() * kr) < 1e-12);

  CHECK_THROWS(gram_hadamard({Matrix::Ones(2, 2), Matrix::Ones(2, 3)}, -1));
}

TEST_CASE("dense mttkrp") {
  // rank-1 tensor with factors (a,b) at the last mode gives c |a|^2 |b|^2
  std::mt19937_64 rng(23);
  Matrix a = oracle::randn(rng, 3, 1), b = oracle::randn(rng, 4, 1),
         c = oracle::randn(rng, 5, 1);
  DenseTensor t = kruskal_reconstruct(KruskalModel({a, b, c}));
  Matrix m = mttkrp(t, {a, b, Matrix()}, 2);
  Matrix want = c * (a.squaredNorm() * b.squaredNorm());
  CHECK(max_abs_diff(m, want) < 1e-12 * want.norm());

  DenseTensor z({2, 3, 4});
  Matrix mz = mttkrp(z, {oracle::randn(rng, 2, 2), oracle::randn(rng, 3, 2),
                         oracle::randn(rng, 4, 2)},
                     1);
  CHECK(mz.rows() == 3);
  CHECK(mz.cols() == 2);
  CHECK(mz.cwiseAbs().maxCoeff() == 0.0);

  // matches the naive materialized-KRP oracle on every mode
  DenseTensor r = oracle::randn_tensor(rng, {4, 5, 6});
  std::vector<Matrix> factors = {oracle::randn(rng, 4, 3),
                                 oracle::randn(rng, 5, 3),
                                 oracle::randn(rng, 6, 3)};
  for (index_t mode = 0; mode < 3; ++mode) {
    Matrix got = mttkrp(r, factors, mode);
    Matrix naive = oracle::mttkrp_naive(r, factors, mode);
    CHECK(max_abs_diff(got, naive) < 1e-12 * (1.0 + naive.norm()));
  }

  // 4-way as well
  DenseTensor r4 = oracle::randn_tensor(rng, {3, 2, 4, 3});
  std::vector<Matrix> f4 = {oracle::randn(rng, 3, 2), oracle::randn(rng, 2, 2),
                            oracle::randn(rng, 4, 2),
                            oracle::randn(rng, 3, 2)};
  for (index_t mode = 0; mode < 4; ++mode) {
    Matrix got = mttkrp(r4, f4, mode);
    Matrix naive = oracle::mttkrp_naive(r4, f4, mode);
    CHECK(max_abs_diff(got, naive) < 1e-12 * (1.0 + naive.norm()));
  }

  CHECK_THROWS(mttkrp(r, factors, 3));
  CHECK_THROWS(mttkrp(r, {factors[0], factors[1], Matrix::Ones(2, 3)}, 0));
}

TEST_CASE("sparse mttkrp") {
  std::mt19937_64 rng(29);

  SparseTensor empty({4, 5, 6});
  std::vector<Matrix> factors = {oracle::randn(rng, 4, 3),
                                 oracle::randn(rng, 5, 3),
                                 oracle::randn(rng, 6, 3)};
  Matrix m0 = mttkrp(empty, factors, 0);
  CHECK(m0.rows() == 4);
  CHECK(m0.cols() == 3);
  CHECK(m0.cwiseAbs().maxCoeff() == 0.0);

  // single entry at (0,0,0) lands v * (B(0,:) .* C(0,:)) in row 0 of mode 0
  SparseTensor single({4, 5, 6}, {0, 0, 0}, {2.5});
  Matrix ms = mttkrp(single, factors, 0);
  Matrix want = Matrix::Zero(4, 3);
  want.row(0) =
      2.5 * (factors[1].row(0).cwiseProduct(factors[2].row(0)));
  CHECK(max_abs_diff(ms, want) < 1e-14);

  // random sparsity pattern matches the densified path, every mode
  std::vector<index_t> idx;
  std::vector<double> vals;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<index_t> shape = {20, 20, 20};
  for (index_t i = 0; i < 20; ++i)
    for (index_t j = 0; j < 20; ++j)
      for (index_t k = 0; k < 20; ++k)
        if (u(rng) < 0.01) {
          idx.insert(idx.end(), {i, j, k});
          vals.push_back(g(rng));
        }
  SparseTensor sp(shape, idx, vals);
  DenseTensor dn = sp.densify();
  std::vector<Matrix> f20 = {oracle::randn(rng, 20, 3),
                             oracle::randn(rng, 20, 3),
                             oracle::randn(rng, 20, 3)};
  for (index_t mode = 0; mode < 3; ++mode) {
    Matrix a = mttkrp(sp, f20, mode);
    Matrix b = mttkrp(dn, f20, mode);
    CHECK(max_abs_diff(a, b) < 1e-12 * (1.0 + b.norm()));
  }
}

TEST_CASE("mttkrp results are stable under the thread count") {
  std::mt19937_64 rng(31);
  DenseTensor t = oracle::randn_tensor(rng, {6, 7, 5});
  std::vector<Matrix> factors = {oracle::randn(rng, 6, 4),
                                 oracle::randn(rng, 7, 4),
                                 oracle::randn(rng, 5, 4)};
  std::vector<index_t> idx = {0, 0, 0, 3, 4, 2, 5, 6, 4, 5, 0, 4};
  SparseTensor sp({6, 7, 5}, idx, {1.0, -2.0, 0.5, 3.0});

  Matrix d1 = mttkrp(t, factors, 1);
  Matrix s1 = mttkrp(sp, factors, 1);
  setenv("TENKIT_NUM_THREADS", "4", 1);
  Matrix d4 = mttkrp(t, factors, 1);
  Matrix s4 = mttkrp(sp, factors, 1);
  unsetenv("TENKIT_NUM_THREADS");

  // dense partitions output rows: identical regardless of worker count
  CHECK(max_abs_diff(d1, d4) == 0.0);
  // sparse merges per-worker accumulators: equal up to reassociation
  CHECK(max_abs_diff(s1, s4) < 1e-12 * (1.0 + s1.norm()));
}

TEST_CASE("kruskal_reconstruct") {
  // complex-multiplication factors reproduce the known frontal slabs
  Matrix a(2, 3), c(2, 3);
  a << 1, 0, 1, 0, 1, 1;
  c << 1, -1, 0, -1, -1, 1;
  DenseTensor x = kruskal_reconstruct(KruskalModel({a, a, c}));
  Matrix s1(2, 2), s2(2, 2);
  s1 << 1, 0, 0, -1;
  s2 << 0, 1, 1, 0;
  for (index_t i = 0; i < 2; ++i)
    for (index_t j = 0; j < 2; ++j) {
      CHECK(x.at({i, j, 0}) == s1(i, j));
      CHECK(x.at({i, j, 1}) == s2(i, j));
    }

  // F=1 is a scaled outer product
  std::mt19937_64 rng(37);
  auto m1 = oracle::random_model(rng, {3, 2, 4}, 1);
  m1.weights(0) = 2.0;
  DenseTensor rec = kruskal_reconstruct(m1);
  DenseTensor o = outer({m1.factors[0].col(0), m1.factors[1].col(0),
                         m1.factors[2].col(0)});
  for (index_t i = 0; i < rec.size(); ++i)
    CHECK(rec[i] == doctest::Approx(2.0 * o[i]).epsilon(1e-12));

  // elementwise definition oracle
  auto m3 = oracle::random_model(rng, {3, 4, 2, 2}, 3);
  DenseTensor got = kruskal_reconstruct(m3);
  DenseTensor naive = oracle::kruskal_dense(m3);
  for (index_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(naive[i]).epsilon(1e-12));
}

TEST_CASE("model_fit_residual") {
  std::mt19937_64 rng(41);
  auto m = oracle::random_model(rng, {4, 3, 5}, 2);
  DenseTensor t = kruskal_reconstruct(m);

  CHECK(model_fit_residual(t, m) < 1e-20 * t.norm_sq());

  auto zero = m;
  zero.weights.setZero();
  CHECK(model_fit_residual(t, zero) ==
        doctest::Approx(t.norm_sq()).epsilon(1e-12));

  // sparse formula matches the dense materialized residual
  std::vector<index_t> idx = {0, 0, 0, 1, 2, 3, 3, 1, 4, 2, 0, 1};
  SparseTensor sp({4, 3, 5}, idx, {1.5, -2.0, 0.25, 4.0});
  DenseTensor dn = sp.densify();
  auto probe = oracle::random_model(rng, {4, 3, 5}, 2);
  CHECK(oracle::rel_err(model_fit_residual(sp, probe),
                        model_fit_residual(dn, probe)) < 1e-10);

  CHECK_THROWS(model_fit_residual(t, oracle::random_model(rng, {4, 3, 4}, 2)));
}

TEST_CASE("sparse tensor canonicalization") {
  // duplicates summed
  SparseTensor t({2, 2, 2}, {0, 0, 0, 0, 0, 0, 1, 1, 1}, {1.0, 2.0, 5.0});
  CHECK(t.nnz() == 2);
  CHECK(t.duplicates_merged());
  CHECK(t.value(0) == 3.0);
  CHECK(t.densify().at({0, 0, 0}) == 3.0);

  CHECK_THROWS(SparseTensor({2, 2}, {0, 2}, {1.0}));   // out of bounds
  CHECK_THROWS(SparseTensor({2, 2}, {0}, {1.0}));      // ragged index list
}

TEST_CASE("vec identity and mixed-product rules") {
  std::mt19937_64 rng(43);
  // vec(A D B^T) == (B ⊙ A) d
  Matrix a = oracle::randn(rng, 4, 3), b = oracle::randn(rng, 5, 3);
  Vector d = oracle::randn(rng, 3, 1).col(0);
  Matrix adb = a * d.asDiagonal() * b.transpose();
  CHECK(max_abs_diff(vec(adb), khatri_rao(b, a) * d) < 1e-12);

  // (A ⊗ B)(E ⊙ F) == (AE) ⊙ (BF)
  Matrix e = oracle::randn(rng, 3, 2), f = oracle::randn(rng, 4, 2);
  Matrix ka = oracle::randn(rng, 2, 3), kb = oracle::randn(rng, 3, 4);
  Matrix lhs = kronecker(ka, kb) * khatri_rao(e, f);
  Matrix rhs = khatri_rao(ka * e, kb * f);
  CHECK(max_abs_diff(lhs, rhs) < 1e-12 * (1.0 + rhs.norm()));
}
