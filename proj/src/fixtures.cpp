#include "tenkit/fixtures.hpp"

#include <stdexcept>

#include "tenkit/cpd.hpp"
#include "tenkit/linalg.hpp"
#include "tenkit/ops.hpp"
#include "tenkit/rng.hpp"

namespace tenkit {

std::pair<KruskalModel, DenseTensor> synth_model(
    const std::vector<index_t>& dims, index_t rank, uint64_t seed,
    double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("synth_model: sigma < 0");
  Rng rng(seed);
  std::vector<Matrix> factors;
  for (index_t s : dims) {
    Matrix a(s, rank);
    for (index_t c = 0; c < rank; ++c)
      for (index_t i = 0; i < s; ++i) a(i, c) = rng.normal();
    factors.push_back(std::move(a));
  }
  KruskalModel model = normalize_model(KruskalModel(std::move(factors)));
  DenseTensor tensor = kruskal_reconstruct(model);
  if (sigma > 0.0)
    for (index_t i = 0; i < tensor.size(); ++i)
      tensor[i] += sigma * rng.normal();
  return {std::move(model), std::move(tensor)};
}

ComplexMultFixture complex_mult_fixture() {
  Matrix a(2, 3), c(2, 3);
  a << 1, 0, 1,
       0, 1, 1;
  c << 1, -1, 0,
       -1, -1, 1;
  ComplexMultFixture fixture;
  fixture.factors = KruskalModel({a, a, c});
  fixture.tensor = kruskal_reconstruct(fixture.factors);
  return fixture;
}

DenseTensor strassen_fixture() {
  // X(i,j,k) = 1 when the i-th entry of vec(M1) and the j-th entry of
  // vec(M2) multiply into the k-th entry of vec(M1 M2), column-major.
  DenseTensor x({4, 4, 4});
  for (index_t a = 0; a < 2; ++a)
    for (index_t b = 0; b < 2; ++b)
      for (index_t c = 0; c < 2; ++c) {
        const index_t i = a + 2 * c;  // M1(a, c)
        const index_t j = c + 2 * b;  // M2(c, b)
        const index_t k = a + 2 * b;  // P(a, b)
        x.at({i, j, k}) += 1.0;
      }
  return x;
}

Vector bilinear_contract(const DenseTensor& t, const Vector& m1,
                         const Vector& m2) {
  if (t.order() != 3)
    throw std::invalid_argument("bilinear_contract: third-order tensor");
  if (m1.size() != t.extent(0) || m2.size() != t.extent(1))
    throw std::invalid_argument("bilinear_contract: vector sizes");
  const index_t i_dim = t.extent(0), j_dim = t.extent(1), k_dim = t.extent(2);
  Vector out(k_dim);
  for (index_t k = 0; k < k_dim; ++k) {
    const auto slab =
        Eigen::Map<const Matrix>(t.data() + k * i_dim * j_dim, i_dim, j_dim);
    out(k) = m1.dot(slab * m2);
  }
  return out;
}

DenseTensor border_rank_tensor(const Vector& u, const Vector& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("border_rank_tensor: size mismatch");
  DenseTensor x({u.size(), u.size(), u.size()});
  auto add = [&x](const DenseTensor& term) {
    for (index_t i = 0; i < x.size(); ++i) x[i] += term[i];
  };
  add(outer({u, u, v}));
  add(outer({u, v, u}));
  add(outer({v, u, u}));
  return x;
}

KruskalModel border_rank_approximation(const Vector& u, const Vector& v,
                                       double n) {
  if (!(n > 0.0))
    throw std::invalid_argument("border_rank_approximation: n must be > 0");
  const Vector mixed = u + v / n;
  Matrix f0(u.size(), 2), f1(u.size(), 2), f2(u.size(), 2);
  f0.col(0) = mixed;
  f1.col(0) = mixed;
  f2.col(0) = mixed;
  f0.col(1) = u;
  f1.col(1) = u;
  f2.col(1) = -u;  // the component progressively cancelled
  Vector weights(2);
  weights << n, n;
  return KruskalModel({f0, f1, f2}, weights);
}

}  // namespace tenkit
