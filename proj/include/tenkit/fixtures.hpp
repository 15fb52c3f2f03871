#pragma once

#include <utility>

#include "tenkit/kruskal.hpp"
#include "tenkit/tensor.hpp"

namespace tenkit {

/// Random model with standard-normal, column-normalized factors (scale in
/// the weights) and its tensor with i.i.d. Gaussian noise of standard
/// deviation sigma added. Deterministic under the seed.
std::pair<KruskalModel, DenseTensor> synth_model(
    const std::vector<index_t>& dims, index_t rank, uint64_t seed,
    double sigma);

/// 2x2x2 complex-number multiplication tensor with its rank-3 factors.
struct ComplexMultFixture {
  DenseTensor tensor;
  KruskalModel factors;
};
ComplexMultFixture complex_mult_fixture();

/// 4x4x4 tensor of the bilinear forms computing a 2x2 matrix product:
/// vec(M1 M2)(k) = vec(M1)^T X(:,:,k) vec(M2).
DenseTensor strassen_fixture();

/// Contract the multiplication tensor with two vectorized matrices:
/// entry k of the result is m1^T X(:,:,k) m2.
Vector bilinear_contract(const DenseTensor& t, const Vector& m1,
                         const Vector& m2);

/// Rank-3 / border-rank-2 tensor u°u°v + u°v°u + v°u°u.
DenseTensor border_rank_tensor(const Vector& u, const Vector& v);

/// The explicit rank-2 approximation sequence
/// X_n = n (u + v/n)°(u + v/n)°(u + v/n) - n u°u°u; its residual against
/// border_rank_tensor(u, v) vanishes as n grows.
KruskalModel border_rank_approximation(const Vector& u, const Vector& v,
                                       double n);

}  // namespace tenkit
