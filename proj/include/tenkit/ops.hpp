#pragma once

#include <vector>

#include "tenkit/kruskal.hpp"
#include "tenkit/linalg.hpp"
#include "tenkit/tensor.hpp"

namespace tenkit {

/// Mode-n unfolding, size (prod of other extents) x I_n. Rows are indexed
/// column-major over the other modes in increasing mode order, so that for
/// a third-order tensor X ~ [A,B,C]:
///   unfold(X,0) = khatri_rao(C,B) * A^T
///   unfold(X,1) = khatri_rao(C,A) * B^T
///   unfold(X,2) = khatri_rao(B,A) * C^T
/// Modes are 0-based.
Matrix unfold(const DenseTensor& t, index_t mode);

/// Exact inverse of unfold.
DenseTensor fold(const Matrix& m, index_t mode,
                 const std::vector<index_t>& shape);

/// Hadamard product over all modes != skip of factors[n]^T factors[n].
/// Pass skip = -1 to include every mode.
Matrix gram_hadamard(const std::vector<Matrix>& factors, index_t skip);

/// unfold(t,mode)^T times the Khatri-Rao product of the other factors
/// (descending mode order), computed by on-the-fly column generation.
/// factors[mode] may be empty; it is never read.
Matrix mttkrp(const DenseTensor& t, const std::vector<Matrix>& factors,
              index_t mode);
Matrix mttkrp(const SparseTensor& t, const std::vector<Matrix>& factors,
              index_t mode);

DenseTensor kruskal_reconstruct(const KruskalModel& m);

/// || t - reconstruct(m) ||_F^2. The sparse overload never materializes the
/// reconstruction: it expands ||X||^2 - 2<X,M> + ||M||^2 with the cross term
/// from one sparse MTTKRP and the model norm from the Hadamard Gram.
double model_fit_residual(const DenseTensor& t, const KruskalModel& m);
double model_fit_residual(const SparseTensor& t, const KruskalModel& m);

/// <t, reconstruct(m)> without materializing the reconstruction.
double model_inner(const SparseTensor& t, const KruskalModel& m);
/// ||reconstruct(m)||_F^2 via weights' quadratic form with the full Gram.
double model_norm_sq(const KruskalModel& m);

}  // namespace tenkit
