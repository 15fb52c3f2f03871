#pragma once

#include <utility>
#include <vector>

#include "tenkit/cpd.hpp"
#include "tenkit/kruskal.hpp"
#include "tenkit/tensor.hpp"

namespace tenkit {

/// Core tensor plus per-mode orthonormal bases (I_n x r_n).
struct TuckerModel {
  DenseTensor core;
  std::vector<Matrix> bases;

  index_t order() const { return static_cast<index_t>(bases.size()); }
  std::vector<index_t> ranks() const { return core.shape(); }
  void validate() const;
};

/// Mode-n tensor-times-matrix: result = t x_n m (contraction over I_n with
/// an r x I_n matrix m).
DenseTensor ttm(const DenseTensor& t, const Matrix& m, index_t mode);

/// Truncated multilinear SVD: basis n holds the r_n principal right
/// singular vectors of unfold(t, n); the core is the multilinear
/// projection of t onto the bases.
TuckerModel mlsvd(const DenseTensor& t, const std::vector<index_t>& ranks);

struct TuckerFitReport {
  index_t sweeps = 0;
  std::vector<double> reward_trajectory;  // ||core||_F^2, non-decreasing
  std::vector<double> loss_trajectory;    // ||t||^2 - ||core||^2
  double terminal_relative_change = 0.0;
  double wall_time_seconds = 0.0;
};

/// Orthogonal Tucker ALS (HOOI): initialized by mlsvd, each step replaces
/// a basis by the principal right singular vectors of the projected
/// (small) unfolding. Stops when the reward stalls (rel 1e-10) or after
/// 200 sweeps.
std::pair<TuckerModel, TuckerFitReport> tucker_als(
    const DenseTensor& t, const std::vector<index_t>& ranks);

/// Sum of squared norms of the core slabs discarded when truncating
/// full_core to kept_ranks, accumulated over every mode; upper-bounds the
/// actual truncation error.
double truncation_error_bound(const DenseTensor& full_core,
                              const std::vector<index_t>& kept_ranks);

/// Full tensor from a Tucker model via sequential mode products.
DenseTensor tucker_reconstruct(const TuckerModel& m);

/// Compress with mlsvd, run CPD on the small core, then expand the factors
/// back through the bases.
KruskalModel compress_then_cpd(const DenseTensor& t,
                               const std::vector<index_t>& ranks,
                               index_t cpd_rank, const FitOptions& opts);

}  // namespace tenkit
