#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tenkit/constraints.hpp"
#include "tenkit/kruskal.hpp"
#include "tenkit/ops.hpp"

namespace tenkit {

enum class InitStrategy { random, gevd, provided };

/// Binary observation indicator with the data tensor's shape (1 = observed).
struct MissingMask {
  std::vector<index_t> shape;
  std::vector<uint8_t> observed;

  index_t count_observed() const;
  bool all_observed() const;
  void validate(const std::vector<index_t>& data_shape) const;
};

struct FitOptions {
  index_t rank = 1;
  index_t max_sweeps = 500;
  double tolerance = 1e-8;  // relative change of sqrt(loss) vs data norm
  InitStrategy init = InitStrategy::random;
  std::optional<KruskalModel> initial;
  uint64_t seed = 0;
  index_t restarts = 1;
  std::vector<ConstraintDescriptor> mode_constraints;  // empty or one per mode
  std::optional<MissingMask> mask;  // routes to the missing-data paths
  // Opt-in exact rank-1 eigenvector updates for symmetric_with constraints
  // (the default handles symmetry by quadratic penalty).
  bool exact_symmetry_update = false;
  double sgd_step0 = 0.1;

  void validate() const;
};

struct FitReport {
  index_t sweeps = 0;
  std::vector<double> loss_trajectory;  // ||X - model||_F^2 after each sweep
  double terminal_relative_change = std::numeric_limits<double>::infinity();
  double wall_time_seconds = 0.0;
  Vector component_weights;
  bool diverged = false;
  std::vector<double> max_column_norm_trajectory;
  bool ridge_applied = false;
  bool rank_overspecified = false;
  bool gevd_near_defective = false;
  bool gevd_used = false;
  index_t best_restart = 0;
  std::vector<std::pair<index_t, index_t>> skipped_rows;  // (mode, row)
};

/// Raised when the GEVD pencil has a complex-conjugate eigenvalue pair over
/// the real field; callers should fall back to random initialization.
class GevdComplexEigenvalues : public std::runtime_error {
 public:
  GevdComplexEigenvalues()
      : std::runtime_error(
            "gevd_init: complex conjugate pencil eigenvalues over the real "
            "field; use random initialization instead") {}
};

std::pair<KruskalModel, FitReport> cpd_als(const DenseTensor& t,
                                           const FitOptions& opts);
std::pair<KruskalModel, FitReport> cpd_als(const SparseTensor& t,
                                           const FitOptions& opts);

struct GevdInfo {
  bool near_defective = false;
};

/// Algebraic initialization from the generalized eigendecomposition of two
/// random slab mixtures. Requires a third-order tensor, F <= min(I,J), K >= 2.
KruskalModel gevd_init(const DenseTensor& t, index_t rank,
                       GevdInfo* info = nullptr, uint64_t seed = 0);

/// Per-mode gradients of ||t - model||_F^2 with respect to the factor
/// matrices (weights held fixed).
std::vector<Matrix> cpd_gradient(const DenseTensor& t, const KruskalModel& m);

struct LineSearchResult {
  double step = 0.0;
  double predicted_loss = 0.0;
};

/// Exact line search for the loss along a factor-space direction: fits the
/// degree-2N loss polynomial through 2N+1 sampled step sizes, then minimizes
/// it over [window_lo, window_hi] by rooting the derivative.
LineSearchResult exact_line_search(const DenseTensor& t, const KruskalModel& m,
                                   const std::vector<Matrix>& direction,
                                   double window_lo, double window_hi,
                                   double prev_step = 1.0);

/// One SGD update from sample (idx, value) with step eta: touches exactly
/// row idx[n] of factor n; all factor reads use pre-update values.
void sgd_update(KruskalModel& m, std::span<const index_t> idx, double value,
                double eta);

/// Applies a batch of conflict-free updates (sample indices pairwise
/// distinct in every mode) concurrently; bitwise equal to applying them
/// sequentially. Throws if the batch has a mode conflict.
void sgd_update_batch(KruskalModel& m, const std::vector<std::vector<index_t>>& idx,
                      const std::vector<double>& values, double eta);

std::pair<KruskalModel, FitReport> cpd_sgd(const DenseTensor& t,
                                           const FitOptions& opts);
std::pair<KruskalModel, FitReport> cpd_sgd(const SparseTensor& t,
                                           const FitOptions& opts);

/// ALS with missing data: row-wise weighted least squares on observed
/// entries only. Rows with no observed entries are skipped and flagged.
std::pair<KruskalModel, FitReport> cpd_als_missing(const DenseTensor& t,
                                                   const MissingMask& mask,
                                                   const FitOptions& opts);

/// Expectation-maximization imputation: alternate filling unobserved
/// entries with the current model and full-data ALS sweeps.
std::pair<KruskalModel, FitReport> em_impute_fit(const DenseTensor& t,
                                                 const MissingMask& mask,
                                                 const FitOptions& opts);

/// The EM starting point: unobserved entries replaced by the mean of the
/// observed ones.
DenseTensor em_initial_imputation(const DenseTensor& t,
                                  const MissingMask& mask);

/// One damped Gauss-Newton step (J^T J + damping I) p = -g/2 on the stacked
/// factor parameters. Weights are absorbed into the first factor; the
/// returned model has unit weights. damping must be positive because the
/// Gauss-Newton normal matrix is structurally rank deficient.
KruskalModel gauss_newton_step(const DenseTensor& t, const KruskalModel& m,
                               double damping);

/// Unit-norm columns, scales absorbed into weights, components sorted by
/// descending weight, sign convention on the first factor's columns.
KruskalModel normalize_model(const KruskalModel& m,
                             bool* zero_column_flagged = nullptr);

struct MatchResult {
  std::vector<index_t> permutation;   // reference column f <- estimate column permutation[f]
  std::vector<Vector> mode_scalings;  // per mode, per component
  double score = 0.0;                 // in [0,1]; 1 = identical up to ambiguity
  double max_rel_column_error = 0.0;
};

/// Greedy congruence matching between two models of equal rank/shape,
/// resolving the permutation and scaling ambiguity.
MatchResult match_factors(const KruskalModel& reference,
                          const KruskalModel& estimate);

}  // namespace tenkit
