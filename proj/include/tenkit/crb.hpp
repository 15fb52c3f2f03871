#pragma once

#include <utility>
#include <vector>

#include "tenkit/kruskal.hpp"

namespace tenkit {

/// Block-structured Fisher information for a Kruskal model under i.i.d.
/// Gaussian noise: sigma^2 Phi = Psi = Delta + Upsilon K Upsilon^T, where
/// Delta is block diagonal with Kronecker blocks Gamma_n (x) I_{I_n} and
/// the off-diagonal blocks route through the F x F commutation matrix.
struct FimBlocks {
  std::vector<Matrix> factors;  // weight-absorbed parametrization point
  std::vector<Matrix> grams;    // A_n^T A_n
  std::vector<Matrix> gammas;   // Hadamard product of the other grams
  double sigma_sq = 1.0;

  index_t order() const { return static_cast<index_t>(factors.size()); }
  index_t rank() const { return factors.empty() ? 0 : factors[0].cols(); }
  index_t parameter_count() const;

  /// Hadamard product of grams over modes outside {d, c}.
  Matrix gamma_pair(index_t d, index_t c) const;

  /// Dense Psi for desk-scale verification. Refuses oversized problems.
  Matrix assemble_dense() const;

  /// y = Psi v through the operator pipeline (off-diagonal blocks applied
  /// as A_d (Gamma_dc .* (A_c^T Z_c))^T, never materialized).
  Vector apply(const Vector& v) const;

  /// Scaling null-space basis L = Upsilon E with Psi L = 0 exactly;
  /// size parameter_count() x (N-1)F.
  Matrix null_basis() const;
};

FimBlocks build_fim(const KruskalModel& m, double sigma_sq);

/// Numerical rank deficiency of dense Psi (SVD, tol 1e-9 * sigma_max).
index_t fim_rank_deficiency(const FimBlocks& fim);

enum class NoiseModel { gaussian, laplacian, cauchy };

struct CrbReport {
  std::vector<double> psi_pinv_mode_traces;  // tr of Psi^+ diagonal blocks
  double psi_pinv_trace = 0.0;
  index_t detected_deficiency = 0;
  bool structured = false;  // false = dense SVD fallback
  NoiseModel noise = NoiseModel::gaussian;
  double noise_parameter = 1.0;  // sigma^2, b, or gamma

  /// Fisher scale kappa with Phi = kappa * Psi; the bound is Psi^+ / kappa.
  double information_scale() const;
  double bound_total() const { return psi_pinv_trace / information_scale(); }
  std::vector<double> bound_mode_traces() const;
};

/// Pseudo-inverse CRB. Uses the structured route (matrix inversion lemma on
/// the completed-range Omega, O(F^6) inner inverses) when the detected
/// deficiency equals (N-1)F, otherwise falls back to a dense SVD
/// pseudo-inverse with the method flagged. Pass dense_pinv to receive the
/// materialized Psi^+.
CrbReport crb_pinv(const FimBlocks& fim, Matrix* dense_pinv = nullptr);

/// Closed-form trace bounds (beta_W, beta_H) for the matrix factorization
/// Y = W H^T + noise; E||W_hat - W||_F^2 >= sigma^2 beta_W and likewise
/// for H.
std::pair<double, double> crb_matrix_factorization(const Matrix& w,
                                                   const Matrix& h,
                                                   double sigma_sq);

/// Dense (m+n)k x (m+n)k matrix-factorization FIM times sigma^2, for
/// verification against the closed forms.
Matrix mf_fim_dense(const Matrix& w, const Matrix& h);

/// Reinterpret the bound under a different noise family: the Fisher matrix
/// is a scaled version of the Gaussian one (1/sigma^2 vs 2/b^2 vs
/// 1/(2 gamma^2)), so only the scale changes.
CrbReport noise_rescale(const CrbReport& crb, NoiseModel model,
                        double parameter);

}  // namespace tenkit
