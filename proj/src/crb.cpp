#include "tenkit/crb.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "tenkit/linalg.hpp"
#include "tenkit/ops.hpp"

namespace tenkit {
namespace {

constexpr index_t kDenseParameterGuard = 200000;

Matrix hadamard_grams_outside(const std::vector<Matrix>& grams, index_t d,
                              index_t c) {
  const index_t f = grams[0].rows();
  Matrix out = Matrix::Ones(f, f);
  for (index_t m = 0; m < static_cast<index_t>(grams.size()); ++m)
    if (m != d && m != c) out = out.cwiseProduct(grams[m]);
  return out;
}

// Selection matrix S = I_F (khatri-rao) I_F, size F^2 x F: column j is
// e_j (x) e_j.
Matrix identity_selection(index_t f) {
  Matrix s = Matrix::Zero(f * f, f);
  for (index_t j = 0; j < f; ++j) s(j * f + j, j) = 1.0;
  return s;
}

// E matrix of the null basis L = Upsilon E: N blocks of size F^2 x (N-1)F.
Matrix null_combination(index_t n, index_t f) {
  const Matrix s = identity_selection(f);
  Matrix e = Matrix::Zero(n * f * f, (n - 1) * f);
  for (index_t c = 0; c + 1 < n; ++c) {
    e.block(0, c * f, f * f, f) = s;
    e.block((c + 1) * f * f, c * f, f * f, f) = -s;
  }
  return e;
}

// K of Psi = Delta + Upsilon K Upsilon^T: off-diagonal blocks are the
// commutation matrix times diag(vec(Gamma_dc)).
Matrix core_coupling(const FimBlocks& fim) {
  const index_t n = fim.order(), f = fim.rank();
  const Matrix kf = commutation_matrix(f, f);
  Matrix k = Matrix::Zero(n * f * f, n * f * f);
  for (index_t d = 0; d < n; ++d)
    for (index_t c = 0; c < n; ++c) {
      if (d == c) continue;
      const Matrix gdc = fim.gamma_pair(d, c);
      k.block(d * f * f, c * f * f, f * f, f * f) =
          kf * vec(gdc).asDiagonal();
    }
  return k;
}

// Block-diagonal Upsilon = diag(I_F (x) A_n), materialized.
Matrix upsilon_dense(const FimBlocks& fim) {
  const index_t n = fim.order(), f = fim.rank();
  Matrix u = Matrix::Zero(fim.parameter_count(), n * f * f);
  index_t row = 0;
  for (index_t m = 0; m < n; ++m) {
    const index_t im = fim.factors[m].rows();
    u.block(row, m * f * f, im * f, f * f) =
        kronecker(Matrix::Identity(f, f), fim.factors[m]);
    row += im * f;
  }
  return u;
}

}  // namespace

index_t FimBlocks::parameter_count() const {
  index_t total = 0;
  for (const auto& a : factors) total += a.size();
  return total;
}

Matrix FimBlocks::gamma_pair(index_t d, index_t c) const {
  return hadamard_grams_outside(grams, d, c);
}

Matrix FimBlocks::assemble_dense() const {
  const index_t n = order(), f = rank();
  const index_t total = parameter_count();
  if (total > kDenseParameterGuard)
    throw std::invalid_argument(
        "fim: dense verification refused above 2e5 parameters");
  const Matrix kf = commutation_matrix(f, f);
  Matrix psi = Matrix::Zero(total, total);
  std::vector<index_t> offset(n + 1, 0);
  for (index_t m = 0; m < n; ++m)
    offset[m + 1] = offset[m] + factors[m].size();

  for (index_t d = 0; d < n; ++d) {
    psi.block(offset[d], offset[d], factors[d].size(), factors[d].size()) =
        kronecker(gammas[d], Matrix::Identity(factors[d].rows(),
                                              factors[d].rows()));
    for (index_t c = 0; c < n; ++c) {
      if (c == d) continue;
      const Matrix block =
          kronecker(Matrix::Identity(f, f), factors[d]) * kf *
          vec(gamma_pair(d, c)).asDiagonal() *
          kronecker(Matrix::Identity(f, f), factors[c]).transpose();
      psi.block(offset[d], offset[c], factors[d].size(), factors[c].size()) =
          block;
    }
  }
  return psi;
}

Vector FimBlocks::apply(const Vector& v) const {
  const index_t n = order(), f = rank();
  if (v.size() != parameter_count())
    throw std::invalid_argument("fim apply: length mismatch");
  std::vector<Matrix> z(n);
  index_t at = 0;
  for (index_t m = 0; m < n; ++m) {
    z[m] = unvec(v.segment(at, factors[m].size()), factors[m].rows(), f);
    at += factors[m].size();
  }
  Vector out(v.size());
  at = 0;
  for (index_t d = 0; d < n; ++d) {
    Matrix acc = z[d] * gammas[d];  // (Gamma_d (x) I) vec(Z_d)
    for (index_t c = 0; c < n; ++c) {
      if (c == d) continue;
      // (I (x) A_d) K_F diag(vec Gamma_dc) (I (x) A_c)^T vec(Z_c)
      acc += factors[d] *
             gamma_pair(d, c).cwiseProduct(factors[c].transpose() * z[c])
                 .transpose();
    }
    out.segment(at, acc.size()) = Eigen::Map<const Vector>(acc.data(),
                                                           acc.size());
    at += acc.size();
  }
  return out;
}

Matrix FimBlocks::null_basis() const {
  const index_t n = order(), f = rank();
  Matrix l = Matrix::Zero(parameter_count(), (n - 1) * f);
  std::vector<index_t> offset(n + 1, 0);
  for (index_t m = 0; m < n; ++m)
    offset[m + 1] = offset[m] + factors[m].size();
  for (index_t c = 0; c + 1 < n; ++c)
    for (index_t j = 0; j < f; ++j) {
      const index_t col = c * f + j;
      l.block(offset[0] + j * factors[0].rows(), col, factors[0].rows(), 1) =
          factors[0].col(j);
      l.block(offset[c + 1] + j * factors[c + 1].rows(), col,
              factors[c + 1].rows(), 1) = -factors[c + 1].col(j);
    }
  return l;
}

FimBlocks build_fim(const KruskalModel& m, double sigma_sq) {
  if (!(sigma_sq > 0.0))
    throw std::invalid_argument("build_fim: sigma^2 must be positive");
  m.validate();
  if (m.order() < 2) throw std::invalid_argument("build_fim: order >= 2");

  FimBlocks fim;
  fim.sigma_sq = sigma_sq;
  fim.factors = m.factors;
  // balanced weight absorption: each mode takes lambda^(1/N)
  const index_t n = m.order();
  for (index_t f = 0; f < m.rank(); ++f) {
    const double w = m.weights(f);
    if (w != 1.0) {
      const double share = std::pow(w, 1.0 / static_cast<double>(n));
      for (index_t mode = 0; mode < n; ++mode)
        fim.factors[mode].col(f) *= share;
    }
  }
  for (const auto& a : fim.factors)
    fim.grams.push_back(a.transpose() * a);
  for (index_t mode = 0; mode < n; ++mode) {
    Matrix g = Matrix::Ones(m.rank(), m.rank());
    for (index_t other = 0; other < n; ++other)
      if (other != mode) g = g.cwiseProduct(fim.grams[other]);
    fim.gammas.push_back(g);
  }
  return fim;
}

index_t fim_rank_deficiency(const FimBlocks& fim) {
  const Matrix psi = fim.assemble_dense();
  Eigen::JacobiSVD<Matrix> svd(psi);
  const auto& s = svd.singularValues();
  index_t rank = 0;
  for (index_t i = 0; i < s.size(); ++i)
    if (s(i) > 1e-9 * s(0)) ++rank;
  return psi.rows() - rank;
}

double CrbReport::information_scale() const {
  switch (noise) {
    case NoiseModel::gaussian:
      return 1.0 / noise_parameter;  // 1/sigma^2
    case NoiseModel::laplacian:
      return 2.0 / (noise_parameter * noise_parameter);  // 2/b^2
    case NoiseModel::cauchy:
      return 1.0 / (2.0 * noise_parameter * noise_parameter);  // 1/(2g^2)
  }
  return 1.0;
}

std::vector<double> CrbReport::bound_mode_traces() const {
  std::vector<double> out = psi_pinv_mode_traces;
  const double kappa = information_scale();
  for (double& v : out) v /= kappa;
  return out;
}

CrbReport crb_pinv(const FimBlocks& fim, Matrix* dense_pinv) {
  const index_t n = fim.order(), f = fim.rank();
  CrbReport report;
  report.noise = NoiseModel::gaussian;
  report.noise_parameter = fim.sigma_sq;
  report.detected_deficiency = fim_rank_deficiency(fim);

  std::vector<index_t> offset(n + 1, 0);
  for (index_t m = 0; m < n; ++m)
    offset[m + 1] = offset[m] + fim.factors[m].size();

  bool structured_ok = report.detected_deficiency == (n - 1) * f;
  Matrix psi_pinv;

  if (structured_ok) {
    // Omega = Delta + Upsilon (K + E E^T) Upsilon^T completes the range;
    // the inversion lemma reduces everything to N F^2-sized blocks.
    const Matrix k = core_coupling(fim);
    const Matrix e = null_combination(n, f);
    const Matrix kee = k + e * e.transpose();
    Eigen::FullPivLU<Matrix> kee_lu(kee);
    if (!kee_lu.isInvertible()) {
      structured_ok = false;
    } else {
      const Matrix kee_inv = kee_lu.inverse();
      // Upsilon^T Delta^{-1} Upsilon = blockdiag(Gamma_n^{-1} (x) Gram_n)
      Matrix middle = kee_inv;
      std::vector<Matrix> gamma_inv(n);
      for (index_t m = 0; m < n; ++m) {
        gamma_inv[m] = fim.gammas[m].inverse();
        middle.block(m * f * f, m * f * f, f * f, f * f) +=
            kronecker(gamma_inv[m], fim.grams[m]);
      }
      const Matrix mid_inv = middle.inverse();

      // L^+ pieces: G_ll = L^T L from the small E-Gram blocks
      const Matrix l = fim.null_basis();
      const Matrix gll = l.transpose() * l;
      const Matrix gll_inv2 = gll.inverse() * gll.inverse();

      report.psi_pinv_mode_traces.assign(n, 0.0);
      double total = 0.0;
      for (index_t m = 0; m < n; ++m) {
        const index_t im = fim.factors[m].rows();
        double tr = static_cast<double>(im) * gamma_inv[m].trace();
        // subtract tr((Gamma^-1 (x) A) M_mm (Gamma^-1 (x) A^T))
        const Matrix mid_block =
            mid_inv.block(m * f * f, m * f * f, f * f, f * f);
        tr -= (mid_block *
               kronecker(gamma_inv[m] * gamma_inv[m], fim.grams[m]))
                  .trace();
        // subtract tr(L_m (L^T L)^-2 L_m^T)
        const Matrix lm = l.middleRows(offset[m], im * f);
        tr -= (gll_inv2 * (lm.transpose() * lm)).trace();
        report.psi_pinv_mode_traces[m] = tr;
        total += tr;
      }
      report.psi_pinv_trace = total;
      report.structured = true;

      if (dense_pinv) {
        // materialize Psi^+ = Delta^-1 - (Delta^-1 Upsilon) M (.)^T - L G^-2 L^T
        const index_t params = fim.parameter_count();
        Matrix du = Matrix::Zero(params, n * f * f);
        Matrix delta_inv = Matrix::Zero(params, params);
        for (index_t m = 0; m < n; ++m) {
          const index_t im = fim.factors[m].rows();
          du.block(offset[m], m * f * f, im * f, f * f) =
              kronecker(gamma_inv[m], fim.factors[m]);
          delta_inv.block(offset[m], offset[m], im * f, im * f) =
              kronecker(gamma_inv[m], Matrix::Identity(im, im));
        }
        psi_pinv = delta_inv - du * mid_inv * du.transpose() -
                   l * gll_inv2 * l.transpose();
        *dense_pinv = psi_pinv;
      }
    }
  }

  if (!structured_ok) {
    // dense SVD fallback
    const Matrix psi = fim.assemble_dense();
    psi_pinv = pinv(psi, 1e-9);
    report.structured = false;
    report.psi_pinv_mode_traces.assign(n, 0.0);
    double total = 0.0;
    for (index_t m = 0; m < n; ++m) {
      const double tr =
          psi_pinv.block(offset[m], offset[m], fim.factors[m].size(),
                         fim.factors[m].size())
              .trace();
      report.psi_pinv_mode_traces[m] = tr;
      total += tr;
    }
    report.psi_pinv_trace = total;
    if (dense_pinv) *dense_pinv = psi_pinv;
  }
  return report;
}

Matrix mf_fim_dense(const Matrix& w, const Matrix& h) {
  const index_t m = w.rows(), n = h.rows(), k = w.cols();
  if (h.cols() != k)
    throw std::invalid_argument("mf_fim_dense: column counts differ");
  const Matrix ck = commutation_matrix(k, k);
  const Matrix ik = Matrix::Identity(k, k);
  Matrix psi(( m + n) * k, (m + n) * k);
  psi.topLeftCorner(m * k, m * k) =
      kronecker(h.transpose() * h, Matrix::Identity(m, m));
  psi.bottomRightCorner(n * k, n * k) =
      kronecker(w.transpose() * w, Matrix::Identity(n, n));
  const Matrix cross =
      kronecker(ik, w) * ck * kronecker(ik, h).transpose();
  psi.topRightCorner(m * k, n * k) = cross;
  psi.bottomLeftCorner(n * k, m * k) = cross.transpose();
  return psi;
}

std::pair<double, double> crb_matrix_factorization(const Matrix& w,
                                                   const Matrix& h,
                                                   double sigma_sq) {
  if (!(sigma_sq > 0.0))
    throw std::invalid_argument("crb_matrix_factorization: sigma^2 <= 0");
  const index_t m = w.rows(), n = h.rows(), k = w.cols();
  if (h.cols() != k)
    throw std::invalid_argument("crb_matrix_factorization: rank mismatch");
  if (numerical_rank(w) < k || numerical_rank(h) < k)
    throw std::invalid_argument(
        "crb_matrix_factorization: factors must have full column rank");

  const Matrix wtw = w.transpose() * w;
  const Matrix hth = h.transpose() * h;
  const Matrix wtw_inv = wtw.inverse();
  const Matrix hth_inv = hth.inverse();
  const Matrix ik2 = Matrix::Identity(k * k, k * k);
  const Matrix ik = Matrix::Identity(k, k);

  const Matrix mix = kronecker(ik, wtw) + kronecker(hth, ik);
  const Matrix mix_inv = mix.inverse();
  const Matrix mix_inv2 = mix_inv * mix_inv;

  const double beta_w =
      static_cast<double>(m) * hth_inv.trace() -
      ((ik2 + kronecker(hth_inv, wtw)).inverse() *
       kronecker(hth_inv * hth_inv, wtw))
          .trace() -
      (mix_inv2 * kronecker(ik, wtw)).trace();
  const double beta_h =
      static_cast<double>(n) * wtw_inv.trace() -
      ((ik2 + kronecker(wtw_inv, hth)).inverse() *
       kronecker(wtw_inv * wtw_inv, hth))
          .trace() -
      (mix_inv2 * kronecker(hth, ik)).trace();
  return {beta_w, beta_h};
}

CrbReport noise_rescale(const CrbReport& crb, NoiseModel model,
                        double parameter) {
  if (!(parameter > 0.0))
    throw std::invalid_argument("noise_rescale: parameter must be positive");
  CrbReport out = crb;
  out.noise = model;
  out.noise_parameter = parameter;
  return out;
}

}  // namespace tenkit
