#include "tenkit/bench.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <stdexcept>

#include "tenkit/cpd.hpp"
#include "tenkit/crb.hpp"
#include "tenkit/fixtures.hpp"
#include "tenkit/ops.hpp"
#include "tenkit/rng.hpp"
#include "threading.hpp"

namespace tenkit {
namespace {

bool pencil_spectrum_real(const Matrix& s1, const Matrix& s2) {
  const index_t n = s1.rows();
  const Matrix pencil = s1.partialPivLu().solve(s2).transpose();
  // s2 * s1^{-1} = (s1^{-T} s2^T)^T; eigenvalues are what matter
  if (n == 2) {
    const double tr = pencil.trace();
    const double det = pencil.determinant();
    return tr * tr - 4.0 * det >= 0.0;
  }
  Eigen::EigenSolver<Matrix> es(pencil, /*computeEigenvectors=*/false);
  for (index_t i = 0; i < n; ++i) {
    const auto ev = es.eigenvalues()(i);
    if (std::abs(ev.imag()) > 1e-9 * (1.0 + std::abs(ev.real())))
      return false;
  }
  return true;
}

}  // namespace

TypicalRankResult bench_typical_rank(index_t side, index_t trials,
                                     uint64_t seed) {
  if (side < 2) throw std::invalid_argument("bench_typical_rank: side >= 2");
  if (trials < 1)
    throw std::invalid_argument("bench_typical_rank: trials >= 1");
  TypicalRankResult result;
  result.trials = trials;
  // per-trial derived streams make the trials embarrassingly parallel
  const int nt = detail::num_threads();
  std::vector<index_t> counts(std::max(nt, 1), 0);
  detail::parallel_chunks(trials, nt, [&](int chunk, index_t lo, index_t hi) {
    Matrix s1(side, side), s2(side, side);
    for (index_t t = lo; t < hi; ++t) {
      Rng rng = Rng::derive(seed, static_cast<uint64_t>(t));
      for (index_t j = 0; j < side; ++j)
        for (index_t i = 0; i < side; ++i) s1(i, j) = rng.normal();
      for (index_t j = 0; j < side; ++j)
        for (index_t i = 0; i < side; ++i) s2(i, j) = rng.normal();
      if (pencil_spectrum_real(s1, s2)) ++counts[chunk];
    }
  });
  for (index_t c : counts) result.full_pencil_rank_count += c;
  return result;
}

namespace {

// Pin the scaling/permutation gauge: unit columns everywhere, then all
// component scale absorbed into the last mode.
KruskalModel pin_convention(const KruskalModel& m) {
  KruskalModel out = normalize_model(m);
  out.factors.back() *= out.weights.asDiagonal();
  out.weights.setOnes();
  return out;
}

}  // namespace

MseVsCrbResult bench_mse_vs_crb(const std::vector<index_t>& dims,
                                index_t rank, double snr_db, index_t trials,
                                uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("bench_mse_vs_crb: trials >= 1");
  const index_t n = static_cast<index_t>(dims.size());

  auto [planted_raw, clean] = synth_model(dims, rank, seed, 0.0);
  const KruskalModel planted = pin_convention(planted_raw);

  index_t total = 1;
  for (index_t d : dims) total *= d;
  const double sigma_sq =
      clean.norm_sq() /
      (static_cast<double>(total) * std::pow(10.0, snr_db / 10.0));
  const double sigma = std::sqrt(sigma_sq);

  const FimBlocks fim = build_fim(planted, sigma_sq);
  const CrbReport crb = crb_pinv(fim);

  MseVsCrbResult result;
  result.trials = trials;
  result.sigma_sq = sigma_sq;
  result.crb_trace = crb.bound_total();

  double mse_acc = 0.0;
  for (index_t t = 0; t < trials; ++t) {
    Rng rng = Rng::derive(seed, 1000 + static_cast<uint64_t>(t));
    DenseTensor noisy = clean;
    for (index_t i = 0; i < noisy.size(); ++i)
      noisy[i] += sigma * rng.normal();

    FitOptions opts;
    opts.rank = rank;
    opts.init = InitStrategy::gevd;
    opts.seed = seed + 7919 * static_cast<uint64_t>(t);
    opts.tolerance = 1e-9;
    opts.max_sweeps = 500;
    auto [est_raw, rep] = cpd_als(noisy, opts);
    KruskalModel est = pin_convention(est_raw);

    const MatchResult match = match_factors(planted, est);
    // permute and sign-align the estimate onto the planted gauge; the
    // residual two-fold ambiguity flips a sign pair in modes >= 1
    KruskalModel aligned = est;
    for (index_t f = 0; f < rank; ++f) {
      const index_t j = match.permutation[f];
      for (index_t mode = 0; mode < n; ++mode)
        aligned.factors[mode].col(f) = est.factors[mode].col(j);
      if (n >= 3 && match.mode_scalings[1](f) < 0.0) {
        aligned.factors[1].col(f) = -aligned.factors[1].col(f);
        aligned.factors[2].col(f) = -aligned.factors[2].col(f);
      }
    }
    double err = 0.0;
    for (index_t mode = 0; mode < n; ++mode)
      err += (planted.factors[mode] - aligned.factors[mode]).squaredNorm();
    mse_acc += err;
  }
  result.mean_squared_error = mse_acc / static_cast<double>(trials);
  return result;
}

}  // namespace tenkit
