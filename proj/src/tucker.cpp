#include "tenkit/tucker.hpp"

#include <Eigen/SVD>
#include <chrono>
#include <stdexcept>

#include "tenkit/ops.hpp"

namespace tenkit {
namespace {

void check_ranks(const std::vector<index_t>& shape,
                 const std::vector<index_t>& ranks) {
  if (ranks.size() != shape.size())
    throw std::invalid_argument("tucker: one rank per mode expected");
  for (size_t m = 0; m < shape.size(); ++m)
    if (ranks[m] < 1 || ranks[m] > shape[m])
      throw std::invalid_argument("tucker: rank exceeds mode size");
}

// Largest-magnitude entry of each column made positive, for reproducible
// singular vectors.
void fix_signs(Matrix& u) {
  for (index_t c = 0; c < u.cols(); ++c) {
    index_t arg = 0;
    u.col(c).cwiseAbs().maxCoeff(&arg);
    if (u(arg, c) < 0.0) u.col(c) = -u.col(c);
  }
}

// Principal right singular vectors of m, sign-fixed.
Matrix principal_right(const Matrix& m, index_t count) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinV);
  Matrix v = svd.matrixV().leftCols(count);
  fix_signs(v);
  return v;
}

// Project t onto the bases of every mode except `skip` (pass -1 for all).
DenseTensor project_all(const DenseTensor& t, const std::vector<Matrix>& bases,
                        index_t skip) {
  DenseTensor out = t;
  for (index_t m = 0; m < static_cast<index_t>(bases.size()); ++m)
    if (m != skip) out = ttm(out, bases[m].transpose(), m);
  return out;
}

}  // namespace

void TuckerModel::validate() const {
  if (bases.empty()) throw std::invalid_argument("tucker model: no bases");
  if (core.order() != order())
    throw std::invalid_argument("tucker model: core order mismatch");
  for (index_t m = 0; m < order(); ++m) {
    if (bases[m].cols() != core.extent(m))
      throw std::invalid_argument("tucker model: basis/core rank mismatch");
    const Matrix gram = bases[m].transpose() * bases[m];
    if ((gram - Matrix::Identity(gram.rows(), gram.cols()))
            .cwiseAbs()
            .maxCoeff() > 1e-12)
      throw std::invalid_argument("tucker model: basis not orthonormal");
  }
}

DenseTensor ttm(const DenseTensor& t, const Matrix& m, index_t mode) {
  if (m.cols() != t.extent(mode))
    throw std::invalid_argument("ttm: contraction dimension mismatch");
  // unfold(t, mode) has columns indexed by i_mode, so the product with m^T
  // contracts the mode.
  Matrix unfolded = unfold(t, mode) * m.transpose();
  std::vector<index_t> shape = t.shape();
  shape[mode] = m.rows();
  return fold(unfolded, mode, shape);
}

TuckerModel mlsvd(const DenseTensor& t, const std::vector<index_t>& ranks) {
  check_ranks(t.shape(), ranks);
  TuckerModel model;
  model.bases.reserve(ranks.size());
  for (index_t m = 0; m < t.order(); ++m)
    model.bases.push_back(principal_right(unfold(t, m), ranks[m]));
  model.core = project_all(t, model.bases, -1);
  return model;
}

std::pair<TuckerModel, TuckerFitReport> tucker_als(
    const DenseTensor& t, const std::vector<index_t>& ranks) {
  check_ranks(t.shape(), ranks);
  const auto t0 = std::chrono::steady_clock::now();
  const double xnorm_sq = t.norm_sq();
  const index_t n = t.order();

  TuckerModel model = mlsvd(t, ranks);
  TuckerFitReport report;
  double reward = model.core.norm_sq();
  report.reward_trajectory.push_back(reward);
  report.loss_trajectory.push_back(xnorm_sq - reward);

  const index_t max_sweeps = 200;
  for (index_t sweep = 0; sweep < max_sweeps; ++sweep) {
    for (index_t mode = 0; mode < n; ++mode) {
      // principal right singular vectors of the projected (small) unfolding
      const DenseTensor projected = project_all(t, model.bases, mode);
      model.bases[mode] = principal_right(unfold(projected, mode),
                                          ranks[mode]);
    }
    model.core = project_all(t, model.bases, -1);
    const double new_reward = model.core.norm_sq();
    report.reward_trajectory.push_back(new_reward);
    report.loss_trajectory.push_back(xnorm_sq - new_reward);
    report.sweeps = sweep + 1;
    report.terminal_relative_change =
        std::abs(new_reward - reward) / std::max(reward, 1e-300);
    reward = new_reward;
    if (report.terminal_relative_change < 1e-10) break;
  }
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return {model, report};
}

double truncation_error_bound(const DenseTensor& full_core,
                              const std::vector<index_t>& kept_ranks) {
  const auto& shape = full_core.shape();
  if (kept_ranks.size() != shape.size())
    throw std::invalid_argument("truncation_error_bound: rank count");
  for (size_t m = 0; m < shape.size(); ++m)
    if (kept_ranks[m] < 0 || kept_ranks[m] > shape[m])
      throw std::invalid_argument("truncation_error_bound: bad kept rank");

  double bound = 0.0;
  std::vector<index_t> idx(shape.size(), 0);
  for (index_t lin = 0; lin < full_core.size(); ++lin) {
    // an element belongs to the discarded slab of mode m if its index
    // exceeds the kept rank there; count it once per such mode
    index_t over = 0;
    for (size_t m = 0; m < shape.size(); ++m)
      if (idx[m] >= kept_ranks[m]) ++over;
    if (over > 0)
      bound += static_cast<double>(over) * full_core[lin] * full_core[lin];
    for (size_t m = 0; m < shape.size(); ++m) {
      if (++idx[m] < shape[m]) break;
      idx[m] = 0;
    }
  }
  return bound;
}

DenseTensor tucker_reconstruct(const TuckerModel& m) {
  m.validate();
  DenseTensor out = m.core;
  for (index_t mode = 0; mode < m.order(); ++mode)
    out = ttm(out, m.bases[mode], mode);
  return out;
}

KruskalModel compress_then_cpd(const DenseTensor& t,
                               const std::vector<index_t>& ranks,
                               index_t cpd_rank, const FitOptions& opts) {
  check_ranks(t.shape(), ranks);
  index_t core_total = 1;
  for (index_t r : ranks) core_total *= r;
  for (index_t r : ranks)
    if (cpd_rank > core_total / r)
      throw std::invalid_argument(
          "compress_then_cpd: rank infeasible in the compressed space");

  const TuckerModel compressed = mlsvd(t, ranks);
  FitOptions core_opts = opts;
  core_opts.rank = cpd_rank;
  auto [core_model, report] = cpd_als(compressed.core, core_opts);

  KruskalModel expanded = core_model;
  for (index_t mode = 0; mode < expanded.order(); ++mode)
    expanded.factors[mode] = compressed.bases[mode] * core_model.factors[mode];
  return normalize_model(expanded);
}

}  // namespace tenkit
