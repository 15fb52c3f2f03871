#pragma once

#include <cstdint>
#include <vector>

#include "tenkit/tensor.hpp"

namespace tenkit {

/// Monte-Carlo estimate of the probability that a standard-normal I x I x 2
/// tensor has rank I over the reals, decided per trial by whether the slab
/// pencil S2 S1^{-1} has an all-real spectrum. Trials derive independent
/// streams from the master seed.
struct TypicalRankResult {
  index_t trials = 0;
  index_t full_pencil_rank_count = 0;  // all-real pencil spectra
  double fraction() const {
    return trials ? static_cast<double>(full_pencil_rank_count) /
                        static_cast<double>(trials)
                  : 0.0;
  }
};
TypicalRankResult bench_typical_rank(index_t side, index_t trials,
                                     uint64_t seed);

/// Monte-Carlo mean squared factor error of seeded ALS fits (GEVD init)
/// against the pseudo-inverse Cramer-Rao trace at the planted model, with
/// the permutation/scaling ambiguity fixed by factor matching.
struct MseVsCrbResult {
  index_t trials = 0;
  double mean_squared_error = 0.0;  // total over all factor entries
  double crb_trace = 0.0;
  double sigma_sq = 0.0;
  double ratio() const { return mean_squared_error / crb_trace; }
};
MseVsCrbResult bench_mse_vs_crb(const std::vector<index_t>& dims,
                                index_t rank, double snr_db, index_t trials,
                                uint64_t seed);

}  // namespace tenkit
