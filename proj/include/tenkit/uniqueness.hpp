#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tenkit/kruskal.hpp"

namespace tenkit {

enum class Verdict { unique, inconclusive, necessary_condition_violated };

struct UniquenessVerdict {
  Verdict verdict = Verdict::inconclusive;
  std::string condition;               // which test decided
  std::vector<index_t> k_ranks;        // witnesses
  std::vector<index_t> ranks;
  index_t rank = 0;                    // F under test
  double bound_value = 0.0;            // e.g. Kruskal sum
  double bound_required = 0.0;
  std::optional<index_t> generic_rank; // expected generic rank over C
  bool known_exception = false;        // listed generic non-uniqueness case
  std::string note;
};

/// Kruskal rank: the largest k such that every k-column subset is
/// numerically independent (smallest singular value > tol * sigma_max of
/// the full matrix). Exhaustive over subsets; refuses more than 20 columns.
index_t k_rank(const Matrix& a, double tol = 1e-9);

struct CompoundMatrix {
  index_t source_rows = 0, source_cols = 0, order = 0;
  Matrix minors;  // C(rows,k) x C(cols,k), lexicographic subsets
};

/// k-th compound matrix: all k x k minors in lexicographic row/column
/// subset order.
CompoundMatrix compound_matrix(const Matrix& a, index_t k);

/// Kruskal sufficient condition (sum of k-ranks >= 2F + N - 1) plus the
/// necessary conditions: min k-rank >= 2 for F > 1 and full column rank of
/// every leave-one-mode-out Khatri-Rao product.
UniquenessVerdict check_kruskal(const KruskalModel& m);
UniquenessVerdict check_kruskal(const std::vector<index_t>& dims,
                                const std::vector<index_t>& k_ranks,
                                index_t rank);

/// Third-order sufficient conditions with one full-column-rank mode:
/// r_C = F plus full column rank of M2(B) (Khatri-Rao) M2(A), or
/// r_A = r_B = F plus k_C >= 2. Tried for every role assignment.
UniquenessVerdict check_one_mode_full_rank(const KruskalModel& m);

/// Generic (almost-sure) uniqueness from the dimensions alone, plus the
/// expected generic rank with its defective-case adjustments and the known
/// exception list.
UniquenessVerdict check_generic(const std::vector<index_t>& dims,
                                index_t rank);

/// Expected generic rank over the complex field with the defective-case
/// adjustments.
index_t generic_rank(const std::vector<index_t>& dims);

/// Sandwich bounds max(R_n) <= F <= min_n prod_{m != n} R_m from the
/// multilinear ranks, and the crude bound min_n prod_{m != n} I_m.
struct RankBounds {
  index_t lower = 0;
  index_t upper = 0;
  index_t crude_upper = 0;
};
RankBounds rank_bounds(const std::vector<index_t>& dims,
                       const std::vector<index_t>& multilinear_ranks);

}  // namespace tenkit
