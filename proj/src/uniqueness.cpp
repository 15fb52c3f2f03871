#include "tenkit/uniqueness.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tenkit/ops.hpp"

namespace tenkit {
namespace {

index_t binomial(index_t n, index_t k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  index_t out = 1;
  for (index_t i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

// Lexicographic k-subsets of {0..n-1}.
std::vector<std::vector<index_t>> subsets(index_t n, index_t k) {
  std::vector<std::vector<index_t>> out;
  std::vector<index_t> cur(k);
  for (index_t i = 0; i < k; ++i) cur[i] = i;
  while (true) {
    out.push_back(cur);
    index_t i = k - 1;
    while (i >= 0 && cur[i] == n - k + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (index_t j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

double smallest_singular_value(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().minCoeff();
}

Matrix leave_one_out_krp(const std::vector<Matrix>& factors, index_t skip) {
  Matrix out;
  for (index_t m = static_cast<index_t>(factors.size()) - 1; m >= 0; --m) {
    if (m == skip) continue;
    out = out.size() == 0 ? factors[m] : khatri_rao(out, factors[m]);
  }
  return out;
}

}  // namespace

index_t k_rank(const Matrix& a, double tol) {
  if (a.size() == 0) throw std::invalid_argument("k_rank: empty matrix");
  const index_t f = a.cols();
  if (f > 20)
    throw std::invalid_argument(
        "k_rank: exhaustive subset check limited to 20 columns");
  Eigen::JacobiSVD<Matrix> svd(a);
  const double sigma_max = svd.singularValues()(0);
  if (sigma_max == 0.0) return 0;
  const double cutoff = tol * sigma_max;

  const index_t cap = std::min<index_t>(f, a.rows());
  index_t k = 0;
  for (index_t size = 1; size <= cap; ++size) {
    bool all_independent = true;
    for (const auto& cols : subsets(f, size)) {
      Matrix sub(a.rows(), size);
      for (index_t j = 0; j < size; ++j) sub.col(j) = a.col(cols[j]);
      if (smallest_singular_value(sub) <= cutoff) {
        all_independent = false;
        break;
      }
    }
    if (!all_independent) break;
    k = size;
  }
  return k;
}

CompoundMatrix compound_matrix(const Matrix& a, index_t k) {
  if (k < 1 || k > std::min(a.rows(), a.cols()))
    throw std::invalid_argument("compound_matrix: order out of range");
  CompoundMatrix out;
  out.source_rows = a.rows();
  out.source_cols = a.cols();
  out.order = k;
  const auto row_sets = subsets(a.rows(), k);
  const auto col_sets = subsets(a.cols(), k);
  out.minors.resize(static_cast<index_t>(row_sets.size()),
                    static_cast<index_t>(col_sets.size()));
  Matrix sub(k, k);
  for (size_t r = 0; r < row_sets.size(); ++r)
    for (size_t c = 0; c < col_sets.size(); ++c) {
      for (index_t i = 0; i < k; ++i)
        for (index_t j = 0; j < k; ++j)
          sub(i, j) = a(row_sets[r][i], col_sets[c][j]);
      out.minors(static_cast<index_t>(r), static_cast<index_t>(c)) =
          sub.determinant();
    }
  return out;
}

UniquenessVerdict check_kruskal(const KruskalModel& m) {
  std::vector<index_t> kranks;
  kranks.reserve(m.factors.size());
  for (const auto& a : m.factors) kranks.push_back(k_rank(a));

  UniquenessVerdict v = check_kruskal(m.shape(), kranks, m.rank());
  if (v.verdict != Verdict::necessary_condition_violated && m.rank() > 1) {
    // Remark 1 necessity: every leave-one-mode-out Khatri-Rao product must
    // have full column rank.
    for (index_t mode = 0; mode < m.order(); ++mode) {
      const Matrix krp = leave_one_out_krp(m.factors, mode);
      if (numerical_rank(krp) < m.rank()) {
        v.verdict = Verdict::necessary_condition_violated;
        v.condition = "necessary: leave-one-out Khatri-Rao rank deficient";
        return v;
      }
    }
  }
  return v;
}

UniquenessVerdict check_kruskal(const std::vector<index_t>& dims,
                                const std::vector<index_t>& k_ranks,
                                index_t rank) {
  if (rank < 1) throw std::invalid_argument("check_kruskal: rank >= 1");
  if (dims.size() != k_ranks.size())
    throw std::invalid_argument("check_kruskal: dims/k-ranks mismatch");
  const index_t n = static_cast<index_t>(dims.size());

  UniquenessVerdict v;
  v.rank = rank;
  v.k_ranks = k_ranks;
  if (rank == 1) {
    v.verdict = Verdict::unique;
    v.condition = "rank-1: scaling ambiguity only";
    return v;
  }
  index_t min_k = k_ranks[0], sum_k = 0;
  for (index_t k : k_ranks) {
    min_k = std::min(min_k, k);
    sum_k += k;
  }
  v.bound_value = static_cast<double>(sum_k);
  v.bound_required = static_cast<double>(2 * rank + n - 1);
  if (min_k < 2) {
    v.verdict = Verdict::necessary_condition_violated;
    v.condition = "necessary: every k-rank must be >= 2 when F > 1";
    return v;
  }
  if (sum_k >= 2 * rank + n - 1) {
    v.verdict = Verdict::unique;
    v.condition = n == 3 ? "kruskal: k_A + k_B + k_C >= 2F + 2"
                         : "kruskal (N-way): sum k-ranks >= 2F + N - 1";
    return v;
  }
  v.verdict = Verdict::inconclusive;
  v.condition = "kruskal sum below bound";
  return v;
}

UniquenessVerdict check_one_mode_full_rank(const KruskalModel& m) {
  if (m.order() != 3)
    throw std::invalid_argument(
        "check_one_mode_full_rank: third-order model required");
  const index_t f = m.rank();
  UniquenessVerdict v;
  v.rank = f;
  for (const auto& a : m.factors) {
    v.k_ranks.push_back(k_rank(a));
    v.ranks.push_back(numerical_rank(a));
  }

  if (f > 1) {
    index_t min_k = *std::min_element(v.k_ranks.begin(), v.k_ranks.end());
    if (min_k < 2) {
      v.verdict = Verdict::necessary_condition_violated;
      v.condition = "necessary: every k-rank must be >= 2 when F > 1";
      return v;
    }
  }

  // compound-matrix route: r_C = F and M2(B) (kr) M2(A) full column rank
  if (f >= 2) {
    for (index_t c = 0; c < 3; ++c) {
      if (v.ranks[c] != f) continue;
      const index_t a = (c + 1) % 3, b = (c + 2) % 3;
      if (m.factors[a].rows() < 2 || m.factors[b].rows() < 2) continue;
      const Matrix m2a = compound_matrix(m.factors[a], 2).minors;
      const Matrix m2b = compound_matrix(m.factors[b], 2).minors;
      const Matrix krp = khatri_rao(m2b, m2a);
      const index_t needed = binomial(f, 2);
      if (krp.cols() == needed && numerical_rank(krp) == needed) {
        v.verdict = Verdict::unique;
        v.condition =
            "one full-column-rank mode and full-rank second compound "
            "Khatri-Rao";
        return v;
      }
    }
  }

  // full-rank pair route (role symmetric)
  for (index_t c = 0; c < 3; ++c) {
    const index_t a = (c + 1) % 3, b = (c + 2) % 3;
    if (v.ranks[a] == f && v.ranks[b] == f && (f == 1 || v.k_ranks[c] >= 2)) {
      v.verdict = Verdict::unique;
      v.condition = "two full-column-rank modes and k >= 2 in the third";
      return v;
    }
  }

  v.verdict = Verdict::inconclusive;
  v.condition = "no sufficient condition applied";
  return v;
}

index_t generic_rank(const std::vector<index_t>& dims) {
  const index_t n = static_cast<index_t>(dims.size());
  index_t total = 1, sum = 0;
  for (index_t d : dims) {
    total *= d;
    sum += d;
  }
  index_t expected =
      (total + (sum - n + 1) - 1) / (sum - n + 1);  // ceil division

  std::vector<index_t> sorted = dims;
  std::sort(sorted.begin(), sorted.end(), std::greater<index_t>());

  // defective cases where the expected generic rank is one higher
  bool defective = false;
  // (i) unbalanced: largest dimension exceeds the product-minus-sum bound
  index_t prod_rest = 1, sum_rest = 0;
  for (size_t i = 1; i < sorted.size(); ++i) {
    prod_rest *= sorted[i];
    sum_rest += sorted[i] - 1;
  }
  if (n >= 3 && sorted[0] > prod_rest - sum_rest) defective = true;
  // (ii) 4x4x3, (iii) (2p+1, 2p+1, 3), (iv) (p, p, 2, 2)
  if (n == 3) {
    if (sorted[0] == 4 && sorted[1] == 4 && sorted[2] == 3) defective = true;
    if (sorted[0] == sorted[1] && sorted[0] % 2 == 1 && sorted[0] >= 3 &&
        sorted[2] == 3)
      defective = true;
  }
  if (n == 4 && sorted[0] == sorted[1] && sorted[2] == 2 && sorted[3] == 2)
    defective = true;

  return defective ? expected + 1 : expected;
}

namespace {

bool is_known_generic_exception(const std::vector<index_t>& dims,
                                index_t rank) {
  std::vector<index_t> s = dims;
  std::sort(s.begin(), s.end(), std::greater<index_t>());
  const index_t n = static_cast<index_t>(s.size());
  if (n == 3 && s[0] == 4 && s[1] == 4 && s[2] == 3 && rank == 5) return true;
  if (n == 3 && s[0] == 4 && s[1] == 4 && s[2] == 4 && rank == 6) return true;
  if (n == 3 && s[0] == 6 && s[1] == 6 && s[2] == 3 && rank == 8) return true;
  if (n == 4 && s[0] == s[1] && s[2] == 2 && s[3] == 2 &&
      rank == 2 * s[0] - 1)
    return true;
  if (n == 5 && s[0] == 2 && s[1] == 2 && s[2] == 2 && s[3] == 2 &&
      s[4] == 2 && rank == 5)
    return true;
  // unbalanced: I_1 > alpha and F >= alpha
  index_t alpha = 1;
  for (index_t i = 1; i < n; ++i) alpha *= s[i];
  for (index_t i = 1; i < n; ++i) alpha -= (s[i] - 1);
  if (n >= 3 && s[0] > alpha && rank >= alpha) return true;
  return false;
}

}  // namespace

UniquenessVerdict check_generic(const std::vector<index_t>& dims,
                                index_t rank) {
  if (dims.size() < 3)
    throw std::invalid_argument("check_generic: need order >= 3");
  if (rank < 1) throw std::invalid_argument("check_generic: rank >= 1");

  UniquenessVerdict v;
  v.rank = rank;
  v.generic_rank = generic_rank(dims);
  v.known_exception = is_known_generic_exception(dims, rank);

  if (rank == 1) {
    v.verdict = Verdict::unique;
    v.condition = "rank-1: scaling ambiguity only";
    return v;
  }

  if (dims.size() == 3) {
    // role-symmetric framing: K is the largest mode
    std::vector<index_t> s = dims;
    std::sort(s.begin(), s.end());
    const index_t i_dim = s[1], j_dim = s[0], k_dim = s[2];
    if (k_dim >= rank && std::min(i_dim, j_dim) >= 3) {
      // necessary and sufficient in this regime
      if ((i_dim - 1) * (j_dim - 1) >= rank) {
        v.verdict = Verdict::unique;
        v.condition = "generic: (I-1)(J-1) >= F with K >= F";
      } else {
        v.verdict = Verdict::necessary_condition_violated;
        v.condition = "generic: (I-1)(J-1) < F with K >= F (not unique a.s.)";
      }
      v.bound_value = static_cast<double>((i_dim - 1) * (j_dim - 1));
      v.bound_required = static_cast<double>(rank);
      return v;
    }
    if (k_dim >= rank &&
        i_dim * (i_dim - 1) * j_dim * (j_dim - 1) >=
            2 * rank * (rank - 1)) {
      v.verdict = Verdict::unique;
      v.condition = "generic: I(I-1)J(J-1) >= 2F(F-1) with K >= F";
      return v;
    }
  }

  if (v.known_exception) {
    v.verdict = Verdict::necessary_condition_violated;
    v.condition = "generic: listed exception to generic uniqueness";
    v.note = "verified non-unique case from the known exception list";
    return v;
  }

  // generic Kruskal: sum of min(I_n, F) k-ranks
  index_t sum = 0;
  for (index_t d : dims) sum += std::min(d, rank);
  const index_t n = static_cast<index_t>(dims.size());
  if (sum >= 2 * rank + n - 1) {
    v.verdict = Verdict::unique;
    v.condition = "generic kruskal: sum min(I_n, F) >= 2F + N - 1";
    return v;
  }

  if (rank < *v.generic_rank) {
    v.verdict = Verdict::unique;
    v.condition = "generic: below the generic rank, no listed exception";
    v.note = "exception list verified for tensors up to 15000 entries";
    return v;
  }

  v.verdict = Verdict::inconclusive;
  v.condition = "generic: at or above the generic rank";
  return v;
}

RankBounds rank_bounds(const std::vector<index_t>& dims,
                       const std::vector<index_t>& multilinear_ranks) {
  if (dims.size() != multilinear_ranks.size())
    throw std::invalid_argument("rank_bounds: dimension mismatch");
  for (size_t m = 0; m < dims.size(); ++m)
    if (multilinear_ranks[m] < 1 || multilinear_ranks[m] > dims[m])
      throw std::invalid_argument("rank_bounds: R_n must lie in [1, I_n]");

  RankBounds out;
  index_t rank_total = 1, dim_total = 1;
  for (size_t m = 0; m < dims.size(); ++m) {
    out.lower = std::max(out.lower, multilinear_ranks[m]);
    rank_total *= multilinear_ranks[m];
    dim_total *= dims[m];
  }
  out.upper = std::numeric_limits<index_t>::max();
  out.crude_upper = std::numeric_limits<index_t>::max();
  for (size_t m = 0; m < dims.size(); ++m) {
    out.upper = std::min(out.upper, rank_total / multilinear_ranks[m]);
    out.crude_upper = std::min(out.crude_upper, dim_total / dims[m]);
  }
  return out;
}

}  // namespace tenkit
