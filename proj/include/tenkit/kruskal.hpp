#pragma once

#include <vector>

#include "tenkit/linalg.hpp"
#include "tenkit/tensor.hpp"

namespace tenkit {

/// Per-mode factor matrices (I_n x F) plus nonnegative component weights.
struct KruskalModel {
  std::vector<Matrix> factors;
  Vector weights;

  KruskalModel() = default;
  KruskalModel(std::vector<Matrix> f, Vector w)
      : factors(std::move(f)), weights(std::move(w)) {
    validate();
  }
  // Unit weights.
  explicit KruskalModel(std::vector<Matrix> f);

  index_t order() const { return static_cast<index_t>(factors.size()); }
  index_t rank() const { return factors.empty() ? 0 : factors[0].cols(); }
  std::vector<index_t> shape() const;

  void validate() const;
};

}  // namespace tenkit
