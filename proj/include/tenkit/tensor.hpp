#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace tenkit {

using index_t = std::ptrdiff_t;

/// N-way dense array of doubles, column-major (first index fastest).
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<index_t> shape);
  DenseTensor(std::vector<index_t> shape, std::vector<double> data);

  index_t order() const { return static_cast<index_t>(shape_.size()); }
  const std::vector<index_t>& shape() const { return shape_; }
  index_t extent(index_t mode) const { return shape_[mode]; }
  index_t size() const { return static_cast<index_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](index_t linear) { return data_[linear]; }
  double operator[](index_t linear) const { return data_[linear]; }

  index_t linear_index(std::span<const index_t> idx) const;
  double at(std::span<const index_t> idx) const;
  double& at(std::span<const index_t> idx);
  double at(std::initializer_list<index_t> idx) const;
  double& at(std::initializer_list<index_t> idx);

  double norm_sq() const;

 private:
  std::vector<index_t> shape_;
  std::vector<double> data_;
};

/// COO sparse tensor. Entries are canonicalized on construction: indices
/// sorted lexicographically (mode 0 fastest-varying key last) and
/// duplicates summed.
class SparseTensor {
 public:
  SparseTensor() = default;
  explicit SparseTensor(std::vector<index_t> shape);
  // indices holds nnz * order() values, entry e at [e*order(), (e+1)*order()).
  SparseTensor(std::vector<index_t> shape, std::vector<index_t> indices,
               std::vector<double> values);

  index_t order() const { return static_cast<index_t>(shape_.size()); }
  const std::vector<index_t>& shape() const { return shape_; }
  index_t extent(index_t mode) const { return shape_[mode]; }
  index_t nnz() const { return static_cast<index_t>(values_.size()); }
  bool duplicates_merged() const { return duplicates_merged_; }

  std::span<const index_t> index(index_t entry) const {
    return {indices_.data() + entry * order(), static_cast<size_t>(order())};
  }
  double value(index_t entry) const { return values_[entry]; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<index_t>& indices() const { return indices_; }

  double norm_sq() const;
  DenseTensor densify() const;

 private:
  void canonicalize();

  std::vector<index_t> shape_;
  std::vector<index_t> indices_;
  std::vector<double> values_;
  bool duplicates_merged_ = false;
};

}  // namespace tenkit
