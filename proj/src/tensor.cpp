#include "tenkit/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "tenkit/kernels.hpp"

namespace tenkit {
namespace {

index_t checked_total(const std::vector<index_t>& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor: order must be >= 1");
  index_t total = 1;
  for (index_t s : shape) {
    if (s < 1) throw std::invalid_argument("tensor: mode sizes must be >= 1");
    total *= s;
  }
  return total;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<index_t> shape)
    : shape_(std::move(shape)), data_(checked_total(shape_), 0.0) {}

DenseTensor::DenseTensor(std::vector<index_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_total(shape_) != static_cast<index_t>(data_.size()))
    throw std::invalid_argument("tensor: data length does not match shape");
}

index_t DenseTensor::linear_index(std::span<const index_t> idx) const {
  index_t lin = 0, stride = 1;
  for (size_t m = 0; m < shape_.size(); ++m) {
    lin += idx[m] * stride;
    stride *= shape_[m];
  }
  return lin;
}

double DenseTensor::at(std::span<const index_t> idx) const {
  return data_[linear_index(idx)];
}

double& DenseTensor::at(std::span<const index_t> idx) {
  return data_[linear_index(idx)];
}

double DenseTensor::at(std::initializer_list<index_t> idx) const {
  return at(std::span<const index_t>(idx.begin(), idx.size()));
}

double& DenseTensor::at(std::initializer_list<index_t> idx) {
  return at(std::span<const index_t>(idx.begin(), idx.size()));
}

double DenseTensor::norm_sq() const {
  return kernels::active().sumsq(data_.data(), data_.size());
}

SparseTensor::SparseTensor(std::vector<index_t> shape)
    : shape_(std::move(shape)) {
  checked_total(shape_);
}

SparseTensor::SparseTensor(std::vector<index_t> shape,
                           std::vector<index_t> indices,
                           std::vector<double> values)
    : shape_(std::move(shape)),
      indices_(std::move(indices)),
      values_(std::move(values)) {
  const index_t total = checked_total(shape_);
  const index_t n = order();
  if (indices_.size() != values_.size() * n)
    throw std::invalid_argument("sparse tensor: index/value length mismatch");
  for (size_t e = 0; e < values_.size(); ++e)
    for (index_t m = 0; m < n; ++m) {
      index_t i = indices_[e * n + m];
      if (i < 0 || i >= shape_[m])
        throw std::out_of_range("sparse tensor: index out of bounds");
    }
  canonicalize();
  if (nnz() > total)
    throw std::invalid_argument("sparse tensor: more entries than elements");
}

void SparseTensor::canonicalize() {
  const index_t n = order();
  const index_t count = nnz();
  if (count == 0) return;

  std::vector<index_t> perm(count);
  std::iota(perm.begin(), perm.end(), index_t{0});
  auto less = [&](index_t a, index_t b) {
    for (index_t m = n - 1; m >= 0; --m) {
      index_t ia = indices_[a * n + m], ib = indices_[b * n + m];
      if (ia != ib) return ia < ib;
    }
    return false;
  };
  std::sort(perm.begin(), perm.end(), less);

  std::vector<index_t> new_idx;
  std::vector<double> new_val;
  new_idx.reserve(indices_.size());
  new_val.reserve(values_.size());
  for (index_t p : perm) {
    bool same = !new_val.empty();
    if (same) {
      const index_t last = static_cast<index_t>(new_val.size()) - 1;
      for (index_t m = 0; m < n; ++m)
        if (new_idx[last * n + m] != indices_[p * n + m]) {
          same = false;
          break;
        }
    }
    if (same) {
      new_val.back() += values_[p];
      duplicates_merged_ = true;
    } else {
      for (index_t m = 0; m < n; ++m) new_idx.push_back(indices_[p * n + m]);
      new_val.push_back(values_[p]);
    }
  }
  indices_ = std::move(new_idx);
  values_ = std::move(new_val);
}

double SparseTensor::norm_sq() const {
  return kernels::active().sumsq(values_.data(), values_.size());
}

DenseTensor SparseTensor::densify() const {
  DenseTensor out(shape_);
  const index_t n = order();
  for (index_t e = 0; e < nnz(); ++e) {
    index_t lin = 0, stride = 1;
    for (index_t m = 0; m < n; ++m) {
      lin += indices_[e * n + m] * stride;
      stride *= shape_[m];
    }
    out[lin] += values_[e];
  }
  return out;
}

}  // namespace tenkit
