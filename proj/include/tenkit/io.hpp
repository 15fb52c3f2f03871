#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "tenkit/tensor.hpp"

namespace tenkit {

/// Tensor file format:
///   line 1: "TKT1 <dense|coo> <text|binary>"
///   line 2: N
///   line 3: I_1 ... I_N
///   coo:    line 4 holds NNZ, then NNZ lines "i_1 ... i_N value"
///           with 1-BASED indices
///   dense:  text payload is whitespace-separated column-major values
///           written with 17 significant digits; binary payload is raw
///           little-endian 64-bit floats following the header
/// Duplicate COO entries are summed on load (with a warning).
struct TensorReadResult {
  std::variant<DenseTensor, SparseTensor> tensor;
  std::vector<std::string> warnings;

  bool is_dense() const {
    return std::holds_alternative<DenseTensor>(tensor);
  }
  const DenseTensor& dense() const { return std::get<DenseTensor>(tensor); }
  const SparseTensor& sparse() const {
    return std::get<SparseTensor>(tensor);
  }
  DenseTensor densified() const {
    return is_dense() ? dense() : sparse().densify();
  }
};

TensorReadResult read_tensor(const std::string& path);
TensorReadResult read_tensor(std::istream& in);

void write_tensor(const std::string& path, const DenseTensor& t,
                  bool binary = false);
void write_tensor(std::ostream& out, const DenseTensor& t,
                  bool binary = false);
void write_tensor(const std::string& path, const SparseTensor& t);
void write_tensor(std::ostream& out, const SparseTensor& t);

}  // namespace tenkit
