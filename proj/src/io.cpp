#include "tenkit/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tenkit {
namespace {

constexpr const char* kMagic = "TKT1";

[[noreturn]] void malformed(const std::string& why, index_t line = -1) {
  std::ostringstream msg;
  msg << "tensor file: " << why;
  if (line >= 0) msg << " (line " << line << ")";
  throw std::runtime_error(msg.str());
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

TensorReadResult read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("tensor file: cannot open " + path);
  return read_tensor(in);
}

TensorReadResult read_tensor(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) malformed("missing header", 1);
  std::istringstream hs(header);
  std::string magic, storage, payload;
  hs >> magic >> storage >> payload;
  if (magic != kMagic) malformed("bad magic string '" + magic + "'", 1);
  if (storage != "dense" && storage != "coo")
    malformed("unknown storage '" + storage + "'", 1);
  if (payload != "text" && payload != "binary")
    malformed("unknown payload '" + payload + "'", 1);
  if (storage == "coo" && payload == "binary")
    malformed("coo storage is text-only", 1);

  std::string line;
  if (!std::getline(in, line)) malformed("missing order", 2);
  index_t order = 0;
  {
    std::istringstream ls(line);
    if (!(ls >> order) || order < 1) malformed("bad order", 2);
  }
  if (!std::getline(in, line)) malformed("missing mode sizes", 3);
  std::vector<index_t> shape(order);
  {
    std::istringstream ls(line);
    for (index_t m = 0; m < order; ++m)
      if (!(ls >> shape[m]) || shape[m] < 1) malformed("bad mode size", 3);
  }
  index_t total = 1;
  for (index_t s : shape) total *= s;

  TensorReadResult result;
  if (storage == "dense") {
    std::vector<double> data(total);
    if (payload == "text") {
      for (index_t i = 0; i < total; ++i)
        if (!(in >> data[i])) malformed("dense payload too short");
    } else {
      in.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(sizeof(double) * total));
      if (in.gcount() !=
          static_cast<std::streamsize>(sizeof(double) * total))
        malformed("dense binary payload too short");
    }
    result.tensor = DenseTensor(shape, std::move(data));
    return result;
  }

  if (!std::getline(in, line)) malformed("missing nnz count", 4);
  index_t nnz = 0;
  {
    std::istringstream ls(line);
    if (!(ls >> nnz) || nnz < 0) malformed("bad nnz count", 4);
  }
  std::vector<index_t> indices;
  std::vector<double> values;
  indices.reserve(nnz * order);
  values.reserve(nnz);
  for (index_t e = 0; e < nnz; ++e) {
    const index_t line_no = 5 + e;
    if (!std::getline(in, line)) malformed("coo payload too short", line_no);
    std::istringstream ls(line);
    for (index_t m = 0; m < order; ++m) {
      index_t idx = 0;
      if (!(ls >> idx)) malformed("bad coo index", line_no);
      if (idx < 1 || idx > shape[m])
        malformed("coo index out of bounds", line_no);
      indices.push_back(idx - 1);  // file is 1-based
    }
    double v = 0.0;
    if (!(ls >> v)) malformed("bad coo value", line_no);
    values.push_back(v);
  }
  SparseTensor sparse(shape, std::move(indices), std::move(values));
  if (sparse.duplicates_merged())
    result.warnings.push_back("duplicate coo entries were summed");
  result.tensor = std::move(sparse);
  return result;
}

void write_tensor(const std::string& path, const DenseTensor& t,
                  bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("tensor file: cannot write " + path);
  write_tensor(out, t, binary);
}

void write_tensor(std::ostream& out, const DenseTensor& t, bool binary) {
  out << kMagic << " dense " << (binary ? "binary" : "text") << "\n";
  out << t.order() << "\n";
  for (index_t m = 0; m < t.order(); ++m)
    out << t.extent(m) << (m + 1 == t.order() ? "" : " ");
  out << "\n";
  if (binary) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * t.size()));
    return;
  }
  for (index_t i = 0; i < t.size(); ++i)
    out << format_value(t[i]) << ((i + 1) % 8 == 0 ? "\n" : " ");
  out << "\n";
}

void write_tensor(const std::string& path, const SparseTensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("tensor file: cannot write " + path);
  write_tensor(out, t);
}

void write_tensor(std::ostream& out, const SparseTensor& t) {
  out << kMagic << " coo text\n";
  out << t.order() << "\n";
  for (index_t m = 0; m < t.order(); ++m)
    out << t.extent(m) << (m + 1 == t.order() ? "" : " ");
  out << "\n" << t.nnz() << "\n";
  for (index_t e = 0; e < t.nnz(); ++e) {
    const auto idx = t.index(e);
    for (index_t m = 0; m < t.order(); ++m) out << idx[m] + 1 << " ";
    out << format_value(t.value(e)) << "\n";
  }
}

}  // namespace tenkit
