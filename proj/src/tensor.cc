#include "prfrl/tensor.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "binary_io.h"
#include "prfrl/error.h"

namespace prfrl {

Matrix Matrix::row_vector(std::span<const double> values) {
  Matrix m(1, values.size());
  std::copy(values.begin(), values.end(), m.data_.begin());
  return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Matrix::resize(std::size_t rows, std::size_t cols) {
  rows_ = rows;
  cols_ = cols;
  data_.assign(rows * cols, 0.0);
}

Matrix& GradStore::at(const std::string& name, std::size_t rows,
                      std::size_t cols) {
  auto it = grads_.find(name);
  if (it == grads_.end()) {
    it = grads_.emplace(name, Matrix(rows, cols)).first;
  } else if (it->second.rows() != rows || it->second.cols() != cols) {
    throw InvalidArgument("gradient shape mismatch for " + name);
  }
  return it->second;
}

const Matrix* GradStore::find(const std::string& name) const {
  auto it = grads_.find(name);
  return it == grads_.end() ? nullptr : &it->second;
}

void GradStore::scale(double factor) {
  for (auto& [name, g] : grads_) {
    for (double& v : g.values()) v *= factor;
  }
}

void GradStore::add(const GradStore& other, double factor) {
  for (const auto& [name, g] : other.grads_) {
    Matrix& dst = at(name, g.rows(), g.cols());
    auto d = dst.values();
    auto s = g.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * s[i];
  }
}

bool GradStore::all_finite() const {
  for (const auto& [name, g] : grads_) {
    for (double v : g.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

Matrix& ParameterStore::add(const std::string& name, std::size_t rows,
                            std::size_t cols) {
  auto [it, inserted] = tensors.emplace(name, Matrix(rows, cols));
  if (!inserted) throw InvalidArgument("duplicate parameter name: " + name);
  return it->second;
}

Matrix& ParameterStore::get(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InvalidArgument("unknown parameter: " + name);
  return it->second;
}

const Matrix& ParameterStore::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InvalidArgument("unknown parameter: " + name);
  return it->second;
}

bool ParameterStore::all_finite() const {
  for (const auto& [name, t] : tensors) {
    for (double v : t.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

namespace {
constexpr char kCheckpointMagic[8] = {'P', 'R', 'F', 'R', 'L', 'C', 'K', 'P'};
}  // namespace

void save_checkpoint(const ParameterStore& params,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  io::BinaryWriter w(out);
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u64(params.seed);
  w.u64(params.step);
  w.u64(params.metadata.size());
  for (const auto& [key, value] : params.metadata) {
    w.str(key);
    w.str(value);
  }
  w.u64(params.tensors.size());
  for (const auto& [name, t] : params.tensors) {
    w.str(name);
    w.u64(t.rows());
    w.u64(t.cols());
    for (double v : t.values()) w.u64(std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  io::BinaryReader r(in, path.string());
  char magic[sizeof(kCheckpointMagic)];
  r.bytes(magic, sizeof(magic));
  if (!std::equal(magic, magic + sizeof(magic), kCheckpointMagic)) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  ParameterStore params;
  params.seed = r.u64();
  params.step = r.u64();
  const std::uint64_t n_meta = r.u64();
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    std::string key = r.str();
    params.metadata[key] = r.str();
  }
  const std::uint64_t n_tensors = r.u64();
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    const std::string name = r.str();
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    Matrix& t = params.add(name, rows, cols);
    for (double& v : t.values()) v = std::bit_cast<double>(r.u64());
  }
  return params;
}

}  // namespace prfrl
