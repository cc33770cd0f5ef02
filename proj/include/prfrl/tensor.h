#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace prfrl {

// Row-major dense matrix of doubles. Vectors are 1 x n.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double value);
  void resize(std::size_t rows, std::size_t cols);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using Vector = std::vector<double>;

// Named gradient tensors; a name absent from the map has zero gradient.
class GradStore {
 public:
  // Returns the gradient buffer for `name`, zero-initialised with the given
  // shape on first access. Throws when a later access asks for another shape.
  Matrix& at(const std::string& name, std::size_t rows, std::size_t cols);
  const Matrix* find(const std::string& name) const;
  bool contains(const std::string& name) const { return grads_.count(name) > 0; }

  void scale(double factor);
  void add(const GradStore& other, double factor = 1.0);
  void clear() { grads_.clear(); }
  bool all_finite() const;

  const std::map<std::string, Matrix>& tensors() const { return grads_; }
  std::map<std::string, Matrix>& tensors() { return grads_; }

 private:
  std::map<std::string, Matrix> grads_;
};

// Named trainable tensors plus the bookkeeping a checkpoint carries.
struct ParameterStore {
  std::map<std::string, Matrix> tensors;
  // Free-form string metadata (configuration, vocabulary).
  std::map<std::string, std::string> metadata;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;

  Matrix& add(const std::string& name, std::size_t rows, std::size_t cols);
  Matrix& get(const std::string& name);
  const Matrix& get(const std::string& name) const;
  bool contains(const std::string& name) const {
    return tensors.count(name) > 0;
  }
  bool all_finite() const;

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;
};

// Binary checkpoint: magic, format version, seed, step, metadata, tensors.
// Doubles are stored as their raw IEEE-754 bits so a round trip is exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterStore& params,
                     const std::filesystem::path& path);
ParameterStore load_checkpoint(const std::filesystem::path& path);

}  // namespace prfrl
