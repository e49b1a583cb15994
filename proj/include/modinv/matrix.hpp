#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "modinv/error.hpp"

namespace modinv {

// Dense row-major matrix of doubles. All network activations, parameters
// and gradients live in this type; file formats downconvert to f32 at the
// serialization boundary.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(size_t rows, size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}
  DenseMatrix(size_t rows, size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_)
      throw_error(ErrorKind::shape, "DenseMatrix: values length " +
                                        std::to_string(values_.size()) +
                                        " != " + std::to_string(rows_) + "x" +
                                        std::to_string(cols_));
  }

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& at(size_t r, size_t c) { return values_[r * cols_ + c]; }
  double at(size_t r, size_t c) const { return values_[r * cols_ + c]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  std::span<double> row(size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  void fill(double v) { values_.assign(values_.size(), v); }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const DenseMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  bool operator==(const DenseMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ &&
           values_ == other.values_;
  }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> values_;
};

inline void require_same_shape(const DenseMatrix& a, const DenseMatrix& b,
                               const char* where) {
  if (!a.same_shape(b))
    throw_error(ErrorKind::shape, std::string(where) + ": shape mismatch " +
                                      a.shape_str() + " vs " + b.shape_str());
}

}  // namespace modinv
