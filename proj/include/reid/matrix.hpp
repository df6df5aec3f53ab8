#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace reid {

// Dense row-major matrix of 64-bit floats. The whole engine runs in double
// precision so finite-difference gradient checks are meaningful.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // rows * cols, row-major

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);

  // Validating constructor for external inputs: size must match and every
  // entry must be finite.
  static Matrix from_values(int r, int c, std::vector<double> vals);

  double& operator()(int i, int j) {
    return values[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    return values[static_cast<std::size_t>(i) * cols + j];
  }
  double* row(int i) { return values.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const {
    return values.data() + static_cast<std::size_t>(i) * cols;
  }

  bool empty() const { return values.empty(); }
  std::int64_t size() const { return static_cast<std::int64_t>(rows) * cols; }
  bool all_finite() const;
};

bool same_shape(const Matrix& a, const Matrix& b);

}  // namespace reid
