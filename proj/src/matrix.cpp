#include "reid/matrix.hpp"

#include <cmath>
#include <utility>

#include "reid/errors.hpp"

namespace reid {

Matrix::Matrix(int r, int c, double fill)
    : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {
  if (r < 0 || c < 0) {
    throw ConfigError("matrix dimensions must be non-negative");
  }
}

Matrix Matrix::from_values(int r, int c, std::vector<double> vals) {
  if (r < 0 || c < 0 ||
      vals.size() != static_cast<std::size_t>(r) * static_cast<std::size_t>(c)) {
    throw ConfigError("matrix value count does not match rows*cols");
  }
  for (double v : vals) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value in matrix input");
    }
  }
  Matrix m;
  m.rows = r;
  m.cols = c;
  m.values = std::move(vals);
  return m;
}

bool Matrix::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool same_shape(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols;
}

}  // namespace reid
