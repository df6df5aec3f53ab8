#include "reid/kernels_ref.hpp"

#include <cmath>

#include "reid/errors.hpp"

namespace reid::ref {

namespace {
constexpr double kDistFloor = 1e-12;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ConfigError("matmul: inner dimension mismatch");
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw ConfigError("matmul_a_bt: inner dimension mismatch");
  Matrix c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw ConfigError("matmul_at_b: inner dimension mismatch");
  Matrix c(a.cols, b.cols);
  for (int i = 0; i < a.cols; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.rows; ++k) s += a(k, i) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix pairwise_distance(const Matrix& x, Metric metric) {
  const int n = x.rows, d = x.cols;
  if (n < 1) throw ConfigError("pairwise_distance: empty input");
  Matrix out(n, n);
  if (metric == Metric::kEuclidean) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double d2 = 0.0;
        for (int k = 0; k < d; ++k) {
          double diff = x(i, k) - x(j, k);
          d2 += diff * diff;
        }
        out(i, j) = std::sqrt(std::max(d2, kDistFloor));
      }
    }
    return out;
  }
  Matrix unit(n, d);
  for (int i = 0; i < n; ++i) {
    Vec row(x.row(i), x.row(i) + d);
    Vec u = l2_normalize(row);
    for (int k = 0; k < d; ++k) unit(i, k) = u[k];
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += unit(i, k) * unit(j, k);
      out(i, j) = 1.0 - s;
    }
  }
  return out;
}

Matrix row_softmax(const Matrix& logits) {
  if (logits.cols < 1) throw ConfigError("row_softmax: empty rows");
  Matrix out(logits.rows, logits.cols);
  for (int i = 0; i < logits.rows; ++i) {
    detail::softmax_span(logits.row(i), logits.cols, out.row(i));
  }
  return out;
}

}  // namespace reid::ref
