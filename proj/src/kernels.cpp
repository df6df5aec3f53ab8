#include "reid/kernels.hpp"

#include <cmath>

#include "reid/errors.hpp"

namespace reid::kernels {

namespace {
constexpr double kDistFloor = 1e-12;
constexpr std::int64_t kParallelCutoff = 4096;  // skip thread spin-up for tiny ops
}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ConfigError("matmul: inner dimension mismatch");
  const int m = a.rows, k = a.cols, n = b.cols;
  Matrix c(m, n);
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(m) * n * k > kParallelCutoff)
  for (int i = 0; i < m; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int l = 0; l < k; ++l) {
      const double av = ai[l];
      const double* bl = b.row(l);
      for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw ConfigError("matmul_a_bt: inner dimension mismatch");
  const int m = a.rows, k = a.cols, n = b.rows;
  Matrix c(m, n);
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(m) * n * k > kParallelCutoff)
  for (int i = 0; i < m; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int j = 0; j < n; ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (int l = 0; l < k; ++l) s += ai[l] * bj[l];
      ci[j] = s;
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw ConfigError("matmul_at_b: inner dimension mismatch");
  const int m = a.rows, k = a.cols, n = b.cols;
  Matrix c(k, n);
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(m) * n * k > kParallelCutoff)
  for (int i = 0; i < k; ++i) {
    double* ci = c.row(i);
    for (int l = 0; l < m; ++l) {
      const double av = a(l, i);
      const double* bl = b.row(l);
      for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
  return c;
}

Matrix pairwise_distance(const Matrix& x, Metric metric) {
  const int n = x.rows, d = x.cols;
  if (n < 1) throw ConfigError("pairwise_distance: empty input");
  Matrix out(n, n);
  if (metric == Metric::kEuclidean) {
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(n) * n * d > kParallelCutoff)
    for (int i = 0; i < n; ++i) {
      const double* xi = x.row(i);
      for (int j = 0; j < n; ++j) {
        const double* xj = x.row(j);
        double d2 = 0.0;
        for (int k = 0; k < d; ++k) {
          double diff = xi[k] - xj[k];
          d2 += diff * diff;
        }
        out(i, j) = std::sqrt(std::max(d2, kDistFloor));
      }
    }
    return out;
  }
  // Cosine: normalize rows once, then 1 − dot.
  Matrix unit(n, d);
  for (int i = 0; i < n; ++i) {
    Vec row(x.row(i), x.row(i) + d);
    Vec u = l2_normalize(row);
    for (int k = 0; k < d; ++k) unit(i, k) = u[k];
  }
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(n) * n * d > kParallelCutoff)
  for (int i = 0; i < n; ++i) {
    const double* ui = unit.row(i);
    for (int j = 0; j < n; ++j) {
      const double* uj = unit.row(j);
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += ui[k] * uj[k];
      out(i, j) = 1.0 - s;
    }
  }
  return out;
}

Matrix row_softmax(const Matrix& logits) {
  if (logits.cols < 1) throw ConfigError("row_softmax: empty rows");
  Matrix out(logits.rows, logits.cols);
#pragma omp parallel for schedule(static) if (logits.size() > kParallelCutoff)
  for (int i = 0; i < logits.rows; ++i) {
    detail::softmax_span(logits.row(i), logits.cols, out.row(i));
  }
  return out;
}

Matrix tanh_map(const Matrix& x) {
  Matrix out(x.rows, x.cols);
#pragma omp parallel for schedule(static) if (x.size() > kParallelCutoff)
  for (std::int64_t i = 0; i < x.size(); ++i) {
    out.values[i] = std::tanh(x.values[i]);
  }
  return out;
}

void add_row_bias(Matrix& x, const Vec& bias) {
  if (static_cast<int>(bias.size()) != x.cols) {
    throw ConfigError("add_row_bias: bias length mismatch");
  }
  for (int i = 0; i < x.rows; ++i) {
    double* xi = x.row(i);
    for (int j = 0; j < x.cols; ++j) xi[j] += bias[j];
  }
}

}  // namespace reid::kernels
