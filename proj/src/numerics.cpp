#include "reid/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "reid/errors.hpp"

namespace reid {

namespace {
constexpr double kNormFloor = 1e-12;
constexpr double kDistFloor = 1e-12;
}  // namespace

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ConfigError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

Vec l2_normalize(const Vec& v) {
  double n = norm2(v);
  Vec out(v.size(), 0.0);
  if (n < kNormFloor) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

Vec l2_normalize_backward(const Vec& v, const Vec& grad_out) {
  if (v.size() != grad_out.size()) {
    throw ConfigError("l2_normalize_backward: length mismatch");
  }
  double n = norm2(v);
  Vec grad(v.size(), 0.0);
  if (n < kNormFloor) return grad;  // forward is constant zero here
  double g_dot_u = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) g_dot_u += grad_out[i] * v[i] / n;
  for (std::size_t i = 0; i < v.size(); ++i) {
    grad[i] = (grad_out[i] - g_dot_u * v[i] / n) / n;
  }
  return grad;
}

namespace detail {
void softmax_span(const double* x, int n, double* out) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= sum;
}
}  // namespace detail

Vec softmax(const Vec& v) {
  if (v.empty()) throw ConfigError("softmax: empty input");
  Vec out(v.size());
  detail::softmax_span(v.data(), static_cast<int>(v.size()), out.data());
  return out;
}

Vec softmax_backward(const Vec& y, const Vec& grad_y) {
  if (y.size() != grad_y.size()) {
    throw ConfigError("softmax_backward: length mismatch");
  }
  double inner = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) inner += grad_y[i] * y[i];
  Vec grad(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) grad[i] = y[i] * (grad_y[i] - inner);
  return grad;
}

Matrix tanh_backward(const Matrix& y, const Matrix& grad_y) {
  if (!same_shape(y, grad_y)) throw ConfigError("tanh_backward: shape mismatch");
  Matrix grad(y.rows, y.cols);
  for (std::int64_t i = 0; i < y.size(); ++i) {
    grad.values[i] = grad_y.values[i] * (1.0 - y.values[i] * y.values[i]);
  }
  return grad;
}

Matrix pairwise_distance_backward(const Matrix& x, Metric metric,
                                  const Matrix& grad_d) {
  const int n = x.rows;
  const int d = x.cols;
  if (grad_d.rows != n || grad_d.cols != n) {
    throw ConfigError("pairwise_distance_backward: gradient shape mismatch");
  }
  Matrix grad(n, d);
  if (metric == Metric::kEuclidean) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        double g = grad_d(i, j);
        if (g == 0.0) continue;
        const double* xi = x.row(i);
        const double* xj = x.row(j);
        double d2 = 0.0;
        for (int k = 0; k < d; ++k) {
          double diff = xi[k] - xj[k];
          d2 += diff * diff;
        }
        if (d2 <= kDistFloor) continue;  // clamped region: flat
        double dist = std::sqrt(d2);
        for (int k = 0; k < d; ++k) {
          double t = g * (xi[k] - xj[k]) / dist;
          grad(i, k) += t;
          grad(j, k) -= t;
        }
      }
    }
    return grad;
  }

  // Cosine: D = 1 − x̄_i · x̄_j. Accumulate into normalized-space gradients
  // first, then project through the normalization of each row.
  std::vector<Vec> unit(n);
  for (int i = 0; i < n; ++i) {
    unit[i].assign(x.row(i), x.row(i) + d);
    unit[i] = l2_normalize(unit[i]);
  }
  Matrix grad_unit(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double g = grad_d(i, j);
      if (g == 0.0 || i == j) continue;
      for (int k = 0; k < d; ++k) {
        grad_unit(i, k) -= g * unit[j][k];
        grad_unit(j, k) -= g * unit[i][k];
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    Vec row(x.row(i), x.row(i) + d);
    Vec g(grad_unit.row(i), grad_unit.row(i) + d);
    Vec projected = l2_normalize_backward(row, g);
    for (int k = 0; k < d; ++k) grad(i, k) = projected[k];
  }
  return grad;
}

BatchNormState BatchNormState::identity(int d) {
  BatchNormState s;
  s.gamma.assign(d, 1.0);
  s.beta.assign(d, 0.0);
  s.running_mean.assign(d, 0.0);
  s.running_var.assign(d, 1.0);
  return s;
}

BatchNormResult batch_norm_train(const Matrix& x, const BatchNormState& s) {
  const int n = x.rows;
  const int d = x.cols;
  if (n < 2) {
    throw ConfigError("batch_norm train mode requires at least 2 rows");
  }
  if (static_cast<int>(s.gamma.size()) != d) {
    throw ConfigError("batch_norm: state dimension mismatch");
  }
  BatchNormResult r;
  r.y = Matrix(n, d);
  r.x_hat = Matrix(n, d);
  r.batch_mean.assign(d, 0.0);
  r.batch_var.assign(d, 0.0);
  r.new_running_mean = s.running_mean;
  r.new_running_var = s.running_var;
#pragma omp parallel for schedule(static) if (d > 8)
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += x(i, j);
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      double c = x(i, j) - mean;
      var += c * c;
    }
    var /= n;
    r.batch_mean[j] = mean;
    r.batch_var[j] = var;
    double inv = 1.0 / std::sqrt(var + s.eps);
    for (int i = 0; i < n; ++i) {
      double xh = (x(i, j) - mean) * inv;
      r.x_hat(i, j) = xh;
      r.y(i, j) = s.gamma[j] * xh + s.beta[j];
    }
    r.new_running_mean[j] = (1.0 - s.momentum) * s.running_mean[j] + s.momentum * mean;
    r.new_running_var[j] = (1.0 - s.momentum) * s.running_var[j] + s.momentum * var;
  }
  return r;
}

Matrix batch_norm_infer(const Matrix& x, const BatchNormState& s) {
  const int n = x.rows;
  const int d = x.cols;
  if (static_cast<int>(s.gamma.size()) != d) {
    throw ConfigError("batch_norm: state dimension mismatch");
  }
  Matrix y(n, d);
  for (int j = 0; j < d; ++j) {
    double inv = 1.0 / std::sqrt(s.running_var[j] + s.eps);
    for (int i = 0; i < n; ++i) {
      y(i, j) = s.gamma[j] * (x(i, j) - s.running_mean[j]) * inv + s.beta[j];
    }
  }
  return y;
}

BatchNormGrads batch_norm_train_backward(const Matrix& grad_y,
                                         const BatchNormResult& fwd,
                                         const BatchNormState& s) {
  const int n = fwd.y.rows;
  const int d = fwd.y.cols;
  if (!same_shape(grad_y, fwd.y)) {
    throw ConfigError("batch_norm_backward: gradient shape mismatch");
  }
  BatchNormGrads g;
  g.dx = Matrix(n, d);
  g.dgamma.assign(d, 0.0);
  g.dbeta.assign(d, 0.0);
#pragma omp parallel for schedule(static) if (d > 8)
  for (int j = 0; j < d; ++j) {
    double sum_gy = 0.0;
    double sum_gy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      sum_gy += grad_y(i, j);
      sum_gy_xhat += grad_y(i, j) * fwd.x_hat(i, j);
    }
    g.dgamma[j] = sum_gy_xhat;
    g.dbeta[j] = sum_gy;
    double inv = 1.0 / std::sqrt(fwd.batch_var[j] + s.eps);
    double scale = s.gamma[j] * inv;
    for (int i = 0; i < n; ++i) {
      g.dx(i, j) = scale * (grad_y(i, j) - sum_gy / n -
                            fwd.x_hat(i, j) * sum_gy_xhat / n);
    }
  }
  return g;
}

}  // namespace reid
