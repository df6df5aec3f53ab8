#pragma once

#include <vector>

#include "reid/matrix.hpp"

namespace reid {

using Vec = std::vector<double>;

enum class Metric { kEuclidean, kCosine };
enum class Mode { kTrain, kInfer };

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& v);

// Unit-norm copy of v; vectors with norm below 1e-12 map to the zero vector.
Vec l2_normalize(const Vec& v);
Vec l2_normalize_backward(const Vec& v, const Vec& grad_out);

Vec softmax(const Vec& v);
// y is the softmax output of the forward call.
Vec softmax_backward(const Vec& y, const Vec& grad_y);

// y is the tanh output of the forward call.
Matrix tanh_backward(const Matrix& y, const Matrix& grad_y);

// Gradient of pairwise_distance (either metric) with respect to the input
// rows, given the gradient of the loss with respect to every distance entry.
Matrix pairwise_distance_backward(const Matrix& x, Metric metric,
                                  const Matrix& grad_d);

namespace detail {
// Shared serial softmax-with-max-subtraction over a contiguous span; both the
// vector op and the batched row kernel go through here so they agree bitwise.
void softmax_span(const double* x, int n, double* out);
}  // namespace detail

struct BatchNormState {
  Vec gamma, beta;
  Vec running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormState identity(int d);
};

struct BatchNormResult {
  Matrix y;
  Matrix x_hat;
  Vec batch_mean, batch_var;
  Vec new_running_mean, new_running_var;
};

// Train mode standardizes by batch statistics (biased variance) and proposes
// updated running stats; committing them is the caller's decision. Requires
// at least two rows.
BatchNormResult batch_norm_train(const Matrix& x, const BatchNormState& s);
Matrix batch_norm_infer(const Matrix& x, const BatchNormState& s);

struct BatchNormGrads {
  Matrix dx;
  Vec dgamma, dbeta;
};

BatchNormGrads batch_norm_train_backward(const Matrix& grad_y,
                                         const BatchNormResult& fwd,
                                         const BatchNormState& s);

}  // namespace reid
