#pragma once

#include "reid/matrix.hpp"
#include "reid/numerics.hpp"

// Plain serial implementations of the parallel kernels. Kept for tests
// (bitwise comparison against reid::kernels) and for the benchmark target;
// production code never calls these.
namespace reid::ref {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
Matrix pairwise_distance(const Matrix& x, Metric metric);
Matrix row_softmax(const Matrix& logits);

}  // namespace reid::ref
