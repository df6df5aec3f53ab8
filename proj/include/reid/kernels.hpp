#pragma once

#include "reid/matrix.hpp"
#include "reid/numerics.hpp"

// OpenMP-parallel kernels for the dense inner loops. Every kernel
// parallelizes only over independent output elements and keeps each inner
// reduction serial, so results are bit-identical to the serial reference
// implementations in reid::ref regardless of thread count.
namespace reid::kernels {

Matrix matmul(const Matrix& a, const Matrix& b);       // a(m×k) · b(k×n)
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);  // a(m×k) · bᵀ, b(n×k)
Matrix matmul_at_b(const Matrix& a, const Matrix& b);  // aᵀ · b, a(m×k), b(m×n)

// Euclidean: D[i][j] = sqrt(max(||x_i − x_j||², 1e-12)).
// Cosine: D[i][j] = 1 − ⟨x̄_i, x̄_j⟩ on l2-normalized rows.
Matrix pairwise_distance(const Matrix& x, Metric metric);

Matrix row_softmax(const Matrix& logits);
Matrix tanh_map(const Matrix& x);
void add_row_bias(Matrix& x, const Vec& bias);

}  // namespace reid::kernels
