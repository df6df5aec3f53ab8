// Times the OpenMP kernels against the serial reference implementations and
// checks that the outputs stay bit-identical while doing so.
#include <chrono>
#include <cstdio>
#include <string>

#include "reid/kernels.hpp"
#include "reid/kernels_ref.hpp"
#include "reid/random.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using reid::Matrix;
using reid::Metric;

Matrix random_matrix(int rows, int cols, reid::RandomStream& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values) v = rng.next_normal();
  return m;
}

template <typename F>
double time_ms(F&& fn, int reps) {
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.values == b.values;
}

void report(const std::string& name, double serial_ms, double parallel_ms,
            bool identical) {
  std::printf("%-28s serial %8.3f ms   openmp %8.3f ms   speedup %5.2fx   %s\n",
              name.c_str(), serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without openmp; both columns run serial code\n");
#endif

  reid::RandomStream rng(20240817);

  {
    Matrix a = random_matrix(256, 192, rng);
    Matrix b = random_matrix(192, 256, rng);
    Matrix serial_out, parallel_out;
    double s = time_ms([&] { serial_out = reid::ref::matmul(a, b); }, 10);
    double p = time_ms([&] { parallel_out = reid::kernels::matmul(a, b); }, 10);
    report("matmul 256x192x256", s, p, bit_equal(serial_out, parallel_out));
  }
  {
    Matrix a = random_matrix(256, 192, rng);
    Matrix b = random_matrix(256, 192, rng);
    Matrix serial_out, parallel_out;
    double s = time_ms([&] { serial_out = reid::ref::matmul_a_bt(a, b); }, 10);
    double p = time_ms([&] { parallel_out = reid::kernels::matmul_a_bt(a, b); }, 10);
    report("matmul_a_bt 256x192x256", s, p, bit_equal(serial_out, parallel_out));
  }
  {
    Matrix x = random_matrix(512, 64, rng);
    Matrix serial_out, parallel_out;
    double s = time_ms([&] { serial_out = reid::ref::pairwise_distance(x, Metric::kEuclidean); }, 10);
    double p = time_ms([&] { parallel_out = reid::kernels::pairwise_distance(x, Metric::kEuclidean); }, 10);
    report("pairwise euclidean 512x64", s, p, bit_equal(serial_out, parallel_out));
  }
  {
    Matrix x = random_matrix(512, 64, rng);
    Matrix serial_out, parallel_out;
    double s = time_ms([&] { serial_out = reid::ref::pairwise_distance(x, Metric::kCosine); }, 10);
    double p = time_ms([&] { parallel_out = reid::kernels::pairwise_distance(x, Metric::kCosine); }, 10);
    report("pairwise cosine 512x64", s, p, bit_equal(serial_out, parallel_out));
  }
  {
    Matrix x = random_matrix(4096, 32, rng);
    Matrix serial_out, parallel_out;
    double s = time_ms([&] { serial_out = reid::ref::row_softmax(x); }, 20);
    double p = time_ms([&] { parallel_out = reid::kernels::row_softmax(x); }, 20);
    report("row_softmax 4096x32", s, p, bit_equal(serial_out, parallel_out));
  }
  return 0;
}
