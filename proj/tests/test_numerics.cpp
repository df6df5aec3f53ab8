#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "reid/errors.hpp"
#include "reid/kernels.hpp"
#include "reid/kernels_ref.hpp"
#include "reid/matrix.hpp"
#include "reid/numerics.hpp"
#include "reid/random.hpp"

using namespace reid;

TEST_CASE("matrix validates inputs") {
  CHECK_THROWS_AS(Matrix::from_values(2, 2, {1.0, 2.0, 3.0}), ConfigError);
  CHECK_THROWS_AS(Matrix::from_values(1, 2, {1.0, std::nan("")}), NumericError);
  CHECK_THROWS_AS(Matrix::from_values(1, 2, {1.0, INFINITY}), NumericError);
  Matrix m = Matrix::from_values(2, 2, {1, 2, 3, 4});
  CHECK(m(1, 0) == 3.0);
}

TEST_CASE("random stream is a pure function of seed and counter") {
  RandomStream a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RandomStream c = RandomStream(99).split(7);
  RandomStream d = RandomStream(99).split(7);
  std::vector<std::uint64_t> seq_c, seq_d;
  for (int i = 0; i < 50; ++i) {
    seq_c.push_back(c.next_u64());
    seq_d.push_back(d.next_u64());
  }
  CHECK(seq_c == seq_d);

  RandomStream e = RandomStream(99).split(8);
  CHECK(e.next_u64() != RandomStream(99).split(7).next_u64());

  RandomStream f(5);
  for (int i = 0; i < 1000; ++i) {
    double u = f.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    std::int64_t v = f.next_below(7);
    CHECK(v >= 0);
    CHECK(v < 7);
  }
}

TEST_CASE("openmp kernels match the serial reference bit for bit") {
  RandomStream rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    int m = 3 + static_cast<int>(rng.next_below(40));
    int k = 3 + static_cast<int>(rng.next_below(40));
    int n = 3 + static_cast<int>(rng.next_below(40));
    Matrix a = oracle::random_matrix(m, k, rng);
    Matrix b = oracle::random_matrix(k, n, rng);
    Matrix bt = oracle::random_matrix(n, k, rng);
    Matrix c = oracle::random_matrix(m, n, rng);
    CHECK(kernels::matmul(a, b).values == ref::matmul(a, b).values);
    CHECK(kernels::matmul_a_bt(a, bt).values == ref::matmul_a_bt(a, bt).values);
    CHECK(kernels::matmul_at_b(a, c).values == ref::matmul_at_b(a, c).values);
    CHECK(kernels::pairwise_distance(a, Metric::kEuclidean).values ==
          ref::pairwise_distance(a, Metric::kEuclidean).values);
    CHECK(kernels::pairwise_distance(a, Metric::kCosine).values ==
          ref::pairwise_distance(a, Metric::kCosine).values);
    CHECK(kernels::row_softmax(a).values == ref::row_softmax(a).values);
  }
}

TEST_CASE("matmul small example") {
  Matrix a = Matrix::from_values(2, 2, {1, 2, 3, 4});
  Matrix b = Matrix::from_values(2, 2, {5, 6, 7, 8});
  Matrix c = kernels::matmul(a, b);
  CHECK(c(0, 0) == 19.0);
  CHECK(c(0, 1) == 22.0);
  CHECK(c(1, 0) == 43.0);
  CHECK(c(1, 1) == 50.0);
}

TEST_CASE("matmul gradients match finite differences") {
  RandomStream rng(7);
  Matrix a = oracle::random_matrix(4, 5, rng);
  Matrix b = oracle::random_matrix(5, 3, rng);
  Matrix g = oracle::random_matrix(4, 3, rng);

  auto scalar = [&]() {
    Matrix c = kernels::matmul(a, b);
    double s = 0.0;
    for (std::int64_t i = 0; i < c.size(); ++i) s += g.values[i] * c.values[i];
    return s;
  };
  Matrix da = kernels::matmul_a_bt(g, b);
  std::vector<double> fd_a = oracle::finite_difference(a.values, scalar);
  CHECK(oracle::max_rel_err(da.values, fd_a) < 1e-4);
  Matrix db = kernels::matmul_at_b(a, g);
  std::vector<double> fd_b = oracle::finite_difference(b.values, scalar);
  CHECK(oracle::max_rel_err(db.values, fd_b) < 1e-4);
}

TEST_CASE("l2_normalize examples and gradient") {
  CHECK(l2_normalize({1, 0, 0}) == Vec{1, 0, 0});
  Vec v = l2_normalize({3, 4});
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(l2_normalize({0, 0}) == Vec{0, 0});

  RandomStream rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Vec x(6);
    for (auto& xi : x) xi = rng.next_normal();
    Vec upstream(6);
    for (auto& u : upstream) u = rng.next_normal();
    auto scalar = [&]() { return dot(l2_normalize(x), upstream); };
    Vec analytic = l2_normalize_backward(x, upstream);
    std::vector<double> fd = oracle::finite_difference(x, scalar);
    CHECK(oracle::max_rel_err(analytic, fd) < 1e-4);
  }
}

TEST_CASE("softmax examples, properties and gradient") {
  Vec uniform = softmax({0, 0, 0, 0});
  for (double s : uniform) CHECK(s == doctest::Approx(0.25).epsilon(1e-12));

  Vec two = softmax({std::log(2.0), 0.0});
  CHECK(two[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  RandomStream rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + static_cast<int>(rng.next_below(8));
    Vec x(n);
    for (auto& xi : x) xi = 3.0 * rng.next_normal();
    Vec y = softmax(x);
    double sum = 0.0;
    for (double yi : y) {
      CHECK(yi > 0.0);
      sum += yi;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);

    double shift = rng.next_uniform(-10.0, 10.0);
    Vec shifted = x;
    for (auto& xi : shifted) xi += shift;
    Vec y2 = softmax(shifted);
    std::size_t argmax1 = std::max_element(y.begin(), y.end()) - y.begin();
    std::size_t argmax2 = std::max_element(y2.begin(), y2.end()) - y2.begin();
    CHECK(argmax1 == argmax2);
    for (int i = 0; i < n; ++i) CHECK(std::abs(y[i] - y2[i]) < 1e-12);
  }

  for (int trial = 0; trial < 5; ++trial) {
    Vec x(5), upstream(5);
    for (auto& xi : x) xi = rng.next_normal();
    for (auto& u : upstream) u = rng.next_normal();
    auto scalar = [&]() { return dot(softmax(x), upstream); };
    Vec analytic = softmax_backward(softmax(x), upstream);
    std::vector<double> fd = oracle::finite_difference(x, scalar);
    CHECK(oracle::max_rel_err(analytic, fd) < 1e-4);
  }
}

TEST_CASE("pairwise distance examples") {
  Matrix x = Matrix::from_values(2, 2, {0, 0, 3, 4});
  Matrix d = kernels::pairwise_distance(x, Metric::kEuclidean);
  CHECK(d(0, 1) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(d(1, 0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(d(0, 0) <= 1e-6);
  CHECK(d(1, 1) <= 1e-6);

  Matrix ortho = Matrix::from_values(2, 2, {1, 0, 0, 1});
  Matrix dc = kernels::pairwise_distance(ortho, Metric::kCosine);
  CHECK(dc(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

  Matrix same = Matrix::from_values(2, 2, {1, 0, 1, 0});
  Matrix ds = kernels::pairwise_distance(same, Metric::kCosine);
  CHECK(ds(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pairwise distance properties") {
  RandomStream rng(17);
  Matrix x = oracle::random_matrix(30, 6, rng);
  Matrix de = kernels::pairwise_distance(x, Metric::kEuclidean);
  Matrix dc = kernels::pairwise_distance(x, Metric::kCosine);

  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < x.rows; ++j) {
      CHECK(std::abs(de(i, j) - de(j, i)) <= 1e-12);
      CHECK(std::abs(dc(i, j) - dc(j, i)) <= 1e-12);
      CHECK(dc(i, j) >= -1e-9);
      CHECK(dc(i, j) <= 2.0 + 1e-9);
    }
  }

  // Triangle inequality over 1000 sampled triples.
  for (int t = 0; t < 1000; ++t) {
    int i = static_cast<int>(rng.next_below(x.rows));
    int j = static_cast<int>(rng.next_below(x.rows));
    int k = static_cast<int>(rng.next_below(x.rows));
    CHECK(de(i, k) <= de(i, j) + de(j, k) + 1e-9);
  }
}

TEST_CASE("pairwise distance gradients match finite differences") {
  RandomStream rng(19);
  for (Metric metric : {Metric::kEuclidean, Metric::kCosine}) {
    Matrix x = oracle::random_matrix(5, 4, rng);
    Matrix upstream = oracle::random_matrix(5, 5, rng);
    for (int i = 0; i < 5; ++i) upstream(i, i) = 0.0;  // diagonal is clamped

    auto scalar = [&]() {
      Matrix d = kernels::pairwise_distance(x, metric);
      double s = 0.0;
      for (std::int64_t i = 0; i < d.size(); ++i) s += upstream.values[i] * d.values[i];
      return s;
    };
    Matrix analytic = pairwise_distance_backward(x, metric, upstream);
    std::vector<double> fd = oracle::finite_difference(x.values, scalar);
    CHECK(oracle::max_rel_err(analytic.values, fd) < 1e-4);
  }
}

TEST_CASE("batch norm examples") {
  BatchNormState s = BatchNormState::identity(1);
  Matrix x = Matrix::from_values(2, 1, {1, 3});
  BatchNormResult r = batch_norm_train(x, s);
  CHECK(r.y(0, 0) == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(r.y(1, 0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(r.new_running_mean[0] == doctest::Approx(0.2).epsilon(1e-12));

  BatchNormState zero_gamma = BatchNormState::identity(1);
  zero_gamma.gamma[0] = 0.0;
  zero_gamma.beta[0] = 0.7;
  BatchNormResult rz = batch_norm_train(x, zero_gamma);
  CHECK(rz.y(0, 0) == 0.7);
  CHECK(rz.y(1, 0) == 0.7);

  BatchNormState infer_state = BatchNormState::identity(2);
  Matrix small = Matrix::from_values(2, 2, {0.05, -0.02, 0.1, 0.01});
  Matrix y = batch_norm_infer(small, infer_state);
  for (std::int64_t i = 0; i < y.size(); ++i) {
    CHECK(std::abs(y.values[i] - small.values[i]) < 1e-6);
  }

  Matrix single = Matrix::from_values(1, 1, {1.0});
  CHECK_THROWS_AS(batch_norm_train(single, BatchNormState::identity(1)), ConfigError);
}

TEST_CASE("batch norm gradient matches finite differences") {
  RandomStream rng(23);
  const int n = 6, d = 4;
  Matrix x = oracle::random_matrix(n, d, rng);
  Matrix upstream = oracle::random_matrix(n, d, rng);
  BatchNormState s = BatchNormState::identity(d);
  for (int j = 0; j < d; ++j) {
    s.gamma[j] = 1.0 + 0.3 * rng.next_normal();
    s.beta[j] = 0.2 * rng.next_normal();
  }

  auto scalar = [&]() {
    BatchNormResult r = batch_norm_train(x, s);
    double acc = 0.0;
    for (std::int64_t i = 0; i < r.y.size(); ++i) acc += upstream.values[i] * r.y.values[i];
    return acc;
  };
  BatchNormResult r = batch_norm_train(x, s);
  BatchNormGrads g = batch_norm_train_backward(upstream, r, s);

  std::vector<double> fd_x = oracle::finite_difference(x.values, scalar);
  CHECK(oracle::max_rel_err(g.dx.values, fd_x) < 1e-4);
  std::vector<double> fd_gamma = oracle::finite_difference(s.gamma, scalar);
  CHECK(oracle::max_rel_err(g.dgamma, fd_gamma) < 1e-4);
  std::vector<double> fd_beta = oracle::finite_difference(s.beta, scalar);
  CHECK(oracle::max_rel_err(g.dbeta, fd_beta) < 1e-4);
}

TEST_CASE("tanh gradient matches finite differences") {
  RandomStream rng(29);
  Matrix x = oracle::random_matrix(3, 4, rng);
  Matrix upstream = oracle::random_matrix(3, 4, rng);
  auto scalar = [&]() {
    Matrix y = kernels::tanh_map(x);
    double s = 0.0;
    for (std::int64_t i = 0; i < y.size(); ++i) s += upstream.values[i] * y.values[i];
    return s;
  };
  Matrix analytic = tanh_backward(kernels::tanh_map(x), upstream);
  std::vector<double> fd = oracle::finite_difference(x.values, scalar);
  CHECK(oracle::max_rel_err(analytic.values, fd) < 1e-4);
}
