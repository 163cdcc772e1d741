// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "attnsent/attention.hpp"
#include "attnsent/dual.hpp"
#include "attnsent/errors.hpp"
#include "attnsent/kernels.hpp"
#include "attnsent/parallel.hpp"
#include "attnsent/reference.hpp"
#include "oracles.hpp"

using namespace attnsent;

TEST_CASE("matrix construction") {
  CHECK_THROWS_AS(Matrix(0, 3), ShapeError);
  CHECK_THROWS_AS(Matrix(2, 0), ShapeError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  const Matrix m{{1, 2, 3}, {4, 5, 6}};
  CHECK(m.shape() == "2x3");
  CHECK(m(1, 2) == 6);
}

TEST_CASE("matmul examples") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5, 6}, {7, 8}};
  CHECK(matmul(a, b) == Matrix{{19, 22}, {43, 50}});
  CHECK(oracle::matrix(oracle::product(oracle::grid(a), oracle::grid(b))) == matmul(a, b));

  Rng rng(3);
  const Matrix x = oracle::random_matrix(3, 5, rng);
  CHECK(matmul(x, Matrix::identity(5)) == x);
  CHECK(matmul(x, Matrix(5, 2)) == Matrix(3, 2));

  try {
    matmul(Matrix(2, 3), Matrix(4, 2));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
  }
}

TEST_CASE("transposed products agree with matmul") {
  Rng rng(5);
  const Matrix a = oracle::random_matrix(4, 3, rng);
  const Matrix b = oracle::random_matrix(4, 6, rng);
  const Matrix c = oracle::random_matrix(6, 3, rng);
  CHECK(max_abs_diff(matmul_tn(a, b), matmul(transpose(a), b)) < 1e-14);
  CHECK(max_abs_diff(matmul_nt(a, c), matmul(a, transpose(c))) < 1e-14);
}

TEST_CASE("matmul associativity") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const Matrix a = oracle::random_matrix(1 + rng.below(6), 1 + rng.below(6), rng);
    const Matrix b = oracle::random_matrix(a.cols(), 1 + rng.below(6), rng);
    const Matrix c = oracle::random_matrix(b.cols(), 1 + rng.below(6), rng);
    CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-10);
  }
}

TEST_CASE("non-finite kernel results are rejected") {
  const Matrix big(1, 2, 1e300);
  CHECK_THROWS_AS(matmul(big, Matrix(2, 1, 1e300)), NumericError);
  Matrix bad(1, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(softmax_rows(bad), NumericError);
  CHECK_THROWS_AS(require_finite(bad, "probe"), NumericError);
}

TEST_CASE("softmax examples") {
  const Matrix u = softmax_rows(Matrix{{0, 0, 0}});
  for (std::size_t j = 0; j < 3; ++j) CHECK(u(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-15));

  const Matrix l = softmax_rows(Matrix{{std::log(1.0), std::log(2.0), std::log(3.0)}});
  CHECK(std::abs(l(0, 0) - 1.0 / 6) < 1e-15);
  CHECK(std::abs(l(0, 1) - 2.0 / 6) < 1e-15);
  CHECK(std::abs(l(0, 2) - 3.0 / 6) < 1e-15);

  const Matrix big = softmax_rows(Matrix{{1000, 1000.5}});
  const auto expect = oracle::softmax({1000.0L, 1000.5L});
  CHECK(std::abs(big(0, 0) - static_cast<double>(expect[0])) < 1e-12);
  CHECK(std::abs(big(0, 1) - static_cast<double>(expect[1])) < 1e-12);
  CHECK(big(0, 0) == doctest::Approx(0.37754).epsilon(1e-5));
  CHECK(big(0, 1) == doctest::Approx(0.62246).epsilon(1e-5));
}

TEST_CASE("softmax rows are distributions and shift invariant") {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const Matrix m = oracle::random_matrix(1 + rng.below(5), 1 + rng.below(8), rng, 30.0);
    const Matrix s = softmax_rows(m);
    Matrix shifted = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double c = rng.uniform(-50, 50);
      for (double& v : shifted.row(i)) v += c;
    }
    const Matrix s2 = softmax_rows(shifted);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double total = 0;
      for (double v : s.row(i)) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
    CHECK(max_abs_diff(s, s2) < 1e-12);
  }
}

TEST_CASE("global average pool") {
  const Matrix one{{1, -2, 3}};
  CHECK(global_average_pool(one) == one);
  CHECK(global_average_pool(Matrix{{1, 3}, {3, 5}}) == Matrix{{2, 4}});
  CHECK(global_average_pool(Matrix(4, 3, 2.5)) == Matrix(1, 3, 2.5));
}

TEST_CASE("activations") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(relu(-3.0) == 0.0);
  CHECK(relu(3.0) == 3.0);
  for (double x : {40.0, -40.0, 800.0, -800.0}) {
    const double s = sigmoid(x);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(std::isfinite(s));
  }
  CHECK(std::abs(sigmoid(-40.0) - static_cast<double>(oracle::sigmoid(-40.0L))) < 1e-30);
  CHECK(std::abs(sigmoid(40.0) - static_cast<double>(oracle::sigmoid(40.0L))) < 1e-15);
}

namespace {

// Shifts entries away from the relu kink so central differences stay on one side.
Matrix away_from_zero(Matrix m) {
  for (double& v : m.values())
    if (std::abs(v) < 0.05) v = v < 0 ? -0.05 - std::abs(v) : 0.05 + v;
  return m;
}

void check_backward(const std::function<DualResult(const std::vector<Matrix>&)>& op,
                    std::vector<Matrix> inputs, Rng& rng, double tol = 1e-6) {
  const DualResult r = op(inputs);
  const Matrix w = oracle::random_matrix(r.output.rows(), r.output.cols(), rng);
  const auto grads = r.backward(w);
  REQUIRE(grads.size() >= inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&](const Matrix& xi) {
      auto in = inputs;
      in[i] = xi;
      return oracle::probe(op(in).output, w);
    };
    const Matrix numeric = oracle::numeric_gradient(f, inputs[i]);
    CHECK(oracle::normwise_error(grads[i], numeric) < tol);
  }
  const auto zero = r.backward(Matrix(r.output.rows(), r.output.cols()));
  for (const auto& g : zero)
    for (double v : g.values()) CHECK(v == 0.0);
}

}  // namespace

TEST_CASE("kernel backward passes match finite differences") {
  Rng rng(13);
  for (int t = 0; t < 10; ++t) {
    const std::size_t r = 1 + rng.below(8), k = 1 + rng.below(8), c = 1 + rng.below(8);
    check_backward([](const auto& in) { return dual_matmul(in[0], in[1]); },
                   {oracle::random_matrix(r, k, rng), oracle::random_matrix(k, c, rng)}, rng);
    check_backward([](const auto& in) { return dual_softmax_rows(in[0]); },
                   {oracle::random_matrix(r, c, rng, 3.0)}, rng);
    check_backward([](const auto& in) { return dual_global_average_pool(in[0]); },
                   {oracle::random_matrix(r, c, rng)}, rng);
    check_backward([](const auto& in) { return dual_relu(in[0]); },
                   {away_from_zero(oracle::random_matrix(r, c, rng))}, rng);
    check_backward([](const auto& in) { return dual_sigmoid(in[0]); },
                   {oracle::random_matrix(r, c, rng, 4.0)}, rng);
    const std::size_t d = 2 + rng.below(7);
    check_backward([](const auto& in) { return dual_layer_norm(in[0], in[1], in[2]); },
                   {oracle::random_matrix(r, d, rng, 2.0), oracle::random_matrix(1, d, rng),
                    oracle::random_matrix(1, d, rng)},
                   rng);
  }
}

TEST_CASE("layer norm output rows are standardized") {
  Rng rng(17);
  const Matrix x = oracle::random_matrix(3, 6, rng, 5.0);
  const auto r = layer_norm(x, Matrix(1, 6, 1.0), Matrix(1, 6, 0.0));
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0, sq = 0;
    for (double v : r.output.row(i)) mean += v / 6;
    for (double v : r.output.row(i)) sq += (v - mean) * (v - mean) / 6;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(sq == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  Rng rng(19);
  const Matrix a = oracle::random_matrix(97, 131, rng);
  const Matrix b = oracle::random_matrix(131, 83, rng);
  const Matrix c = oracle::random_matrix(97, 83, rng);
  const Matrix d = oracle::random_matrix(61, 131, rng);
  for (int threads : {1, 2, 4}) {
    ScopedThreadCount scope(threads);
    CHECK(matmul(a, b) == reference::matmul(a, b));
    CHECK(matmul_tn(a, c) == reference::matmul_tn(a, c));
    CHECK(matmul_nt(a, d) == reference::matmul_nt(a, d));
  }

  const Matrix x = oracle::random_matrix(64, 96, rng);
  const MultiHeadParams p = MultiHeadParams::random(96, 12, rng);
  Matrix serial(1, 1);
  {
    ScopedThreadCount scope(1);
    serial = multi_head(x, p);
  }
  ScopedThreadCount scope(4);
  CHECK(multi_head(x, p) == serial);
}

TEST_CASE("thread count guard restores the previous value") {
  const int before = thread_count();
  {
    ScopedThreadCount scope(3);
    CHECK(thread_count() == 3);
  }
  CHECK(thread_count() == before);
}
