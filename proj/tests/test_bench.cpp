// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "attnsent/bench.hpp"
#include "attnsent/errors.hpp"
#include "attnsent/gru.hpp"
#include "attnsent/kernels.hpp"
#include "oracles.hpp"

using namespace attnsent;

namespace {

oracle::GruWeights weights(const GruParams& p) {
  auto vec = [](const Matrix& m) {
    std::vector<oracle::Real> v;
    for (double x : m.values()) v.push_back(x);
    return v;
  };
  return {oracle::grid(p.wz), oracle::grid(p.wr), oracle::grid(p.wc), oracle::grid(p.uz),
          oracle::grid(p.ur), oracle::grid(p.uc), vec(p.bz),          vec(p.br),
          vec(p.bc)};
}

double distance(const Matrix& a, const Matrix& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a.values()[k] - b.values()[k]) * (a.values()[k] - b.values()[k]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("zero GRU stays at zero") {
  for (std::size_t n = 1; n <= 5; ++n) CHECK(gru_forward(Matrix(n, 3), GruParams::zeros(3, 4)) == Matrix(1, 4));
}

TEST_CASE("a saturated update gate carries the initial state") {
  Rng rng(1);
  GruParams p = GruParams::random(3, 4, rng);
  p.bz = Matrix(1, 4, 100.0);
  const Matrix h = gru_forward(oracle::random_matrix(6, 3, rng), p);
  for (double v : h.values()) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("GRU matches the step-by-step oracle") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = t == 0 ? 2 : 1 + rng.below(6), d = t == 0 ? 3 : 1 + rng.below(5),
                      u = t == 0 ? 2 : 1 + rng.below(5);
    GruParams p = GruParams::random(d, u, rng);
    p.bz = oracle::random_matrix(1, u, rng);
    p.br = oracle::random_matrix(1, u, rng);
    p.bc = oracle::random_matrix(1, u, rng);
    const Matrix x = oracle::random_matrix(n, d, rng, 2.0);
    const auto expect = oracle::gru(oracle::grid(x), weights(p));
    const Matrix h = gru_forward(x, p);
    for (std::size_t j = 0; j < u; ++j) CHECK(std::abs(h(0, j) - static_cast<double>(expect[j])) < 1e-14);
  }
}

TEST_CASE("GRU is sensitive to input order") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const GruParams p = GruParams::random(4, 8, rng);
    const Matrix x = oracle::random_matrix(2 + rng.below(10), 4, rng);
    Matrix reversed(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) reversed(i, j) = x(x.rows() - 1 - i, j);
    CHECK(distance(gru_forward(x, p), gru_forward(reversed, p)) > 1e-8);
  }
}

TEST_CASE("GRU shape errors") {
  Rng rng(4);
  GruParams p = GruParams::random(3, 4, rng);
  CHECK_THROWS_AS(gru_forward(Matrix(2, 5), p), ShapeError);
  p.uc = Matrix(3, 4);
  CHECK_THROWS_AS(gru_forward(Matrix(2, 3), p), ShapeError);
}

TEST_CASE("bench excludes warmup and reports one row per model") {
  std::size_t calls_a = 0, calls_b = 0;
  std::vector<std::size_t> docs_seen;
  Rng rng(5);
  const Matrix m = oracle::random_matrix(32, 32, rng);
  const std::vector<BenchModel> models{
      {"a", [&](std::size_t i) { ++calls_a; docs_seen.push_back(i); (void)matmul(m, m); }},
      {"b", [&](std::size_t) { ++calls_b; (void)matmul(m, m); }}};
  const auto reports = bench(models, 3, 30, 4, 7);
  REQUIRE(reports.size() == 2);
  CHECK(calls_a == 34);
  CHECK(calls_b == 34);
  for (auto i : docs_seen) CHECK(i < 3);
  for (const auto& r : reports) {
    CHECK(r.samples.size() == 30);
    CHECK(r.reps == 30);
    CHECK(r.warmup == 4);
    CHECK(r.mean_s > 0.0);
    CHECK(r.min_s <= r.mean_s);
    CHECK(r.mean_s <= r.max_s);
    CHECK(r.threads == 1);
    CHECK(r.seq_len == 7);
    CHECK_FALSE(r.hardware.empty());
  }
  const auto j = to_json(reports[0]);
  for (const char* key : {"model", "mean_s", "std_s", "min_s", "max_s", "reps", "warmup", "hardware"})
    CHECK(j.contains(key));
  const std::string table = format_table(reports);
  CHECK(table.find("Avg.inference time (s)") != std::string::npos);
  CHECK(table.find("\na ") != std::string::npos);
  CHECK(table.find("\nb ") != std::string::npos);
}

TEST_CASE("bench argument checks") {
  const std::vector<BenchModel> models{{"noop", [](std::size_t) {}}};
  CHECK_THROWS_AS(bench(models, 0, 30, 3), DataError);
  CHECK_THROWS_AS(bench(models, 1, 29, 3), ConfigError);
  CHECK_THROWS_AS(bench(models, 1, 30, 2), ConfigError);
}

TEST_CASE("repeated measurements of one workload agree") {
  Rng rng(6);
  const Matrix m = oracle::random_matrix(48, 48, rng);
  const std::vector<BenchModel> models{{"matmul", [&](std::size_t) { (void)matmul(m, m); }}};
  const auto first = bench(models, 1, 100, 5).front();
  const auto second = bench(models, 1, 100, 5).front();
  CHECK(std::abs(first.mean_s - second.mean_s) < 3.0 * std::max(first.std_s, second.std_s));
}

TEST_CASE("attention and GRU comparison runs on matched inputs") {
  LatencyComparison cfg;
  cfg.d_model = 16;
  cfg.heads = 4;
  cfg.gru_units = 8;
  cfg.seq_len = 10;
  cfg.documents = 3;
  cfg.reps = 30;
  cfg.warmup = 3;
  const auto reports = compare_attention_gru(cfg);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].model.find("self-attention") != std::string::npos);
  CHECK(reports[1].model.find("GRU") != std::string::npos);
  CHECK(reports[0].seq_len == 10);
  cfg.d_model = 18;
  CHECK_THROWS_AS(compare_attention_gru(cfg), ConfigError);
}
