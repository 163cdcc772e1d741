// SPDX-License-Identifier: Apache-2.0
#include "attnsent/gru.hpp"

#include <array>
#include <cmath>

#include "attnsent/errors.hpp"
#include "attnsent/kernels.hpp"

namespace attnsent {

void GruParams::validate() const {
  const std::size_t d = input_dim();
  const std::size_t u = units();
  auto check = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw ShapeError(std::string("gru ") + name + " is " + m.shape() + ", expected " +
                       std::to_string(r) + "x" + std::to_string(c));
    }
  };
  check(wr, d, u, "wr");
  check(wc, d, u, "wc");
  check(uz, u, u, "uz");
  check(ur, u, u, "ur");
  check(uc, u, u, "uc");
  check(bz, 1, u, "bz");
  check(br, 1, u, "br");
  check(bc, 1, u, "bc");
}

GruParams GruParams::zeros(std::size_t d, std::size_t u) {
  return {Matrix(d, u), Matrix(d, u), Matrix(d, u), Matrix(u, u), Matrix(u, u),
          Matrix(u, u), Matrix(1, u), Matrix(1, u), Matrix(1, u)};
}

GruParams GruParams::random(std::size_t d, std::size_t u, Rng& rng) {
  GruParams p = zeros(d, u);
  for (Matrix* m : {&p.wz, &p.wr, &p.wc}) *m = scaled_uniform(d, u, rng);
  for (Matrix* m : {&p.uz, &p.ur, &p.uc}) *m = scaled_uniform(u, u, rng);
  return p;
}

namespace {

// out += v * m, for a row vector v.
void add_vec_mat(std::span<const double> v, const Matrix& m, std::span<double> out) {
  for (std::size_t k = 0; k < m.rows(); ++k) {
    const double a = v[k];
    if (a == 0.0) continue;
    const auto row = m.row(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += a * row[j];
  }
}

}  // namespace

Matrix gru_forward(const Matrix& x, const GruParams& p) {
  p.validate();
  if (x.cols() != p.input_dim()) {
    throw ShapeError("gru input " + x.shape() + " for input dim " + std::to_string(p.input_dim()));
  }
  const std::size_t u = p.units();
  // Input projections do not depend on h, so they are computed up front.
  const Matrix xz = matmul(x, p.wz);
  const Matrix xr = matmul(x, p.wr);
  const Matrix xc = matmul(x, p.wc);

  std::vector<double> h(u, 0.0), z(u), r(u), rh(u), c(u);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    for (std::size_t j = 0; j < u; ++j) {
      z[j] = xz(t, j) + p.bz(0, j);
      r[j] = xr(t, j) + p.br(0, j);
      c[j] = xc(t, j) + p.bc(0, j);
    }
    add_vec_mat(h, p.uz, z);
    add_vec_mat(h, p.ur, r);
    for (std::size_t j = 0; j < u; ++j) {
      z[j] = sigmoid(z[j]);
      rh[j] = sigmoid(r[j]) * h[j];
    }
    add_vec_mat(rh, p.uc, c);
    for (std::size_t j = 0; j < u; ++j) h[j] = z[j] * h[j] + (1.0 - z[j]) * std::tanh(c[j]);
  }
  Matrix out(1, u, std::move(h));
  require_finite(out, "gru hidden state");
  return out;
}

GruClassifier GruClassifier::random(std::size_t d, std::size_t u, Rng& rng) {
  GruParams gru = GruParams::random(d, u, rng);
  Matrix w = scaled_uniform(u, 2, rng);
  return {std::move(gru), std::move(w), Matrix(1, 2)};
}

std::array<double, 2> GruClassifier::forward(const Matrix& x) const {
  const Matrix probs = softmax_rows(add_row(matmul(gru_forward(x, gru), w), b));
  return {probs(0, 0), probs(0, 1)};
}

}  // namespace attnsent
