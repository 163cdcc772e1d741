// SPDX-License-Identifier: Apache-2.0
// Brute-force reference evaluations used by the tests. They work in long
// double on nested vectors and share no code with the library beyond the
// Matrix container used to pass values in and out.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "attnsent/matrix.hpp"
#include "attnsent/random.hpp"

namespace oracle {

using Real = long double;
using Grid = std::vector<std::vector<Real>>;

inline Grid grid(const attnsent::Matrix& m) {
  Grid g(m.rows(), std::vector<Real>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

inline attnsent::Matrix matrix(const Grid& g) {
  attnsent::Matrix m(g.size(), g.front().size());
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].size(); ++j) m(i, j) = static_cast<double>(g[i][j]);
  return m;
}

inline Grid product(const Grid& a, const Grid& b) {
  Grid c(a.size(), std::vector<Real>(b.front().size(), 0.0L));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.front().size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline std::vector<Real> softmax(std::vector<Real> row) {
  Real hi = row.front();
  for (Real v : row) hi = std::max(hi, v);
  Real total = 0.0L;
  for (Real& v : row) total += (v = std::exp(v - hi));
  for (Real& v : row) v /= total;
  return row;
}

// softmax(Q K^T / sqrt(d) + bias) V, bias = -1e9 on masked keys.
inline Grid attention(const Grid& q, const Grid& k, const Grid& v, const std::vector<bool>* valid = nullptr) {
  const Real scale = std::sqrt(static_cast<Real>(q.front().size()));
  Grid out(q.size(), std::vector<Real>(v.front().size(), 0.0L));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<Real> scores(k.size());
    for (std::size_t j = 0; j < k.size(); ++j) {
      Real dot = 0.0L;
      for (std::size_t c = 0; c < q[i].size(); ++c) dot += q[i][c] * k[j][c];
      scores[j] = dot / scale + (valid && !(*valid)[j] ? -1e9L : 0.0L);
    }
    const auto w = softmax(scores);
    for (std::size_t j = 0; j < k.size(); ++j)
      for (std::size_t c = 0; c < v[j].size(); ++c) out[i][c] += w[j] * v[j][c];
  }
  return out;
}

struct Head {
  Grid wq, wk, wv;
};

// Concat(head_1..head_h) Wo with head_i = attention(X Wq_i, X Wk_i, X Wv_i).
inline Grid multi_head(const Grid& x, const std::vector<Head>& heads, const Grid& wo) {
  Grid concat(x.size());
  for (const auto& h : heads) {
    const Grid o = attention(product(x, h.wq), product(x, h.wk), product(x, h.wv));
    for (std::size_t r = 0; r < x.size(); ++r) concat[r].insert(concat[r].end(), o[r].begin(), o[r].end());
  }
  return product(concat, wo);
}

// Entry (position p, 1-based; column c) of the sinusoidal encoding.
inline Real positional(std::size_t p, std::size_t c, std::size_t d) {
  const Real i2 = static_cast<Real>(c - c % 2);
  const Real angle = static_cast<Real>(p) * std::exp(-std::log(10000.0L) * i2 / static_cast<Real>(d));
  return c % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

inline Real sigmoid(Real x) { return 1.0L / (1.0L + std::exp(-x)); }

struct Gate {
  std::vector<Real> gate;
  Grid output;
};

inline Gate squeeze_excite(const Grid& x, const Grid& fc1, const Grid& fc2) {
  Grid s(1, std::vector<Real>(x.front().size(), 0.0L));
  for (const auto& row : x)
    for (std::size_t j = 0; j < row.size(); ++j) s[0][j] += row[j] / static_cast<Real>(x.size());
  Grid hidden = product(s, fc1);
  for (Real& v : hidden[0]) v = std::max(v, 0.0L);
  Grid pre = product(hidden, fc2);
  Gate g{std::vector<Real>(pre[0].size()), x};
  for (std::size_t j = 0; j < pre[0].size(); ++j) g.gate[j] = sigmoid(pre[0][j]);
  for (auto& row : g.output)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] *= g.gate[j];
  return g;
}

struct GruWeights {
  Grid wz, wr, wc, uz, ur, uc;
  std::vector<Real> bz, br, bc;
};

// h <- z h + (1 - z) tanh(x Wc + (r h) Uc + bc), from h = 0.
inline std::vector<Real> gru(const Grid& x, const GruWeights& w) {
  const std::size_t u = w.bz.size();
  std::vector<Real> h(u, 0.0L);
  auto affine = [&](const std::vector<Real>& xt, const Grid& wx, const std::vector<Real>& hv,
                    const Grid& uh, const std::vector<Real>& b, std::size_t j) {
    Real a = b[j];
    for (std::size_t k = 0; k < xt.size(); ++k) a += xt[k] * wx[k][j];
    for (std::size_t k = 0; k < u; ++k) a += hv[k] * uh[k][j];
    return a;
  };
  for (const auto& xt : x) {
    std::vector<Real> z(u), r(u), rh(u), next(u);
    for (std::size_t j = 0; j < u; ++j) {
      z[j] = sigmoid(affine(xt, w.wz, h, w.uz, w.bz, j));
      r[j] = sigmoid(affine(xt, w.wr, h, w.ur, w.br, j));
    }
    for (std::size_t j = 0; j < u; ++j) rh[j] = r[j] * h[j];
    for (std::size_t j = 0; j < u; ++j) {
      next[j] = z[j] * h[j] + (1.0L - z[j]) * std::tanh(affine(xt, w.wc, rh, w.uc, w.bc, j));
    }
    h = next;
  }
  return h;
}

inline Real focal(Real p_y, Real gamma, Real alpha) {
  p_y = std::max(p_y, 1e-12L);
  return -alpha * std::pow(1.0L - p_y, gamma) * std::log(p_y);
}

// Central differences of f at x, one entry at a time.
inline attnsent::Matrix numeric_gradient(const std::function<double(const attnsent::Matrix&)>& f,
                                         attnsent::Matrix x, double eps = 1e-5) {
  attnsent::Matrix g(x.rows(), x.cols());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x.values()[k];
    x.values()[k] = saved + eps;
    const double up = f(x);
    x.values()[k] = saved - eps;
    const double down = f(x);
    x.values()[k] = saved;
    g.values()[k] = (up - down) / (2.0 * eps);
  }
  return g;
}

// max |a - n| / max(max |a|, max |n|).
inline double normwise_error(const attnsent::Matrix& analytic, const attnsent::Matrix& numeric) {
  double diff = 0.0, scale = 1e-300;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff = std::max(diff, std::abs(analytic.values()[k] - numeric.values()[k]));
    scale = std::max({scale, std::abs(analytic.values()[k]), std::abs(numeric.values()[k])});
  }
  return diff / scale;
}

// sum(weights . m), a scalar probe with a dense upstream gradient.
inline double probe(const attnsent::Matrix& m, const attnsent::Matrix& weights) {
  double s = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) s += m.values()[k] * weights.values()[k];
  return s;
}

inline attnsent::Matrix random_matrix(std::size_t r, std::size_t c, attnsent::Rng& rng, double limit = 1.0) {
  return attnsent::random_uniform(r, c, limit, rng);
}

}  // namespace oracle
