// SPDX-License-Identifier: Apache-2.0
#include "attnsent/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "attnsent/errors.hpp"
#include "attnsent/parallel.hpp"

namespace attnsent {

namespace {

// Below this many multiply-adds a product runs on the calling thread.
constexpr std::size_t kParallelWork = 1 << 15;

bool go_parallel(std::size_t work) { return thread_count() > 1 && work >= kParallelWork; }

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
  }
}

// Rows [r0, r1) of c = a * b. Four rows of a share each streamed row of b.
void matmul_rows(const Matrix& a, const Matrix& b, Matrix& c, std::size_t r0, std::size_t r1) {
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  std::size_t i = r0;
  for (; i + 4 <= r1; i += 4) {
    double* c0 = c.row(i).data();
    double* c1 = c.row(i + 1).data();
    double* c2 = c.row(i + 2).data();
    double* c3 = c.row(i + 3).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double a0 = a(i, k), a1 = a(i + 1, k), a2 = a(i + 2, k), a3 = a(i + 3, k);
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = bk[j];
        c0[j] += a0 * bv;
        c1[j] += a1 * bv;
        c2[j] += a2 * bv;
        c3[j] += a3 * bv;
      }
    }
  }
  for (; i < r1; ++i) {
    double* ci = c.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double av = a(i, k);
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + a.shape() + " by " + b.shape());
  }
  Matrix c(a.rows(), b.cols());
  const std::size_t m = a.rows();
  if (go_parallel(m * a.cols() * b.cols())) {
    const std::int64_t blocks = static_cast<std::int64_t>((m + 3) / 4);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t blk = 0; blk < blocks; ++blk) {
      const std::size_t r0 = static_cast<std::size_t>(blk) * 4;
      matmul_rows(a, b, c, r0, std::min(m, r0 + 4));
    }
  } else {
    matmul_rows(a, b, c, 0, m);
  }
  require_finite(c, "matmul output");
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: cannot multiply transpose of " + a.shape() + " by " + b.shape());
  }
  const std::size_t m = a.cols();
  const std::size_t n = b.cols();
  const std::size_t inner = a.rows();
  Matrix c(m, n);
  auto rows = [&](std::size_t i) {
    double* ci = c.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double av = a(k, i);
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  };
  if (go_parallel(m * n * inner)) {
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) rows(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < m; ++i) rows(i);
  }
  require_finite(c, "matmul_tn output");
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: cannot multiply " + a.shape() + " by transpose of " + b.shape());
  }
  const std::size_t m = a.rows();
  const std::size_t n = b.rows();
  const std::size_t inner = a.cols();
  Matrix c(m, n);
  auto rows = [&](std::size_t i) {
    const double* ai = a.row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.row(j).data();
      double sum = 0.0;
      for (std::size_t k = 0; k < inner; ++k) sum += ai[k] * bj[k];
      c(i, j) = sum;
    }
  };
  if (go_parallel(m * n * inner)) {
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) rows(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < m; ++i) rows(i);
  }
  require_finite(c, "matmul_nt output");
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c = a;
  add_inplace(c, b);
  return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] -= bv[i];
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] *= bv[i];
  return c;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

void add_inplace(Matrix& acc, const Matrix& x) {
  require_same_shape(acc, x, "add_inplace");
  auto av = acc.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += xv[i];
}

Matrix add_row(const Matrix& a, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: cannot broadcast " + row.shape() + " over " + a.shape());
  }
  Matrix c = a;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t j = 0; j < ci.size(); ++j) ci[j] += row(0, j);
  }
  return c;
}

Matrix column_sums(const Matrix& a) {
  Matrix s(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s(0, j) += a(i, j);
  return s;
}

Matrix concat_cols(const Matrix& left, const Matrix& right) {
  if (left.rows() != right.rows()) {
    throw ShapeError("concat_cols: row count mismatch " + left.shape() + " vs " + right.shape());
  }
  Matrix c(left.rows(), left.cols() + right.cols());
  for (std::size_t i = 0; i < c.rows(); ++i) {
    auto ci = c.row(i);
    std::copy(left.row(i).begin(), left.row(i).end(), ci.begin());
    std::copy(right.row(i).begin(), right.row(i).end(),
              ci.begin() + static_cast<std::ptrdiff_t>(left.cols()));
  }
  return c;
}

Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + a.shape());
  }
  Matrix s(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto src = a.row(i).subspan(begin, count);
    std::copy(src.begin(), src.end(), s.row(i).begin());
  }
  return s;
}

Matrix softmax_rows(const Matrix& m) {
  require_finite(m, "softmax_rows input");
  Matrix y(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    auto out = y.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    for (double& v : out) v /= sum;
  }
  return y;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  require_same_shape(y, dy, "softmax_rows_backward");
  Matrix dx(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) dot += y(i, j) * dy(i, j);
    for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (dy(i, j) - dot);
  }
  return dx;
}

Matrix global_average_pool(const Matrix& x) {
  Matrix s = column_sums(x);
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (double& v : s.values()) v *= inv;
  return s;
}

Matrix global_average_pool_backward(const Matrix& dy, std::size_t rows) {
  if (dy.rows() != 1) throw ShapeError("global_average_pool_backward: upstream " + dy.shape());
  if (rows == 0) throw ShapeError("global_average_pool_backward: zero rows");
  Matrix dx(rows, dy.cols());
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < dy.cols(); ++j) dx(i, j) = dy(0, j) * inv;
  return dx;
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

double sigmoid(double x) {
  // Clamped so the result stays strictly inside (0, 1) even where the
  // exact value rounds to 0 or 1.
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  return std::clamp(y, lo, hi);
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = relu(v);
  return y;
}

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  require_same_shape(x, dy, "relu_backward");
  Matrix dx = dy;
  auto xv = x.values();
  auto dv = dx.values();
  for (std::size_t i = 0; i < dv.size(); ++i)
    if (!(xv[i] > 0.0)) dv[i] = 0.0;
  return dx;
}

Matrix sigmoid(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = sigmoid(v);
  return y;
}

Matrix sigmoid_backward(const Matrix& y, const Matrix& dy) {
  require_same_shape(y, dy, "sigmoid_backward");
  Matrix dx = dy;
  auto yv = y.values();
  auto dv = dx.values();
  for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= yv[i] * (1.0 - yv[i]);
  return dx;
}

Matrix tanh(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = std::tanh(v);
  return y;
}

LayerNormResult layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps) {
  if (gain.rows() != 1 || gain.cols() != x.cols() || !gain.same_shape(bias)) {
    throw ShapeError("layer_norm: gain " + gain.shape() + ", bias " + bias.shape() +
                     " for input " + x.shape());
  }
  const std::size_t d = x.cols();
  LayerNormResult r{Matrix(x.rows(), d), {Matrix(x.rows(), d), std::vector<double>(x.rows())}};
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xi = x.row(i);
    double mean = 0.0;
    for (double v : xi) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : xi) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    r.cache.inv_std[i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (xi[j] - mean) * inv;
      r.cache.normalized(i, j) = xh;
      r.output(i, j) = gain(0, j) * xh + bias(0, j);
    }
  }
  return r;
}

LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Matrix& gain,
                                   const Matrix& dy) {
  require_same_shape(cache.normalized, dy, "layer_norm_backward");
  const std::size_t n = dy.rows();
  const std::size_t d = dy.cols();
  LayerNormGrads g{Matrix(n, d), Matrix(1, d), Matrix(1, d)};
  std::vector<double> dxh(d);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    double sum_xh = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = cache.normalized(i, j);
      g.dgain(0, j) += dy(i, j) * xh;
      g.dbias(0, j) += dy(i, j);
      dxh[j] = dy(i, j) * gain(0, j);
      sum += dxh[j];
      sum_xh += dxh[j] * xh;
    }
    const double k = cache.inv_std[i] / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      g.dx(i, j) = k * (static_cast<double>(d) * dxh[j] - sum - cache.normalized(i, j) * sum_xh);
    }
  }
  return g;
}

}  // namespace attnsent
