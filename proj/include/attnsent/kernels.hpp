// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "attnsent/matrix.hpp"

// Dense kernels used by every layer. Products are parallelized over output
// rows with OpenMP; each output element is still accumulated serially in
// ascending inner index, so results are bit-identical to the serial
// versions in reference.hpp for any thread count.
namespace attnsent {

Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
void add_inplace(Matrix& acc, const Matrix& x);
// a + row broadcast over every row of a; row is 1 x a.cols().
Matrix add_row(const Matrix& a, const Matrix& row);
// 1 x cols sum over rows.
Matrix column_sums(const Matrix& a);

Matrix concat_cols(const Matrix& left, const Matrix& right);
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count);

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& m);
// Gradient w.r.t. the logits given the softmax output y and upstream dy.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy);

// 1 x d column means.
Matrix global_average_pool(const Matrix& x);
Matrix global_average_pool_backward(const Matrix& dy, std::size_t rows);

double relu(double x);
double sigmoid(double x);
Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& x, const Matrix& dy);
Matrix sigmoid(const Matrix& x);
Matrix sigmoid_backward(const Matrix& y, const Matrix& dy);
Matrix tanh(const Matrix& x);

struct LayerNormCache {
  Matrix normalized;            // (x - mean) / std, per row
  std::vector<double> inv_std;  // one per row
};

struct LayerNormResult {
  Matrix output;
  LayerNormCache cache;
};

struct LayerNormGrads {
  Matrix dx;
  Matrix dgain;
  Matrix dbias;
};

inline constexpr double kLayerNormEps = 1e-5;

// Per-row normalization; gain and bias are 1 x cols.
LayerNormResult layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                           double eps = kLayerNormEps);
LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Matrix& gain,
                                   const Matrix& dy);

}  // namespace attnsent
