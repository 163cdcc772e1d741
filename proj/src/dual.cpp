// SPDX-License-Identifier: Apache-2.0
#include "attnsent/dual.hpp"

#include "attnsent/kernels.hpp"

namespace attnsent {

DualResult dual_matmul(const Matrix& a, const Matrix& b) {
  return {matmul(a, b), [a, b](const Matrix& dy) {
            return std::vector<Matrix>{matmul_nt(dy, b), matmul_tn(a, dy)};
          }};
}

DualResult dual_softmax_rows(const Matrix& m) {
  Matrix y = softmax_rows(m);
  return {y, [y](const Matrix& dy) { return std::vector<Matrix>{softmax_rows_backward(y, dy)}; }};
}

DualResult dual_global_average_pool(const Matrix& x) {
  const std::size_t n = x.rows();
  return {global_average_pool(x), [n](const Matrix& dy) {
            return std::vector<Matrix>{global_average_pool_backward(dy, n)};
          }};
}

DualResult dual_relu(const Matrix& x) {
  return {relu(x), [x](const Matrix& dy) { return std::vector<Matrix>{relu_backward(x, dy)}; }};
}

DualResult dual_sigmoid(const Matrix& x) {
  Matrix y = sigmoid(x);
  return {y, [y](const Matrix& dy) { return std::vector<Matrix>{sigmoid_backward(y, dy)}; }};
}

DualResult dual_layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias) {
  LayerNormResult r = layer_norm(x, gain, bias);
  return {r.output, [cache = std::move(r.cache), gain](const Matrix& dy) {
            LayerNormGrads g = layer_norm_backward(cache, gain, dy);
            return std::vector<Matrix>{g.dx, g.dgain, g.dbias};
          }};
}

}  // namespace attnsent
