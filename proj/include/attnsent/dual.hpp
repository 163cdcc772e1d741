// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "attnsent/matrix.hpp"

namespace attnsent {

/// Output of a kernel paired with its backward map. `backward(dy)` returns
/// the gradient for each input, in argument order. An all-zero dy maps to
/// all-zero input gradients.
struct DualResult {
  Matrix output;
  std::function<std::vector<Matrix>(const Matrix& dy)> backward;
};

DualResult dual_matmul(const Matrix& a, const Matrix& b);
DualResult dual_softmax_rows(const Matrix& m);
DualResult dual_global_average_pool(const Matrix& x);
DualResult dual_relu(const Matrix& x);
DualResult dual_sigmoid(const Matrix& x);
// Inputs: x, gain, bias.
DualResult dual_layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias);

}  // namespace attnsent
