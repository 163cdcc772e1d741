// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnsent/matrix.hpp"

// Straight triple-loop serial kernels. Kept for testing the parallel
// kernels (bit-identical results expected) and as the benchmark baseline.
namespace attnsent::reference {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

}  // namespace attnsent::reference
