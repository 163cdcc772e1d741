// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "attnsent/matrix.hpp"
#include "attnsent/random.hpp"

namespace attnsent {

// One GRU layer. Gate convention: h <- z * h + (1 - z) * candidate.
struct GruParams {
  Matrix wz, wr, wc;  // d x u
  Matrix uz, ur, uc;  // u x u
  Matrix bz, br, bc;  // 1 x u

  std::size_t input_dim() const { return wz.rows(); }
  std::size_t units() const { return wz.cols(); }
  void validate() const;

  static GruParams zeros(std::size_t d, std::size_t u);
  static GruParams random(std::size_t d, std::size_t u, Rng& rng);
};

// Final hidden state (1 x u) after reading X (n x d) from h0 = 0.
Matrix gru_forward(const Matrix& x, const GruParams& params);

// GRU encoder followed by a 2-way softmax on the final state.
struct GruClassifier {
  GruParams gru;
  Matrix w;  // u x 2
  Matrix b;  // 1 x 2

  static GruClassifier random(std::size_t d, std::size_t u, Rng& rng);
  std::array<double, 2> forward(const Matrix& x) const;
};

}  // namespace attnsent
