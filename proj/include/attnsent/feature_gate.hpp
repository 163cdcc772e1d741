// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>

#include "attnsent/attention.hpp"
#include "attnsent/matrix.hpp"
#include "attnsent/random.hpp"

namespace attnsent {

inline constexpr std::size_t kDefaultReduction = 4;

/// Bottleneck weights of the embedding feature gate. fc1 reduces d_model
/// to d_model / r, fc2 restores it. No biases.
struct SEParams {
  Matrix fc1;
  Matrix fc2;
  std::size_t reduction = kDefaultReduction;

  std::size_t d_model() const { return fc1.rows(); }

  // Throw ConfigError unless r >= 1 divides d_model.
  static SEParams random(std::size_t d_model, std::size_t reduction, Rng& rng);
  static SEParams zeros(std::size_t d_model, std::size_t reduction);
};

struct FeatureGateTrace {
  Matrix x;
  std::optional<PadMask> mask;
  Matrix squeeze;  // 1 x d, masked column mean of x
  Matrix hidden_pre;  // squeeze * fc1
  Matrix hidden;      // relu(hidden_pre)
  Matrix gate;        // sigmoid(hidden * fc2), entries in (0, 1)
};

struct FeatureGateResult {
  Matrix output;  // x with column j scaled by gate[j]
  FeatureGateTrace trace;
};

/// Squeeze (masked global average pool), excite (relu bottleneck then
/// sigmoid), rescale every position by the same per-feature gate.
FeatureGateResult squeeze_excite_forward(const Matrix& x, const SEParams& params,
                                         const PadMask* mask = nullptr);
Matrix squeeze_excite(const Matrix& x, const SEParams& params);
Matrix squeeze_excite(const Matrix& x, const SEParams& params, const PadMask& mask);

// Masked column mean; masked rows are excluded from numerator and count.
Matrix masked_average_pool(const Matrix& x, const PadMask* mask);

struct FeatureGateGrads {
  Matrix dx;
  Matrix dfc1;
  Matrix dfc2;
};

FeatureGateGrads squeeze_excite_backward(const FeatureGateTrace& trace, const SEParams& params,
                                         const Matrix& dout);

}  // namespace attnsent
