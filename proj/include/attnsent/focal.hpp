// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace attnsent {

inline constexpr double kProbabilityFloor = 1e-12;

struct FocalParams {
  double gamma = 2.0;
  std::array<double, 2> alpha{1.0, 1.0};

  void validate() const;
};

/// -alpha_y * (1 - p_y)^gamma * log(p_y), with p_y clamped to
/// [kProbabilityFloor, 1]. gamma = 0 and alpha = 1 give cross-entropy.
/// Throws NumericError unless probs is a finite probability vector.
double focal_loss(std::span<const double> probs, std::size_t label, const FocalParams& params);

// d loss / d logits, where probs = softmax(logits).
std::array<double, 2> focal_loss_logit_grad(std::span<const double> probs, std::size_t label,
                                            const FocalParams& params);

}  // namespace attnsent
