// SPDX-License-Identifier: Apache-2.0
#include "attnsent/focal.hpp"

#include <cmath>
#include <string>

#include "attnsent/errors.hpp"

namespace attnsent {

namespace {

void check_probs(std::span<const double> probs, std::size_t label) {
  if (probs.size() != 2) throw NumericError("focal loss expects 2 class probabilities");
  if (label >= probs.size()) throw NumericError("label " + std::to_string(label) + " out of range");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw NumericError("invalid probability " + std::to_string(p));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw NumericError("probabilities sum to " + std::to_string(sum) + ", expected 1");
  }
}

}  // namespace

void FocalParams::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ConfigError("focal gamma must be >= 0, got " + std::to_string(gamma));
  }
  for (double a : alpha)
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("focal alpha must be > 0");
}

double focal_loss(std::span<const double> probs, std::size_t label, const FocalParams& params) {
  check_probs(probs, label);
  const double p = std::max(probs[label], kProbabilityFloor);
  const double q = 1.0 - p;
  const double damp = params.gamma == 0.0 ? 1.0 : std::pow(q, params.gamma);
  return -params.alpha[label] * damp * std::log(p);
}

std::array<double, 2> focal_loss_logit_grad(std::span<const double> probs, std::size_t label,
                                            const FocalParams& params) {
  check_probs(probs, label);
  const double p = probs[label];
  if (p < kProbabilityFloor) return {0.0, 0.0};  // clamped: flat in p
  const double q = 1.0 - p;
  const double g = params.gamma;
  // dL/dp * p = -alpha * ((1-p)^g - g (1-p)^(g-1) p log p)
  const double damp = g == 0.0 ? 1.0 : std::pow(q, g);
  const double slope = (g == 0.0 || q == 0.0) ? 0.0 : g * std::pow(q, g - 1.0) * p * std::log(p);
  const double dl_dp_times_p = -params.alpha[label] * (damp - slope);
  std::array<double, 2> grad{};
  for (std::size_t k = 0; k < 2; ++k) {
    grad[k] = dl_dp_times_p * ((k == label ? 1.0 : 0.0) - probs[k]);
  }
  return grad;
}

}  // namespace attnsent
