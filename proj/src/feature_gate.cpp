// SPDX-License-Identifier: Apache-2.0
#include "attnsent/feature_gate.hpp"

#include "attnsent/errors.hpp"
#include "attnsent/kernels.hpp"

namespace attnsent {

namespace {

void check_reduction(std::size_t d_model, std::size_t reduction) {
  if (reduction == 0 || d_model == 0 || d_model % reduction != 0) {
    throw ConfigError("feature gate: reduction ratio " + std::to_string(reduction) +
                      " does not divide d_model " + std::to_string(d_model));
  }
}

}  // namespace

SEParams SEParams::random(std::size_t d_model, std::size_t reduction, Rng& rng) {
  check_reduction(d_model, reduction);
  const std::size_t mid = d_model / reduction;
  Matrix fc1 = scaled_uniform(d_model, mid, rng);
  Matrix fc2 = scaled_uniform(mid, d_model, rng);
  return {std::move(fc1), std::move(fc2), reduction};
}

SEParams SEParams::zeros(std::size_t d_model, std::size_t reduction) {
  check_reduction(d_model, reduction);
  const std::size_t mid = d_model / reduction;
  return {Matrix(d_model, mid), Matrix(mid, d_model), reduction};
}

Matrix masked_average_pool(const Matrix& x, const PadMask* mask) {
  if (mask == nullptr) return global_average_pool(x);
  if (mask->size() != x.rows()) {
    throw ShapeError("masked_average_pool: mask length " + std::to_string(mask->size()) +
                     " for input " + x.shape());
  }
  Matrix s(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (!mask->valid(i)) continue;
    for (std::size_t j = 0; j < x.cols(); ++j) s(0, j) += x(i, j);
  }
  const double inv = 1.0 / static_cast<double>(mask->valid_count());
  for (double& v : s.values()) v *= inv;
  return s;
}

FeatureGateResult squeeze_excite_forward(const Matrix& x, const SEParams& params,
                                         const PadMask* mask) {
  if (x.cols() != params.d_model()) {
    throw ShapeError("squeeze_excite: input " + x.shape() + " for d_model " +
                     std::to_string(params.d_model()));
  }
  Matrix squeeze = masked_average_pool(x, mask);
  Matrix hidden_pre = matmul(squeeze, params.fc1);
  Matrix hidden = relu(hidden_pre);
  Matrix gate = sigmoid(matmul(hidden, params.fc2));

  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] *= gate(0, j);
  }
  std::optional<PadMask> kept;
  if (mask != nullptr) kept = *mask;
  return {std::move(out),
          {x, std::move(kept), std::move(squeeze), std::move(hidden_pre), std::move(hidden),
           std::move(gate)}};
}

Matrix squeeze_excite(const Matrix& x, const SEParams& params) {
  return squeeze_excite_forward(x, params).output;
}

Matrix squeeze_excite(const Matrix& x, const SEParams& params, const PadMask& mask) {
  return squeeze_excite_forward(x, params, &mask).output;
}

FeatureGateGrads squeeze_excite_backward(const FeatureGateTrace& t, const SEParams& params,
                                         const Matrix& dout) {
  if (!dout.same_shape(t.x)) {
    throw ShapeError("squeeze_excite_backward: upstream " + dout.shape() + " for input " +
                     t.x.shape());
  }
  const std::size_t n = t.x.rows();
  const std::size_t d = t.x.cols();
  Matrix dx(n, d);
  Matrix dgate(1, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      dx(i, j) = dout(i, j) * t.gate(0, j);
      dgate(0, j) += dout(i, j) * t.x(i, j);
    }
  const Matrix dgate_pre = sigmoid_backward(t.gate, dgate);
  Matrix dfc2 = matmul_tn(t.hidden, dgate_pre);
  const Matrix dhidden_pre = relu_backward(t.hidden_pre, matmul_nt(dgate_pre, params.fc2));
  Matrix dfc1 = matmul_tn(t.squeeze, dhidden_pre);
  const Matrix dsqueeze = matmul_nt(dhidden_pre, params.fc1);

  const std::size_t count = t.mask ? t.mask->valid_count() : n;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < n; ++i) {
    if (t.mask && !t.mask->valid(i)) continue;
    for (std::size_t j = 0; j < d; ++j) dx(i, j) += dsqueeze(0, j) * inv;
  }
  return {std::move(dx), std::move(dfc1), std::move(dfc2)};
}

}  // namespace attnsent
