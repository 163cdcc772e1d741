// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "attnsent/matrix.hpp"
#include "attnsent/random.hpp"

namespace attnsent {

/// Marks which key positions may be attended to. At least one position is
/// always valid; construction rejects a fully masked sequence.
class PadMask {
 public:
  explicit PadMask(std::vector<bool> valid);
  static PadMask all_valid(std::size_t n);

  std::size_t size() const { return valid_.size(); }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  std::size_t valid_count() const;

 private:
  std::vector<std::uint8_t> valid_;
};

// Additive pre-softmax bias applied to masked key columns.
inline constexpr double kMaskBias = -1e9;

struct ScaledDotProduct {
  Matrix output;   // m x d_v
  Matrix weights;  // m x n, rows are distributions over keys
};

/// softmax(Q K^T / sqrt(d) + mask bias) V, where d is the key width
/// (Q.cols()). Q is m x d, K is n x d, V is n x d_v.
ScaledDotProduct scaled_dot_product_forward(const Matrix& q, const Matrix& k, const Matrix& v,
                                            const PadMask* mask = nullptr);
Matrix scaled_dot_product(const Matrix& q, const Matrix& k, const Matrix& v);
Matrix scaled_dot_product(const Matrix& q, const Matrix& k, const Matrix& v, const PadMask& mask);

struct AttentionGrads {
  Matrix dq;
  Matrix dk;
  Matrix dv;
};

AttentionGrads scaled_dot_product_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                           const Matrix& weights, const Matrix& dout);

struct AttentionHeadParams {
  Matrix wq;  // d_model x d_k
  Matrix wk;  // d_model x d_k
  Matrix wv;  // d_model x d_v
};

/// Projections of all heads plus the output mixing matrix. No biases.
struct MultiHeadParams {
  std::vector<AttentionHeadParams> heads;
  Matrix wo;  // h*d_v x d_model

  std::size_t head_count() const { return heads.size(); }
  std::size_t d_model() const { return wo.cols(); }
  std::size_t head_dim() const { return heads.front().wq.cols(); }

  // Throws ConfigError when h does not divide d_model or h == 0.
  static MultiHeadParams random(std::size_t d_model, std::size_t heads, Rng& rng);
  static MultiHeadParams zeros(std::size_t d_model, std::size_t heads);
  // Throws ConfigError on inconsistent shapes.
  void validate() const;
};

struct MultiHeadTrace {
  Matrix x;
  std::vector<Matrix> q, k, v, weights;
  Matrix concat;  // n x h*d_v
};

struct MultiHeadResult {
  Matrix output;
  MultiHeadTrace trace;
};

/// Concat(head_1..head_h) Wo with head_i = Attention(X Wq_i, X Wk_i, X Wv_i).
/// Heads are evaluated in parallel when thread_count() > 1; results are
/// identical to sequential evaluation.
MultiHeadResult multi_head_forward(const Matrix& x, const MultiHeadParams& params,
                                   const PadMask* mask = nullptr);
Matrix multi_head(const Matrix& x, const MultiHeadParams& params);
Matrix multi_head(const Matrix& x, const MultiHeadParams& params, const PadMask& mask);

struct MultiHeadGrads {
  Matrix dx;
  MultiHeadParams dparams;
};

MultiHeadGrads multi_head_backward(const MultiHeadTrace& trace, const MultiHeadParams& params,
                                   const Matrix& dout);

}  // namespace attnsent
