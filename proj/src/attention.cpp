// SPDX-License-Identifier: Apache-2.0
#include "attnsent/attention.hpp"

#include <algorithm>
#include <cmath>

#include "attnsent/errors.hpp"
#include "attnsent/kernels.hpp"
#include "attnsent/parallel.hpp"

namespace attnsent {

PadMask::PadMask(std::vector<bool> valid) : valid_(valid.begin(), valid.end()) {
  if (valid_.empty()) throw ShapeError("PadMask: empty sequence");
  if (valid_count() == 0) throw ShapeError("PadMask: fully masked sequence");
}

PadMask PadMask::all_valid(std::size_t n) { return PadMask(std::vector<bool>(n, true)); }

std::size_t PadMask::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

ScaledDotProduct scaled_dot_product_forward(const Matrix& q, const Matrix& k, const Matrix& v,
                                            const PadMask* mask) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw ShapeError("scaled_dot_product: Q " + q.shape() + ", K " + k.shape() + ", V " +
                     v.shape());
  }
  if (mask != nullptr && mask->size() != k.rows()) {
    throw ShapeError("scaled_dot_product: mask length " + std::to_string(mask->size()) +
                     " for " + std::to_string(k.rows()) + " keys");
  }
  Matrix scores = matmul_nt(q, k);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  for (double& s : scores.values()) s *= inv_scale;
  if (mask != nullptr) {
    for (std::size_t i = 0; i < scores.rows(); ++i)
      for (std::size_t j = 0; j < scores.cols(); ++j)
        if (!mask->valid(j)) scores(i, j) += kMaskBias;
  }
  Matrix weights = softmax_rows(scores);
  Matrix out = matmul(weights, v);
  return {std::move(out), std::move(weights)};
}

Matrix scaled_dot_product(const Matrix& q, const Matrix& k, const Matrix& v) {
  return scaled_dot_product_forward(q, k, v).output;
}

Matrix scaled_dot_product(const Matrix& q, const Matrix& k, const Matrix& v, const PadMask& mask) {
  return scaled_dot_product_forward(q, k, v, &mask).output;
}

AttentionGrads scaled_dot_product_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                           const Matrix& weights, const Matrix& dout) {
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix dweights = matmul_nt(dout, v);
  Matrix dv = matmul_tn(weights, dout);
  Matrix dscores = softmax_rows_backward(weights, dweights);
  for (double& s : dscores.values()) s *= inv_scale;
  return {matmul(dscores, k), matmul_tn(dscores, q), std::move(dv)};
}

MultiHeadParams MultiHeadParams::random(std::size_t d_model, std::size_t heads, Rng& rng) {
  if (heads == 0 || d_model == 0 || d_model % heads != 0) {
    throw ConfigError("multi-head attention: " + std::to_string(heads) +
                      " heads do not divide d_model " + std::to_string(d_model));
  }
  const std::size_t dk = d_model / heads;
  MultiHeadParams p{{}, Matrix(1, 1)};
  p.heads.reserve(heads);
  for (std::size_t i = 0; i < heads; ++i) {
    Matrix wq = scaled_uniform(d_model, dk, rng);
    Matrix wk = scaled_uniform(d_model, dk, rng);
    Matrix wv = scaled_uniform(d_model, dk, rng);
    p.heads.push_back({std::move(wq), std::move(wk), std::move(wv)});
  }
  p.wo = scaled_uniform(heads * dk, d_model, rng);
  return p;
}

MultiHeadParams MultiHeadParams::zeros(std::size_t d_model, std::size_t heads) {
  if (heads == 0 || d_model == 0 || d_model % heads != 0) {
    throw ConfigError("multi-head attention: " + std::to_string(heads) +
                      " heads do not divide d_model " + std::to_string(d_model));
  }
  const std::size_t dk = d_model / heads;
  MultiHeadParams p{{}, Matrix(heads * dk, d_model)};
  for (std::size_t i = 0; i < heads; ++i) {
    p.heads.push_back({Matrix(d_model, dk), Matrix(d_model, dk), Matrix(d_model, dk)});
  }
  return p;
}

void MultiHeadParams::validate() const {
  if (heads.empty()) throw ConfigError("multi-head attention: no heads");
  const std::size_t d = wo.cols();
  const std::size_t h = heads.size();
  if (d % h != 0) {
    throw ConfigError("multi-head attention: " + std::to_string(h) +
                      " heads do not divide d_model " + std::to_string(d));
  }
  const std::size_t dk = d / h;
  for (const auto& head : heads) {
    for (const Matrix* w : {&head.wq, &head.wk, &head.wv}) {
      if (w->rows() != d || w->cols() != dk) {
        throw ConfigError("multi-head attention: head projection " + w->shape() + ", expected " +
                          std::to_string(d) + "x" + std::to_string(dk));
      }
    }
  }
  if (wo.rows() != h * dk) {
    throw ConfigError("multi-head attention: Wo " + wo.shape() + " for " + std::to_string(h) +
                      " heads of width " + std::to_string(dk));
  }
}

MultiHeadResult multi_head_forward(const Matrix& x, const MultiHeadParams& params,
                                   const PadMask* mask) {
  if (x.cols() != params.d_model()) {
    throw ShapeError("multi_head: input " + x.shape() + " for d_model " +
                     std::to_string(params.d_model()));
  }
  const std::size_t h = params.head_count();
  const std::size_t dk = params.head_dim();
  const Matrix placeholder(1, 1);
  MultiHeadTrace t{x, std::vector<Matrix>(h, placeholder), std::vector<Matrix>(h, placeholder),
                   std::vector<Matrix>(h, placeholder), std::vector<Matrix>(h, placeholder),
                   Matrix(x.rows(), h * dk)};
  std::vector<Matrix> outputs(h, placeholder);

  auto run_head = [&](std::size_t i) {
    const auto& head = params.heads[i];
    t.q[i] = matmul(x, head.wq);
    t.k[i] = matmul(x, head.wk);
    t.v[i] = matmul(x, head.wv);
    ScaledDotProduct r = scaled_dot_product_forward(t.q[i], t.k[i], t.v[i], mask);
    outputs[i] = std::move(r.output);
    t.weights[i] = std::move(r.weights);
  };
  if (thread_count() > 1 && h > 1) {
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(h); ++i) run_head(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < h; ++i) run_head(i);
  }

  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto src = outputs[i].row(r);
      std::copy(src.begin(), src.end(),
                t.concat.row(r).begin() + static_cast<std::ptrdiff_t>(i * dk));
    }
  Matrix out = matmul(t.concat, params.wo);
  return {std::move(out), std::move(t)};
}

Matrix multi_head(const Matrix& x, const MultiHeadParams& params) {
  return multi_head_forward(x, params).output;
}

Matrix multi_head(const Matrix& x, const MultiHeadParams& params, const PadMask& mask) {
  return multi_head_forward(x, params, &mask).output;
}

MultiHeadGrads multi_head_backward(const MultiHeadTrace& trace, const MultiHeadParams& params,
                                   const Matrix& dout) {
  const std::size_t h = params.head_count();
  const std::size_t dk = params.head_dim();
  MultiHeadGrads g{Matrix(trace.x.rows(), trace.x.cols()),
                   MultiHeadParams::zeros(params.d_model(), h)};
  g.dparams.wo = matmul_tn(trace.concat, dout);
  const Matrix dconcat = matmul_nt(dout, params.wo);

  const Matrix placeholder(1, 1);
  std::vector<Matrix> dx_parts(h, placeholder);
  auto run_head = [&](std::size_t i) {
    const auto& head = params.heads[i];
    const Matrix dhead = slice_cols(dconcat, i * dk, dk);
    AttentionGrads ag =
        scaled_dot_product_backward(trace.q[i], trace.k[i], trace.v[i], trace.weights[i], dhead);
    g.dparams.heads[i].wq = matmul_tn(trace.x, ag.dq);
    g.dparams.heads[i].wk = matmul_tn(trace.x, ag.dk);
    g.dparams.heads[i].wv = matmul_tn(trace.x, ag.dv);
    Matrix dx = matmul_nt(ag.dq, head.wq);
    add_inplace(dx, matmul_nt(ag.dk, head.wk));
    add_inplace(dx, matmul_nt(ag.dv, head.wv));
    dx_parts[i] = std::move(dx);
  };
  if (thread_count() > 1 && h > 1) {
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(h); ++i) run_head(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < h; ++i) run_head(i);
  }
  // Fixed head order keeps the sum independent of scheduling.
  for (const Matrix& part : dx_parts) add_inplace(g.dx, part);
  return g;
}

}  // namespace attnsent
