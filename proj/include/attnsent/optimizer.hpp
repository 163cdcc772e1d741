// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "attnsent/model.hpp"

namespace attnsent {

enum class OptimizerKind { adam, sgd };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Applies one update. Embedding rows absent from grads are left alone.
  virtual void step(ModelParams& params, const Gradients& grads) = 0;
};

class SgdOptimizer final : public Optimizer {
 public:
  explicit SgdOptimizer(double learning_rate) : lr_(learning_rate) {}
  void step(ModelParams& params, const Gradients& grads) override;

 private:
  double lr_;
};

/// Adam on dense arrays; embedding rows use the sparse ("lazy") variant:
/// moments of a row only advance on steps that touch it, with bias
/// correction from the global step count.
class AdamOptimizer final : public Optimizer {
 public:
  AdamOptimizer(const ModelParams& params, const OptimizerConfig& config);
  void step(ModelParams& params, const Gradients& grads) override;

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  void update(std::span<double> w, std::span<const double> g, std::span<double> m,
              std::span<double> v) const;

  OptimizerConfig config_;
  std::uint64_t t_ = 0;
  double correction1_ = 1.0;
  double correction2_ = 1.0;
  DenseParams m_;
  DenseParams v_;
  std::unordered_map<std::int32_t, Moments> words_;
  std::unordered_map<std::uint32_t, Moments> ngrams_;
};

std::unique_ptr<Optimizer> make_optimizer(const ModelParams& params, const OptimizerConfig& config);

}  // namespace attnsent
