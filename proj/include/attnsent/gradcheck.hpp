// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "attnsent/model.hpp"
#include "attnsent/vendor_json.hpp"

namespace attnsent {

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-8);

// Central difference of loss() with respect to *x; *x is restored.
double central_difference(const std::function<double()>& loss, double& x, double eps);

// max_rel_error is normwise over the group:
//   max_k |a_k - n_k| / max(max_k |a_k|, max_k |n_k|, 1e-8).
// max_entry_rel_error is the worst per-entry relative_error, reported for
// information only; entries with near-zero gradient make it noisy.
struct GroupCheck {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double max_entry_rel_error = 0.0;
  double scale = 0.0;
  std::size_t entries = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GroupCheck> groups;
  double epsilon = 0.0;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::size_t seq_len = 3;
  std::uint64_t seed = 1;
  std::size_t label = 1;
  FocalParams focal;
};

/// The tiny model used by default: d_emb = d_pe = 8, 4 heads, every block on.
ModelConfig tiny_model_config();

/// Compares backward() with central differences on every named dense
/// array and on every embedding row the document touches. Throws
/// ConfigError for a non-positive epsilon or a config wider than 16, and
/// NumericError naming the array if an analytic gradient is not finite.
GradCheckReport grad_check(const ModelConfig& config, const GradCheckOptions& options = {});

nlohmann::json to_json(const GradCheckReport& report);

}  // namespace attnsent
