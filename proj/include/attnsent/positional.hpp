// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

#include "attnsent/matrix.hpp"

namespace attnsent {

enum class Fusion { add, concat };

std::string to_string(Fusion f);
// "add" or "concat"; throws ConfigError otherwise.
Fusion parse_fusion(const std::string& s);

struct PEConfig {
  std::size_t d_pe = 384;
  std::size_t max_len = 256;
  Fusion fusion = Fusion::concat;

  // Throws ConfigError: d_pe must be even and >= 2; add fusion needs
  // d_pe == d_emb.
  void validate(std::size_t d_emb) const;
};

/// length x d_pe sinusoidal encoding. Position is 1-based; column 2i holds
/// sin(pos / 10000^(2i/d_pe)) and column 2i+1 the matching cosine.
Matrix sinusoidal_pe(std::size_t length, std::size_t d_pe);

// Elementwise sum; shapes must match.
Matrix fuse_add(const Matrix& embedding, const Matrix& pe);
// Embedding columns first, then the encoding columns.
Matrix fuse_concat(const Matrix& embedding, const Matrix& pe);

/// Encoding precomputed up to max_len. Longer requests are computed on
/// the fly; the prefix property makes them agree with the cached rows.
class PositionalTable {
 public:
  PositionalTable(std::size_t max_len, std::size_t d_pe);
  // All-zero table of the same shape, for ablations.
  static PositionalTable zeroed(std::size_t max_len, std::size_t d_pe);

  std::size_t width() const { return d_pe_; }
  bool is_zero() const { return zero_; }
  Matrix rows(std::size_t n) const;

 private:
  PositionalTable(std::size_t d_pe, Matrix table, bool zero);

  std::size_t d_pe_;
  Matrix table_;
  bool zero_ = false;
};

}  // namespace attnsent
