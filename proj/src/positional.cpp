// SPDX-License-Identifier: Apache-2.0
#include "attnsent/positional.hpp"

#include <algorithm>
#include <cmath>

#include "attnsent/errors.hpp"
#include "attnsent/kernels.hpp"

namespace attnsent {

std::string to_string(Fusion f) { return f == Fusion::add ? "add" : "concat"; }

Fusion parse_fusion(const std::string& s) {
  if (s == "add") return Fusion::add;
  if (s == "concat") return Fusion::concat;
  throw ConfigError("unknown fusion mode '" + s + "' (expected add or concat)");
}

void PEConfig::validate(std::size_t d_emb) const {
  if (d_pe < 2 || d_pe % 2 != 0) {
    throw ConfigError("positional encoding width must be even and >= 2, got " +
                      std::to_string(d_pe));
  }
  if (max_len == 0) throw ConfigError("max_len must be >= 1");
  if (fusion == Fusion::add && d_pe != d_emb) {
    throw ConfigError("add fusion needs d_pe == d_emb, got d_pe " + std::to_string(d_pe) +
                      ", d_emb " + std::to_string(d_emb));
  }
}

Matrix sinusoidal_pe(std::size_t length, std::size_t d_pe) {
  if (d_pe < 2 || d_pe % 2 != 0) {
    throw ConfigError("positional encoding width must be even and >= 2, got " +
                      std::to_string(d_pe));
  }
  if (length == 0) throw ConfigError("positional encoding length must be >= 1");
  Matrix pe(length, d_pe);
  for (std::size_t p = 0; p < length; ++p) {
    const double position = static_cast<double>(p + 1);
    for (std::size_t c = 0; c < d_pe; c += 2) {
      const double angle =
          position / std::pow(10000.0, static_cast<double>(c) / static_cast<double>(d_pe));
      pe(p, c) = std::sin(angle);
      pe(p, c + 1) = std::cos(angle);
    }
  }
  return pe;
}

Matrix fuse_add(const Matrix& embedding, const Matrix& pe) {
  if (!embedding.same_shape(pe)) {
    throw ShapeError("fuse_add: embedding " + embedding.shape() + " vs encoding " + pe.shape());
  }
  return add(embedding, pe);
}

Matrix fuse_concat(const Matrix& embedding, const Matrix& pe) {
  if (embedding.rows() != pe.rows()) {
    throw ShapeError("fuse_concat: embedding " + embedding.shape() + " vs encoding " + pe.shape());
  }
  return concat_cols(embedding, pe);
}

PositionalTable::PositionalTable(std::size_t max_len, std::size_t d_pe)
    : PositionalTable(d_pe, sinusoidal_pe(std::max<std::size_t>(max_len, 1), d_pe), false) {}

PositionalTable::PositionalTable(std::size_t d_pe, Matrix table, bool zero)
    : d_pe_(d_pe), table_(std::move(table)), zero_(zero) {}

PositionalTable PositionalTable::zeroed(std::size_t max_len, std::size_t d_pe) {
  return PositionalTable(d_pe, Matrix(std::max<std::size_t>(max_len, 1), d_pe), true);
}

Matrix PositionalTable::rows(std::size_t n) const {
  if (n == 0) throw ShapeError("PositionalTable: zero rows requested");
  if (n > table_.rows()) return zero_ ? Matrix(n, d_pe_) : sinusoidal_pe(n, d_pe_);
  Matrix out(n, d_pe_);
  std::copy_n(table_.values().begin(), n * d_pe_, out.values().begin());
  return out;
}

}  // namespace attnsent
