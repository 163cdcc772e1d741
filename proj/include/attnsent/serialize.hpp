// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "attnsent/model.hpp"
#include "vendor_json.hpp"

// Model container, all integers little-endian:
//
//   offset 0   8 bytes   magic "ATNSENT1"
//              u32       format version (kFormatVersion)
//              u32       L, byte length of the config JSON
//              L bytes   canonical (sorted keys, compact) config JSON
//              u32       array count
//   per array: u32       name length, then the name bytes
//              u8        dtype tag (1 = f32, 2 = u32, 3 = u8)
//              u32       rank, then rank x u64 dims
//              payload   product(dims) elements
//
// Arrays: "vocab.words" (u8, words joined by '\n'), "vocab.counts" (u32),
// "embedding.words" (f32), "embedding.ngram_ids" (u32, written rows
// only, ascending), "embedding.ngram_rows" (f32), then every dense
// parameter in DenseParams::named() order (f32, rows x cols). Trailing
// bytes are an error.
namespace attnsent {

inline constexpr std::string_view kModelMagic = "ATNSENT1";
inline constexpr std::uint32_t kFormatVersion = 1;

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

std::string serialize_model(const Model& model);
// Throws FormatError naming the byte offset of the first problem; never
// returns a partially loaded model.
Model deserialize_model(std::string_view bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace attnsent
