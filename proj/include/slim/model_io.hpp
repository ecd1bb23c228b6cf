#pragma once

#include "slim/model.hpp"

#include <cstdint>
#include <filesystem>

namespace slim {

// Binary container: magic, format version, a key=value header with the model
// settings, then every parameter matrix as name, rows, cols and raw doubles
// in native little-endian order.
inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const ModelState& model, const std::filesystem::path& path);
// Throws IoError for missing, truncated or foreign files and for unknown versions.
ModelState load_model(const std::filesystem::path& path);

}  // namespace slim
