#pragma once

#include <string>

#include <json.hpp>

#include "cbp/model.hpp"

namespace cbp {

/// Parses a model document. Throws ValidationError with position info on
/// malformed JSON and on schema violations.
ModelSpec model_from_json(const nlohmann::json& doc);
ModelSpec load_model_file(const std::string& path);

/// Canonical re-serialization (sorted keys, fixed field order) used both for
/// round-tripping and for hashing.
nlohmann::json model_to_json(const ModelSpec& spec);

/// FNV-1a 64-bit over the canonical serialization, as a fixed-width hex
/// string. Identical models hash identically regardless of input formatting.
std::string model_hash(const ModelSpec& spec);

}  // namespace cbp
