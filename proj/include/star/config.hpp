#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "star/eval.hpp"

// Flat key-file configuration (star.toml / exp.toml): one `section.key =
// value` assignment per line, `#` comments, nothing nested. Unknown keys are
// rejected by name rather than ignored, so a typo cannot silently run a
// different experiment. weights.json is a flat check_id -> weight map
// validated against the audit catalog.

namespace star {

// Raw parse: returns assignments in file order. Throws std::invalid_argument
// with the line number for malformed lines and duplicated keys.
std::map<std::string, std::string> parse_flat_config(const std::string& text);

// Applies one assignment; throws std::invalid_argument naming the key path
// when the key is unknown or the value fails to parse. The full key list
// lives in docs/config.md.
void apply_config_key(EvalConfig& cfg, const std::string& key,
                      const std::string& value);

// Defaults overlaid with every assignment in the text/file.
EvalConfig config_from_text(const std::string& text);
EvalConfig load_config(const std::filesystem::path& file);

// Loads and validates audit check weights.
std::map<std::string, double> load_weights(const std::filesystem::path& file);

}  // namespace star
