#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace slim {

// One `key = value` line of a config file. `section` is the enclosing
// [header], empty at top level. List values are joined with commas.
struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
};

// Parses a `key = value` file with optional [section] headers and # comments.
// Throws IoError when the file cannot be read and ConfigError on bad syntax.
std::vector<ConfigEntry> load_config(const std::filesystem::path& path);

// Splits on commas and whitespace and parses each piece as a double.
std::vector<double> parse_number_list(const std::string& text);
// Same for positive integers; used for K lists.
std::vector<int> parse_int_list(const std::string& text);

}  // namespace slim
