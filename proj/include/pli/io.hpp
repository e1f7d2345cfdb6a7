#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pli/core/linalg.hpp"
#include "pli/distributions.hpp"

namespace pli {

/// Shortest round-trip decimal form (17 significant digits).
std::string format_double(double v);

/// Headered decimal text: "# pli-array v1 rows=R cols=C", then one comma-separated row per line.
std::string array_to_text(const Matrix& m);
Matrix array_from_text(const std::string& text);
void write_array(const std::filesystem::path& path, const Matrix& m);
Matrix read_array(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
/// Writes through a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

using KeyValues = std::map<std::string, std::string>;

/// "key = value" lines; '#' starts a comment. Throws ConfigError on malformed
/// lines or repeated keys.
KeyValues parse_key_values(const std::string& text, const std::string& origin = "<input>");
std::string key_values_to_text(const KeyValues& kv);

/// Flat key/value encoding of a density model, prefixed by `prefix`.
void model_to_key_values(const DensityModel& model, const std::string& prefix, KeyValues& out);
DensityModel model_from_key_values(const KeyValues& kv, const std::string& prefix);

std::string join_doubles(const std::vector<double>& values, char sep = ' ');
std::vector<double> split_doubles(const std::string& text);

}  // namespace pli
