#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace panelvit {

/// Ordered `key=value` pairs from text. Blank lines and lines starting
/// with '#' are skipped; whitespace around keys and values is trimmed.
/// A line without '=' or a repeated key is a ConfigError mentioning
/// `source` and the line number.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text,
                                                                  const std::string& source);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

double parse_double(const std::string& text, const std::string& key);
std::size_t parse_size(const std::string& text, const std::string& key);
std::uint64_t parse_u64(const std::string& text, const std::string& key);
bool parse_bool(const std::string& text, const std::string& key);

/// Comma-separated fields; empty input yields no fields.
std::vector<std::string> split_list(const std::string& text, char sep = ',');

}  // namespace panelvit
