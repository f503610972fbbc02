#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace loadseg {

/// Split one delimited line, honouring double-quoted fields ("" escapes a quote).
std::vector<std::string> split_delimited(std::string_view line, char delimiter);

/// Quote a field for CSV output when it contains the delimiter, a quote or a newline.
std::string csv_field(std::string_view value, char delimiter = ',');

/// Shortest round-trip decimal form. Infinities print as "inf"/"-inf", NaN as "nan".
std::string format_double(double value);

/// Strict full-string parse; surrounding blanks are tolerated. Accepts "nan"/"inf".
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

std::string_view trim(std::string_view text);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ULL);
std::string hex64(std::uint64_t value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace loadseg
