#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pmiris::io {

/// Writes `content` to a temporary sibling and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Splits one CSV line on commas. Fields are not quoted in any format we emit.
std::vector<std::string> split_csv_line(std::string_view line);

/// Splits text into lines, dropping a trailing '\r' on each.
std::vector<std::string> split_lines(std::string_view text);

std::string trim(std::string_view s);

/// Shortest decimal representation that round-trips exactly.
std::string format_double(double value);

/// Strict parse of a whole field; throws InvalidInput on trailing junk.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

}  // namespace pmiris::io
