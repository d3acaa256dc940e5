#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fdnet::io {

// Little-endian IEEE-754 binary64 files.
void write_f64(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames over the target.
void write_text_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_text(const std::filesystem::path& path);

// Shortest round-trip representation; non-finite values print as inf/-inf/nan.
std::string format_double(double value);

// FNV-1a over the little-endian byte image of the values, as 16 hex digits.
std::string fingerprint(std::span<const double> values);

// Splits on a delimiter and trims ASCII whitespace from each piece.
std::vector<std::string> split_trimmed(std::string_view text, char delimiter);
std::string_view trim(std::string_view text);

}  // namespace fdnet::io
