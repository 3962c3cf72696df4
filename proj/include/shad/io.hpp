#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace shad {

std::string read_file(const std::filesystem::path& path);
/// Writes atomically via a temporary sibling file.
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);
std::string file_hash(const std::filesystem::path& path);

/// Decimal with `digits` significant digits, e.g. format_sig(0.1234567891, 9).
std::string format_sig(double value, int digits = 9);
/// Round-trip through the decimal representation.
double round_sig(double value, int digits = 9);

void warn(std::string_view message);

}  // namespace shad
