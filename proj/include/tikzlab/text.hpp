#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tikzlab::text {

struct DecodedText {
  std::string text;
  std::size_t replacements = 0;
};

/// Decodes bytes as UTF-8, replacing every invalid sequence with U+FFFD.
DecodedText decode_utf8_lossy(std::string_view bytes);

/// True if `s` contains U+FFFD.
bool has_replacement_char(std::string_view s);

std::string sha256_hex(std::string_view bytes);

std::uint64_t fnv1a64(std::string_view bytes);

/// Splits on '\n'. A trailing newline does not produce an empty last line.
std::vector<std::string_view> split_lines(std::string_view s);

/// Number of lines as counted by split_lines.
std::size_t count_lines(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string_view trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

/// Position of the first unescaped '%' on the line (TeX parity rule), or npos.
std::size_t comment_start(std::string_view line);

}  // namespace tikzlab::text
