#pragma once

// Small text and file helpers shared by the loaders and writers.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace propdetect {

/// Decodes UTF-8 into Unicode scalar values. Throws DataError on invalid input;
/// `context` is prepended to the message.
std::u32string utf8_decode(std::string_view bytes, std::string_view context = {});
std::string utf8_encode(std::u32string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Splits on a single separator character, keeping empty fields.
std::vector<std::string> split(std::string_view line, char sep);

/// Splits file content into lines on LF; a trailing LF does not produce an
/// extra empty line. A CR before the LF is kept.
std::vector<std::string> split_lines(std::string_view content);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Strict full-field numeric parses; return false on any trailing garbage.
bool parse_double(std::string_view field, double& out);
bool parse_int(std::string_view field, long long& out);

/// Deterministic 64-bit seed for a named random substream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

}  // namespace propdetect
