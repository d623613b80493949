#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xlprime {

/// Canonical composed (NFC) form of UTF-8 text. Throws Error(MalformedFile)
/// on invalid UTF-8.
std::string nfc(std::string_view utf8);

bool is_valid_utf8(std::string_view text);

std::string_view trim(std::string_view text);

std::vector<std::string_view> split(std::string_view text, char sep);

/// Whitespace-separated words, runs of whitespace collapsed.
std::vector<std::string_view> words(std::string_view text);

bool starts_with(std::string_view text, std::string_view prefix);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::string& path);

/// Writes via a temporary sibling and rename, so readers never observe a torn file.
void write_file_atomic(const std::string& path, std::string_view bytes);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

} // namespace xlprime
