#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fitb {

/// Flat key=value settings. Keys are normalized to the CLI flag spelling
/// (lower case, '-' separators), so `batch_size` and `batch-size` are the
/// same key.
using Settings = std::map<std::string, std::string>;

std::string normalize_key(std::string_view key);

/// `#` starts a comment; blank lines are ignored; whitespace around keys and
/// values is trimmed. Throws MalformedRecord with the line number.
Settings parse_settings(std::string_view text, std::string_view source = "<memory>");
Settings load_settings(const std::string& path);

// Typed value parsing; each throws InvalidArgument naming the key.
std::int64_t parse_int(std::string_view key, std::string_view value);
std::uint64_t parse_uint(std::string_view key, std::string_view value);
double parse_double(std::string_view key, std::string_view value);
bool parse_bool(std::string_view key, std::string_view value);
/// Comma-separated positive integers, e.g. "512,128".
std::vector<std::size_t> parse_dims(std::string_view key, std::string_view value);
std::string format_dims(const std::vector<std::size_t>& dims);

}  // namespace fitb
