#include "fitb/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "binary_io.hpp"
#include "fitb/error.hpp"

namespace fitb {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  fail(ErrorKind::InvalidArgument, fmt::format("setting '{}': cannot parse '{}' as {}", key, value, expected));
}

template <class T>
T parse_number(std::string_view key, std::string_view value, std::string_view expected) {
  value = trim(value);
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty()) bad_value(key, value, expected);
  return out;
}

}  // namespace

std::string normalize_key(std::string_view key) {
  std::string out(trim(key));
  while (!out.empty() && out.front() == '-') out.erase(out.begin());
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '_') c = '-';
  }
  return out;
}

Settings parse_settings(std::string_view text, std::string_view source) {
  Settings settings;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::MalformedRecord, fmt::format("{}:{}: expected key=value", source, line_no));
    }
    std::string key = normalize_key(line.substr(0, eq));
    if (key.empty()) fail(ErrorKind::MalformedRecord, fmt::format("{}:{}: empty key", source, line_no));
    if (settings.contains(key)) {
      fail(ErrorKind::MalformedRecord, fmt::format("{}:{}: key '{}' set twice", source, line_no, key));
    }
    settings.emplace(std::move(key), std::string(trim(line.substr(eq + 1))));
  }
  return settings;
}

Settings load_settings(const std::string& path) { return parse_settings(detail::read_file(path), path); }

std::int64_t parse_int(std::string_view key, std::string_view value) {
  return parse_number<std::int64_t>(key, value, "an integer");
}

std::uint64_t parse_uint(std::string_view key, std::string_view value) {
  return parse_number<std::uint64_t>(key, value, "a non-negative integer");
}

double parse_double(std::string_view key, std::string_view value) {
  const double out = parse_number<double>(key, value, "a real number");
  if (!std::isfinite(out)) bad_value(key, value, "a finite real number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const std::string v = normalize_key(value);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_value(key, value, "a boolean");
}

std::vector<std::size_t> parse_dims(std::string_view key, std::string_view value) {
  std::vector<std::size_t> dims;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t comma = value.find(',', start);
    if (comma == std::string_view::npos) comma = value.size();
    const auto dim = parse_number<std::size_t>(key, value.substr(start, comma - start), "a list of positive integers");
    if (dim == 0) bad_value(key, value, "a list of positive integers");
    dims.push_back(dim);
    start = comma + 1;
  }
  return dims;
}

std::string format_dims(const std::vector<std::size_t>& dims) { return fmt::format("{}", fmt::join(dims, ",")); }

}  // namespace fitb
