#include "derivscope/tsv.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "derivscope/errors.hpp"

namespace derivscope::tsv {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.emplace_back(line.substr(start));
      break;
    }
    cols.emplace_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return cols;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  // fmt's default formatting is the shortest representation that round-trips.
  return fmt::format("{}", v);
}

std::string format_fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.{}f}", v, digits);
}

bool parse_double(std::string_view s, double& out) {
  if (s == "nan") {
    out = std::nan("");
    return true;
  }
  if (s == "inf" || s == "-inf") {
    out = s[0] == '-' ? -HUGE_VAL : HUGE_VAL;
    return true;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, std::int64_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
}

void expect_header(std::string_view line, std::string_view expected, std::string_view source_name) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line != expected) {
    throw DataError(fmt::format("{}:1: unexpected header '{}' (expected '{}')", source_name, line, expected));
  }
}

}  // namespace derivscope::tsv
