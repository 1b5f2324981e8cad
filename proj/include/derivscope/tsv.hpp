#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace derivscope::tsv {

std::vector<std::string> split(std::string_view line);

/// Shortest round-tripping decimal; "nan", "inf", "-inf" for non-finite.
std::string format_double(double v);

/// Fixed-point with the given digits, used for human-facing tables.
std::string format_fixed(double v, int digits);

bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, std::int64_t& out);

/// Throws DataError naming the source when header differs from expected.
void expect_header(std::string_view line, std::string_view expected, std::string_view source_name);

}  // namespace derivscope::tsv
