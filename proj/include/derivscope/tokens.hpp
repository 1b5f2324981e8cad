#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace derivscope {

using Token = std::string;
using Tokens = std::vector<Token>;

/// Whitespace tokenization. Punctuation stays attached as written.
Tokens split_tokens(std::string_view line);

std::string join_tokens(const Tokens& tokens);

/// Returns the byte offset of the first invalid UTF-8 sequence, or npos.
std::size_t find_invalid_utf8(std::string_view text);

}  // namespace derivscope
