#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ftg::text {

// Number of UTF-8 code points. Continuation bytes are not counted, so
// malformed input still yields a sensible length.
std::size_t utf8_length(std::string_view s);

// Answer normalization: ASCII casefold, trim, collapse inner whitespace runs
// to one space, strip leading/trailing ASCII punctuation.
std::string normalize(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace ftg::text
