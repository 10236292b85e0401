#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gacdr::text {

std::string_view trim(std::string_view s);

/// Splits on `sep`. With max_fields > 0 the last field keeps any remaining separators.
std::vector<std::string> split(std::string_view s, char sep, std::size_t max_fields = 0);

/// Splits on runs of ASCII whitespace.
std::vector<std::string> split_ws(std::string_view s);

/// Shortest round-trip text for a double; used wherever files must be byte-stable.
std::string format_real(double value);

/// Float32-precision text, for embedding files.
std::string format_float(float value);

}  // namespace gacdr::text
