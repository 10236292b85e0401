#include "gacdr/text_util.hpp"

#include <array>
#include <charconv>

namespace gacdr::text {

namespace {
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
}  // namespace

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view s, char sep, std::size_t max_fields) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  std::vector<std::string> out;
  for (;;) {
    if (max_fields > 0 && out.size() + 1 == max_fields) {
      out.emplace_back(s);
      return out;
    }
    auto pos = s.find(sep);
    if (pos == std::string_view::npos) {
      out.emplace_back(s);
      return out;
    }
    out.emplace_back(s.substr(0, pos));
    s.remove_prefix(pos + 1);
  }
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string format_real(double value) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::string format_float(float value) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

}  // namespace gacdr::text
