#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mbrot::utf8 {

/// Length in bytes of the sequence introduced by `lead`. Invalid lead bytes
/// are treated as single-byte characters so malformed input never loops.
inline std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

/// Splits text into its characters (each one a UTF-8 byte sequence).
inline std::vector<std::string_view> characters(std::string_view text) {
  std::vector<std::string_view> out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    std::size_t len = sequence_length(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = text.size() - i;
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

inline std::size_t char_count(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < text.size();) {
    i += sequence_length(static_cast<unsigned char>(text[i]));
    ++n;
  }
  return n;
}

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

/// ASCII whitespace plus the ideographic space (U+3000) and NBSP (U+00A0).
inline bool is_space(std::string_view ch) {
  if (ch.size() == 1) return is_ascii_space(ch[0]);
  return ch == "　" || ch == " ";
}

inline std::string_view trim(std::string_view text) {
  auto chars = characters(text);
  std::size_t begin = 0;
  std::size_t end = chars.size();
  while (begin < end && is_space(chars[begin])) ++begin;
  while (end > begin && is_space(chars[end - 1])) --end;
  if (begin == end) return {};
  const char* first = chars[begin].data();
  const char* last = chars[end - 1].data() + chars[end - 1].size();
  return {first, static_cast<std::size_t>(last - first)};
}

/// Whitespace-delimited tokens.
inline std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = std::string_view::npos;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    bool space = i == text.size() || is_ascii_space(text[i]);
    if (space) {
      if (start != std::string_view::npos) {
        out.push_back(text.substr(start, i - start));
        start = std::string_view::npos;
      }
    } else if (start == std::string_view::npos) {
      start = i;
    }
  }
  return out;
}

}  // namespace mbrot::utf8
