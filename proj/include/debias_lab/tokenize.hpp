#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace debias {

inline bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
         (c >= '{' && c <= '~');
}

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Lowercases ASCII, splits on whitespace, strips leading/trailing ASCII
// punctuation from each piece and drops pieces that become empty. Non-ASCII
// bytes pass through untouched.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    std::size_t end = i;
    while (end < text.size() && !is_ascii_space(text[end])) ++end;
    std::size_t lo = i, hi = end;
    while (lo < hi && is_ascii_punct(text[lo])) ++lo;
    while (hi > lo && is_ascii_punct(text[hi - 1])) --hi;
    if (lo < hi) {
      std::string token(text.substr(lo, hi - lo));
      for (char& c : token) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      }
      tokens.push_back(std::move(token));
    }
    i = end;
  }
  return tokens;
}

}  // namespace debias
