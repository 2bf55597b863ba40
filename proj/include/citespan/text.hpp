#pragma once

// Shared text helpers: the tokenizer used by every lexical feature and
// metric, plus small string utilities.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace citespan {

// Token characters are ASCII alphanumerics plus any non-ASCII byte, so
// UTF-8 sequences stay inside one token instead of being split per byte.
inline bool is_token_char(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

inline bool is_space(unsigned char c) { return std::isspace(c) != 0; }

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](char c) { return ascii_lower(c); });
  return out;
}

// Lowercase, split on runs of non-alphanumeric characters, drop empties.
// No stemming, no stopword removal.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (is_token_char(static_cast<unsigned char>(ch))) {
      current.push_back(ascii_lower(ch));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  for (char ch : text) {
    bool t = is_token_char(static_cast<unsigned char>(ch));
    if (t && !in_token) ++n;
    in_token = t;
  }
  return n;
}

inline bool all_whitespace(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return is_space(static_cast<unsigned char>(c)); });
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// 64-bit mix (splitmix64 finalizer); used to derive independent RNG
// streams from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace citespan
