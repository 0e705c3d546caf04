// Copyright 2026 The argus-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace argus {

/// Half-open character (byte) offsets [start, end) into UTF-8 text.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool empty() const { return end <= start; }
  bool overlaps(const Span& other) const { return start < other.end && other.start < end; }
  friend bool operator==(const Span&, const Span&) = default;
};

namespace text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// ASCII letters and digits; bytes of multi-byte UTF-8 sequences also count
/// as word characters so non-Latin words are not split apart.
inline bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

inline bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) != 0;
}

inline char fold(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 ? static_cast<char>(std::tolower(u)) : c;
}

inline std::string casefold(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = fold(c);
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

/// Normalized text plus, for every normalized byte, the offset of the
/// original byte it came from.
struct Normalized {
  std::string text;
  std::vector<std::size_t> origin;
};

struct NormalizeOptions {
  bool strip_punctuation = false;
};

/// Casefold, collapse whitespace runs to one space, trim the ends and
/// optionally drop ASCII punctuation.
inline Normalized normalize(std::string_view s, NormalizeOptions opts = {}) {
  Normalized out;
  out.text.reserve(s.size());
  out.origin.reserve(s.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (is_space(c)) {
      pending_space = !out.text.empty();
      continue;
    }
    if (opts.strip_punctuation && is_ascii_punct(c)) continue;
    if (pending_space) {
      out.text.push_back(' ');
      out.origin.push_back(i - 1);
      pending_space = false;
    }
    out.text.push_back(fold(c));
    out.origin.push_back(i);
  }
  return out;
}

/// Word boundary test on original text: the span is not glued to adjacent
/// word characters.
inline bool on_word_boundary(std::string_view s, Span span) {
  if (span.start > 0 && is_word_char(s[span.start - 1]) && is_word_char(s[span.start])) return false;
  if (span.end < s.size() && is_word_char(s[span.end]) && is_word_char(s[span.end - 1])) return false;
  return true;
}

/// BM25 tokenization: lowercase, split on anything that is not an ASCII
/// letter or digit.
inline std::vector<std::string> lexical_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Word tokens with their byte spans (runs of word characters).
inline std::vector<Span> word_spans(std::string_view s) {
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_char(s[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < s.size() && is_word_char(s[i])) ++i;
    out.push_back({start, i});
  }
  return out;
}

/// Text up to (not including) the first sentence terminator that is followed
/// by whitespace or the end of input.
inline std::string first_sentence(std::string_view s) {
  s = trim(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || is_space(s[i + 1]))) {
      return std::string(trim(s.substr(0, i)));
    }
  }
  return std::string(s);
}

/// Earliest case-insensitive, word-bounded occurrence of `needle` in `hay`.
inline bool find_word(std::string_view hay, std::string_view needle, Span& found) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  const std::string h = casefold(hay);
  const std::string n = casefold(needle);
  for (std::size_t pos = h.find(n); pos != std::string::npos; pos = h.find(n, pos + 1)) {
    const Span span{pos, pos + n.size()};
    if (on_word_boundary(hay, span)) {
      found = span;
      return true;
    }
  }
  return false;
}

}  // namespace text
}  // namespace argus
