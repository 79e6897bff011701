#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace goalkp {

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

// Runs of internal whitespace become a single space.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char c : s) {
    if (is_ascii_space(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

// Splits on '\n', dropping a trailing '\r' from each line (CRLF input).
inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines = split(s, '\n');
  for (std::string& line : lines) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
  }
  return lines;
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  }
  return true;
}

// Canonical form for goals and reference keyphrases: lowercase, trimmed,
// internal whitespace collapsed.
inline std::string normalize_reference(std::string_view s) {
  return collapse_whitespace(trim_view(ascii_lower(s)));
}

// Cleaning for sampled model output: trim, strip surrounding quotes and
// trailing periods, then normalize like a reference.
inline std::string normalize_phrase(std::string_view s) {
  std::string_view v = trim_view(s);
  while (!v.empty() && (v.front() == '"' || v.front() == '\'' || v.front() == '`'))
    v.remove_prefix(1);
  while (!v.empty() &&
         (v.back() == '"' || v.back() == '\'' || v.back() == '`' || v.back() == '.'))
    v.remove_suffix(1);
  return normalize_reference(v);
}

// Sentence boundary: '.', '!' or '?' followed by whitespace and then an
// uppercase letter or a digit. Returns the prefix holding at most
// `max_sentences` sentences, right-trimmed.
inline std::string first_sentences(std::string_view text, std::size_t max_sentences) {
  if (max_sentences == 0) return "";
  std::size_t count = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    if (j >= text.size() || !is_ascii_space(text[j])) continue;
    while (j < text.size() && is_ascii_space(text[j])) ++j;
    if (j >= text.size()) break;
    unsigned char next = static_cast<unsigned char>(text[j]);
    if (!std::isupper(next) && !std::isdigit(next)) continue;
    if (++count == max_sentences) return trim(text.substr(0, i + 1));
  }
  return trim(text);
}

// Whitespace tokenization: number of maximal non-space runs.
inline std::size_t whitespace_word_count(std::string_view s) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_ascii_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

// Approximate token count: a token is a maximal alphanumeric run or a single
// punctuation character. Roughly 1 token per short English word.
inline std::size_t approx_token_count(std::string_view text) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_ascii_space(static_cast<char>(c))) {
      ++i;
      continue;
    }
    if (std::isalnum(c) || c == '_') {
      ++count;
      while (i < text.size()) {
        unsigned char d = static_cast<unsigned char>(text[i]);
        if (!std::isalnum(d) && d != '_') break;
        ++i;
      }
    } else {
      ++count;
      ++i;
    }
  }
  return count;
}

// Largest whitespace-delimited prefix whose approximate token count fits the
// budget. Never cuts inside a word.
inline std::string truncate_to_tokens(std::string_view text, std::size_t budget) {
  if (approx_token_count(text) <= budget) return std::string(text);
  std::size_t used = 0;
  std::size_t end = 0;  // byte length of the accepted prefix
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    std::size_t word_start = i;
    while (i < text.size() && !is_ascii_space(text[i])) ++i;
    if (word_start == i) break;
    std::size_t cost = approx_token_count(text.substr(word_start, i - word_start));
    if (used + cost > budget) break;
    used += cost;
    end = i;
  }
  return std::string(text.substr(0, end));
}

}  // namespace goalkp
