#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace gseo {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
inline bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string rtrim(std::string_view s) {
  size_t e = s.size();
  while (e > 0 && is_space(s[e - 1])) --e;
  return std::string(s.substr(0, e));
}

// Collapses every internal whitespace run to a single space and trims the ends.
inline std::string normalize_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0, n = s.size();
  while (i < n && is_space(s[i])) ++i;
  bool pending_space = false;
  for (; i < n; ++i) {
    if (is_space(s[i])) {
      pending_space = true;
    } else {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(s[i]);
    }
  }
  return out;
}

// normalize_ws plus a map from each normalized character back to its byte
// offset in the raw input. Spaces in the output map to the first byte of the
// whitespace run they replaced.
struct NormalizedText {
  std::string text;
  std::vector<size_t> raw_offset;  // raw_offset[i] = byte offset of text[i] in the input
};

inline NormalizedText normalize_ws_mapped(std::string_view s) {
  NormalizedText out;
  out.text.reserve(s.size());
  out.raw_offset.reserve(s.size());
  size_t i = 0, n = s.size();
  while (i < n && is_space(s[i])) ++i;
  bool pending_space = false;
  size_t run_start = 0;
  for (; i < n; ++i) {
    if (is_space(s[i])) {
      if (!pending_space) run_start = i;
      pending_space = true;
    } else {
      if (pending_space && !out.text.empty()) {
        out.text.push_back(' ');
        out.raw_offset.push_back(run_start);
      }
      pending_space = false;
      out.text.push_back(s[i]);
      out.raw_offset.push_back(i);
    }
  }
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Lowercased alphanumeric token runs; everything else is a separator.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    if (is_alnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline std::set<std::string> token_set(std::string_view s) {
  auto toks = tokenize(s);
  return std::set<std::string>(toks.begin(), toks.end());
}

// |A ∩ B| / |A ∪ B| over token sets; 0 when the union is empty.
inline double token_jaccard(std::string_view a, std::string_view b) {
  std::set<std::string> sa = token_set(a), sb = token_set(b);
  if (sa.empty() && sb.empty()) return 0.0;
  size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline size_t levenshtein(std::string_view a, std::string_view b) {
  const size_t n = a.size(), m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<size_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = j;
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= m; ++j) {
      size_t cost = (a[i - 1] == b[j - 1]) ? 0 : 1;
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Edit distance divided by the longer length; 0 for two empty strings.
inline double normalized_levenshtein(std::string_view a, std::string_view b) {
  size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

struct SentenceSpan {
  size_t begin = 0;  // byte offset of first char
  size_t end = 0;    // byte offset one past the last char (punctuation included)
};

// Splits on '.', '!' or '?' followed by whitespace and an uppercase letter, or
// by end of text. Abbreviations are not special-cased. Trailing text without
// terminal punctuation forms a final sentence.
inline std::vector<SentenceSpan> split_sentences(std::string_view text) {
  std::vector<SentenceSpan> spans;
  const size_t n = text.size();
  size_t start = 0;
  while (start < n && is_space(text[start])) ++start;
  size_t i = start;
  while (i < n) {
    if (is_sentence_end(text[i])) {
      size_t j = i + 1;
      while (j < n && is_sentence_end(text[j])) ++j;  // "..." / "?!" stay together
      size_t k = j;
      while (k < n && is_space(text[k])) ++k;
      if (k == n) {
        spans.push_back({start, j});
        return spans;
      }
      if (k > j && is_upper(text[k])) {
        spans.push_back({start, j});
        start = k;
        i = k;
        continue;
      }
      i = j;
      continue;
    }
    ++i;
  }
  if (start < n) {
    size_t end = n;
    while (end > start && is_space(text[end - 1])) --end;
    if (end > start) spans.push_back({start, end});
  }
  return spans;
}

inline std::vector<std::string> sentence_texts(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& sp : split_sentences(text)) {
    out.emplace_back(text.substr(sp.begin, sp.end - sp.begin));
  }
  return out;
}

}  // namespace gseo
