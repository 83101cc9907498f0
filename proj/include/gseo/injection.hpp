#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "gseo/common.hpp"
#include "gseo/text.hpp"

namespace gseo {

struct InjectionCheck {
  bool valid = false;
  size_t position_char = 0;      // byte offset of the insert within candidate
  std::string matched_insert;    // raw candidate bytes recognized as the insert
  std::string reason;            // NoInsertion | PrefixSuffixMismatch | InsertMismatch
};

namespace detail {

// Comparison form for the inserted segment: whitespace-normalized, terminal
// punctuation stripped, ASCII-lowercased. The injector legitimately adds a
// final period and may re-case; those must not count against the 0.2 budget
// on short captions.
inline std::string canon_insert(std::string_view s) {
  std::string t = normalize_ws(s);
  size_t e = t.size();
  while (e > 0 && (t[e - 1] == '.' || t[e - 1] == '!' || t[e - 1] == '?')) --e;
  t.resize(e);
  return to_lower(t);
}

}  // namespace detail

// Decides whether candidate equals original with exactly one inserted segment
// approximating `injected`: candidate = prefix + insert + suffix where
// whitespace-normalized prefix+suffix equals whitespace-normalized original
// and normalized edit distance between insert and injected is at most 0.2.
inline InjectionCheck validate_injection(std::string_view original, std::string_view candidate,
                                         std::string_view injected) {
  InjectionCheck out;
  NormalizedText no = normalize_ws_mapped(original);
  NormalizedText nc = normalize_ws_mapped(candidate);
  const std::string& o = no.text;
  const std::string& c = nc.text;

  if (c.size() <= o.size()) {
    out.reason = (c == o) ? "NoInsertion" : "PrefixSuffixMismatch";
    return out;
  }
  const size_t ins_len = c.size() - o.size();

  size_t p = 0;
  while (p < o.size() && o[p] == c[p]) ++p;
  size_t q = 0;
  while (q < o.size() && o[o.size() - 1 - q] == c[c.size() - 1 - q]) ++q;

  // Split points t where o[0..t) is a candidate prefix and o[t..) the suffix.
  size_t t_lo = o.size() > q ? o.size() - q : 0;
  size_t t_hi = std::min(p, o.size());
  if (t_lo > t_hi) {
    out.reason = "PrefixSuffixMismatch";
    return out;
  }

  std::string want = detail::canon_insert(injected);
  double best = 1e9;
  size_t best_t = 0;
  for (size_t t = t_lo; t <= t_hi; ++t) {
    std::string insert = c.substr(t, ins_len);
    double score = normalized_levenshtein(detail::canon_insert(insert), want);
    if (score <= best) {  // ties prefer the rightmost split: insert starts at content, not at the seam space
      best = score;
      best_t = t;
    }
  }
  if (best > 0.2) {
    out.reason = "InsertMismatch";
    return out;
  }

  out.valid = true;
  out.position_char = best_t < nc.raw_offset.size() ? nc.raw_offset[best_t] : candidate.size();
  size_t raw_end = (best_t + ins_len) < nc.raw_offset.size()
                       ? nc.raw_offset[best_t + ins_len]
                       : candidate.size();
  out.matched_insert = trim(candidate.substr(out.position_char, raw_end - out.position_char));
  return out;
}

struct FallbackInsert {
  std::string optimized;
  size_t position_char = 0;  // byte offset of inserted_text within optimized
  std::string inserted_text;
};

// Inserts the caption as its own sentence after the original sentence with
// maximal token-Jaccard overlap (ties: earliest). Output always passes
// validate_injection against the caption.
inline FallbackInsert deterministic_fallback_insert(std::string_view original,
                                                    std::string_view caption) {
  std::string cap = trim(caption);
  if (cap.empty()) raise(ErrorCode::EmptyInput, "caption is empty");
  auto spans = split_sentences(original);
  if (spans.empty()) raise(ErrorCode::EmptyInput, "original has no sentences");

  size_t best_i = 0;
  double best_score = -1.0;
  for (size_t i = 0; i < spans.size(); ++i) {
    std::string_view sentence = original.substr(spans[i].begin, spans[i].end - spans[i].begin);
    double score = token_jaccard(sentence, cap);
    if (score > best_score) {
      best_score = score;
      best_i = i;
    }
  }

  if (!is_sentence_end(cap.back())) cap.push_back('.');
  size_t at = spans[best_i].end;
  FallbackInsert out;
  out.optimized.reserve(original.size() + cap.size() + 2);
  out.optimized.append(original.substr(0, at));
  out.optimized.push_back(' ');
  out.position_char = out.optimized.size();
  out.optimized.append(cap);
  if (at < original.size() && !is_space(original[at])) out.optimized.push_back(' ');
  out.optimized.append(original.substr(at));
  out.inserted_text = cap;
  return out;
}

}  // namespace gseo
