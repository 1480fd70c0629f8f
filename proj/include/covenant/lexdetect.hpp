#pragma once

// Keyword and fuzzy-keyword covenant detectors. Fuzzy matching scores each
// page word against each keyword by the cosine similarity of their n-gram
// sets (binary vectors over the n-gram universe).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "covenant/error.hpp"
#include "covenant/text.hpp"

namespace covenant {
namespace lex {

// Sorted, duplicate-free.
using NgramSet = std::vector<std::u32string>;

enum class Comparison { kGreater, kGreaterOrEqual };

struct FuzzyConfig {
  std::size_t n = 3;
  double threshold = 0.75;
  Comparison comparison = Comparison::kGreater;
  // Surround words with two leading and one trailing space before taking
  // n-grams (the pg_trgm convention). Off by default.
  bool pad = false;

  void validate() const {
    if (n < 2) throw Error(ErrorCode::kInvalidArgument, "n-gram size must be >= 2");
    if (!(threshold > 0.0 && threshold <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "fuzzy threshold must lie in (0, 1]");
    }
  }

  bool passes(double score) const {
    return comparison == Comparison::kGreater ? score > threshold : score >= threshold;
  }
};

struct LexHit {
  std::string keyword;
  std::string word;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  double score = 1.0;

  friend bool operator==(const LexHit&, const LexHit&) = default;
};

class KeywordList {
 public:
  KeywordList() = default;

  // Normalizes every term and drops empties and repeats, keeping first occurrence.
  static KeywordList from_terms(const std::vector<std::string>& terms, std::string source) {
    KeywordList list;
    list.source_ = std::move(source);
    std::set<std::string> seen;
    for (const auto& raw : terms) {
      std::string term = text::normalize(raw);
      if (term.empty() || !seen.insert(term).second) continue;
      list.terms_.push_back(std::move(term));
    }
    return list;
  }

  // One term per line; text after '#' is a comment.
  static KeywordList parse(std::istream& in, std::string source) {
    std::vector<std::string> terms;
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      terms.push_back(line);
    }
    if (in.bad()) throw Error(ErrorCode::kIo, "keyword list read failed");
    return from_terms(terms, std::move(source));
  }

  static KeywordList load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open keyword list " + path);
    return parse(in, path);
  }

  const std::vector<std::string>& terms() const { return terms_; }
  const std::string& source() const { return source_; }
  bool empty() const { return terms_.empty(); }

 private:
  std::vector<std::string> terms_;
  std::string source_;
};

// The county clerk-recorder's manual-review term list. Context exceptions
// noted in the original list ("chauffeurs", "gardeners") are kept as plain
// terms; "X or Xs" entries expand to both forms.
inline KeywordList county_default_keywords() {
  static const std::vector<std::string> kTerms = {
      "african", "american asiatic", "aryans", "asian", "asiatic", "black", "blood", "brown",
      "caucasian", "chauffeurs", "chinese", "clover", "color", "dago", "domestic servants",
      "domiciled", "dyke", "ethiopians", "foreigners", "gandhi", "gardeners", "gay", "ginzo",
      "greaser", "hebrews", "hindu", "immigrant", "indian", "interracial", "italian", "italians",
      "japanese", "jew", "jews", "korean", "lineage", "malays", "master", "mixed race",
      "mongolian", "native of the turkish empire", "negro", "nigga", "nigger", "people",
      "portuguese", "race", "religion", "restricted district", "servants", "turkish", "white",
      "mulatto"};
  return KeywordList::from_terms(kTerms, "county-default");
}

// Substring occurrences of every keyword, overlapping occurrences included.
// `normalized` must already be normalized. `word` is the alphanumeric run
// enclosing the match, so "white" in "whitestone" reports "whitestone".
inline std::vector<LexHit> keyword_scan(std::u32string_view normalized, const KeywordList& keywords) {
  std::vector<LexHit> hits;
  for (const auto& term : keywords.terms()) {
    const std::u32string needle = text::decode_utf8(term);
    if (needle.empty() || needle.size() > normalized.size()) continue;
    for (std::size_t pos = normalized.find(needle); pos != std::u32string_view::npos;
         pos = normalized.find(needle, pos + 1)) {
      std::size_t ws = pos;
      std::size_t we = pos + needle.size();
      while (ws > 0 && text::is_alnum(normalized[ws - 1])) --ws;
      while (we < normalized.size() && text::is_alnum(normalized[we])) ++we;
      hits.push_back({term, text::encode_utf8(normalized.substr(ws, we - ws)), pos, pos + needle.size(), 1.0});
    }
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const LexHit& a, const LexHit& b) { return a.char_start < b.char_start; });
  return hits;
}

inline std::vector<LexHit> keyword_scan(std::string_view normalized_utf8, const KeywordList& keywords) {
  return keyword_scan(std::u32string_view(text::decode_utf8(normalized_utf8)), keywords);
}

// All contiguous length-n substrings, as a set; shorter words yield
// themselves as the only element.
inline NgramSet ngram_set(std::u32string_view word, std::size_t n, bool pad = false) {
  std::u32string padded;
  if (pad) {
    padded = U"  ";
    padded.append(word);
    padded.push_back(U' ');
    word = padded;
  }
  NgramSet out;
  if (word.empty()) return out;
  if (word.size() < n) {
    out.emplace_back(word);
    return out;
  }
  out.reserve(word.size() - n + 1);
  for (std::size_t i = 0; i + n <= word.size(); ++i) out.emplace_back(word.substr(i, n));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline NgramSet ngram_set(std::string_view word_utf8, std::size_t n, bool pad = false) {
  return ngram_set(std::u32string_view(text::decode_utf8(word_utf8)), n, pad);
}

inline std::size_t intersection_size(const NgramSet& a, const NgramSet& b) {
  std::size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

inline double cosine_sim(const NgramSet& a, const NgramSet& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptySet, "cosine similarity of an empty n-gram set");
  const auto common = static_cast<double>(intersection_size(a, b));
  return common / std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// Precomputes keyword n-gram sets once per (keyword list, config).
class FuzzyMatcher {
 public:
  FuzzyMatcher(const KeywordList& keywords, FuzzyConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    for (const auto& term : keywords.terms()) {
      const std::u32string cps = text::decode_utf8(term);
      const auto words = text::split_words(cps);
      // Multi-word terms are left to the keyword scanner.
      if (words.size() != 1 || words[0].start != 0 || words[0].end != cps.size()) continue;
      terms_.push_back(term);
      grams_.push_back(ngram_set(std::u32string_view(cps), cfg_.n, cfg_.pad));
    }
  }

  const FuzzyConfig& config() const { return cfg_; }

  // Best keyword for one word: (index into single-word terms, score).
  std::pair<std::size_t, double> best(std::u32string_view word) const {
    const NgramSet grams = ngram_set(word, cfg_.n, cfg_.pad);
    std::size_t best_index = 0;
    double best_score = -1.0;
    for (std::size_t k = 0; k < grams_.size(); ++k) {
      const double s = cosine_sim(grams, grams_[k]);
      if (s > best_score) {
        best_score = s;
        best_index = k;
      }
    }
    return {best_index, best_score};
  }

  std::vector<LexHit> scan(std::u32string_view normalized) const {
    std::vector<LexHit> hits;
    if (grams_.empty()) return hits;
    for (const auto& w : text::split_words(normalized)) {
      const auto word = normalized.substr(w.start, w.end - w.start);
      const auto [index, score] = best(word);
      if (cfg_.passes(score)) {
        hits.push_back({terms_[index], text::encode_utf8(word), w.start, w.end, score});
      }
    }
    return hits;
  }

 private:
  FuzzyConfig cfg_;
  std::vector<std::string> terms_;
  std::vector<NgramSet> grams_;
};

inline std::vector<LexHit> fuzzy_scan(std::u32string_view normalized, const KeywordList& keywords,
                                      const FuzzyConfig& cfg = {}) {
  return FuzzyMatcher(keywords, cfg).scan(normalized);
}

inline std::vector<LexHit> fuzzy_scan(std::string_view normalized_utf8, const KeywordList& keywords,
                                      const FuzzyConfig& cfg = {}) {
  return fuzzy_scan(std::u32string_view(text::decode_utf8(normalized_utf8)), keywords, cfg);
}

}  // namespace lex
}  // namespace covenant
