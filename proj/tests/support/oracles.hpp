#pragma once

// Deliberately naive reference implementations used to cross-check the
// library. They share no code with include/covenant beyond plain types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace covenant::oracle {

inline bool ws(char32_t c) { return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v'; }

inline char32_t lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  return c;
}

inline std::u32string norm(const std::u32string& s) {
  std::u32string out;
  bool gap = false;
  for (char32_t c : s) {
    if (ws(c)) {
      gap = true;
      continue;
    }
    if (gap && !out.empty()) out.push_back(U' ');
    gap = false;
    out.push_back(lower(c));
  }
  return out;
}

inline std::set<std::u32string> trigrams(const std::u32string& s) {
  if (s.size() < 3) return s.empty() ? std::set<std::u32string>{} : std::set<std::u32string>{s};
  std::set<std::u32string> out;
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) out.insert(s.substr(i, 3));
  return out;
}

inline double jaccard(const std::u32string& a, const std::u32string& b) {
  const auto ga = trigrams(norm(a));
  const auto gb = trigrams(norm(b));
  std::set<std::u32string> both;
  std::set_union(ga.begin(), ga.end(), gb.begin(), gb.end(), std::inserter(both, both.begin()));
  if (both.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& g : ga) common += gb.count(g);
  return static_cast<double>(common) / static_cast<double>(both.size());
}

// Word-level trigram cosine, no normalization.
inline double cosine(const std::u32string& a, const std::u32string& b) {
  const auto ga = trigrams(a);
  const auto gb = trigrams(b);
  std::size_t common = 0;
  for (const auto& g : ga) common += gb.count(g);
  return static_cast<double>(common) / std::sqrt(static_cast<double>(ga.size()) * static_cast<double>(gb.size()));
}

struct Window {
  std::size_t start = 0;
  std::size_t end = 0;
  double score = -1.0;
};

// Scores every window of the quote's length starting at a whitespace word
// start (truncated at the page end) and returns the first best one.
inline std::optional<Window> best_window(const std::u32string& page, const std::u32string& quote) {
  std::optional<Window> best;
  for (std::size_t i = 0; i < page.size(); ++i) {
    if (ws(page[i]) || (i > 0 && !ws(page[i - 1]))) continue;
    const std::size_t end = std::min(page.size(), i + quote.size());
    const double s = jaccard(page.substr(i, end - i), quote);
    if (!best || s > best->score) best = Window{i, end, s};
  }
  return best;
}

inline std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Unsmoothed sentence BLEU computed as a product of clipped precisions.
inline double bleu(const std::string& candidate, const std::string& reference, std::size_t max_n = 4) {
  const auto c = split(candidate);
  const auto r = split(reference);
  if (c.empty()) return 0.0;
  double product = 1.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    if (c.size() < n) return 0.0;
    std::size_t matched = 0;
    std::vector<bool> used(r.size() + 1, false);
    for (std::size_t i = 0; i + n <= c.size(); ++i) {
      // Clip by consuming reference occurrences one at a time.
      for (std::size_t j = 0; j + n <= r.size(); ++j) {
        if (used[j]) continue;
        if (std::equal(c.begin() + i, c.begin() + i + n, r.begin() + j)) {
          used[j] = true;
          ++matched;
          break;
        }
      }
    }
    product *= static_cast<double>(matched) / static_cast<double>(c.size() - n + 1);
  }
  const double bp = c.size() > r.size() ? 1.0 : std::exp(1.0 - static_cast<double>(r.size()) / c.size());
  return bp * std::pow(product, 1.0 / static_cast<double>(max_n));
}

// Wilson interval from the textbook form (p + z²/2n ± z√(p(1−p)/n + z²/4n²)) / (1 + z²/n).
inline std::pair<double, double> wilson(double k, double n, double z = 1.96) {
  const double p = k / n;
  const double a = p + z * z / (2 * n);
  const double b = z * std::sqrt((p * (1 - p) + z * z / (4 * n)) / n);
  const double d = 1 + z * z / n;
  return {std::max(0.0, (a - b) / d), std::min(1.0, (a + b) / d)};
}

struct Record {
  std::string tract;  // empty = unknown
  std::string block;
  std::vector<std::string> lots;
  std::optional<std::size_t> tract_wide_lots;
};

// Net lots by explicit set union: every tract-wide tract counts its declared
// lots once (largest declaration); individual lots count once unless their
// tract is declared. Unknown-tract lots are counted without dedup.
inline std::size_t net_lots(const std::vector<Record>& records) {
  std::map<std::string, std::size_t> declared;
  for (const auto& r : records) {
    if (r.tract_wide_lots && !r.tract.empty()) declared[r.tract] = std::max(declared[r.tract], *r.tract_wide_lots);
  }
  std::set<std::tuple<std::string, std::string, std::string>> lots;
  std::size_t unknown = 0;
  for (const auto& r : records) {
    if (r.tract_wide_lots) {
      if (r.tract.empty()) unknown += *r.tract_wide_lots;
      continue;
    }
    for (const auto& lot : r.lots) {
      if (r.tract.empty()) {
        ++unknown;
      } else if (!declared.count(r.tract)) {
        lots.insert({r.tract, r.block, lot});
      }
    }
  }
  std::size_t net = unknown + lots.size();
  for (const auto& [t, n] : declared) net += n;
  return net;
}

}  // namespace covenant::oracle
