#pragma once

// Recovers where on the page a (possibly paraphrased) model quote came from.
//
// The page is cut into windows the length of the quote, one starting at each
// word start. Each window is scored against the quote by trigram Jaccard
// similarity, the best window wins (earliest on ties), and the winner is
// widened to sentence boundaries before being mapped to token geometry.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covenant/corpus.hpp"
#include "covenant/error.hpp"
#include "covenant/text.hpp"

namespace covenant {
namespace span {

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
  bool contains(const Span& o) const { return start <= o.start && o.end <= end; }
  std::size_t size() const { return end - start; }
};

struct SpanMatch {
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  double similarity = 0.0;
  bool aligned = false;
  std::optional<BoundingBox> bbox;

  Span span() const { return {char_start, char_end}; }
};

struct LocateOptions {
  double floor = 0.3;
  bool align = true;
};

namespace detail {

// Trigram (or whole short string) packed into 64 bits: 21 bits per code
// point, with the top bit and a length tag marking strings shorter than 3.
inline std::vector<std::uint64_t> trigram_codes(std::u32string_view s) {
  std::vector<std::uint64_t> out;
  if (s.empty()) return out;
  if (s.size() < 3) {
    std::uint64_t code = (std::uint64_t{1} << 63) | (std::uint64_t{s.size()} << 60);
    for (std::size_t i = 0; i < s.size(); ++i) code |= std::uint64_t{s[i]} << (21 * i);
    out.push_back(code);
    return out;
  }
  out.reserve(s.size() - 2);
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) {
    out.push_back(std::uint64_t{s[i]} | (std::uint64_t{s[i + 1]} << 21) | (std::uint64_t{s[i + 2]} << 42));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline double jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const std::size_t total = a.size() + b.size() - common;
  return total == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(total);
}

constexpr bool is_terminator(char32_t c) noexcept { return c == U'.' || c == U';' || c == U':' || c == U'\n'; }

}  // namespace detail

// Jaccard similarity of the trigram sets of the two normalized strings
// (spaces included).
inline double jaccard_trigram(std::u32string_view a, std::u32string_view b) {
  const auto na = text::normalize(a);
  const auto nb = text::normalize(b);
  if (na.empty() || nb.empty()) throw Error(ErrorCode::kEmptyInput, "jaccard of an empty string");
  return detail::jaccard(detail::trigram_codes(na), detail::trigram_codes(nb));
}

inline double jaccard_trigram(std::string_view a, std::string_view b) {
  return jaccard_trigram(std::u32string_view(text::decode_utf8(a)), std::u32string_view(text::decode_utf8(b)));
}

// Offsets where a whitespace-delimited word begins.
inline std::vector<std::size_t> word_starts(std::u32string_view page) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < page.size(); ++i) {
    if (!text::is_space(page[i]) && (i == 0 || text::is_space(page[i - 1]))) starts.push_back(i);
  }
  return starts;
}

// Best window of quote length (in code points) starting at a word start.
// Windows running past the page end are truncated there.
inline SpanMatch locate_span(std::u32string_view page, std::u32string_view quote, double floor = 0.3) {
  const auto quote_norm = text::normalize(quote);
  if (quote_norm.empty()) throw Error(ErrorCode::kEmptyQuote, "model quote is empty");
  const auto quote_grams = detail::trigram_codes(quote_norm);
  const std::size_t length = quote.size();

  SpanMatch best;
  bool found = false;
  for (std::size_t start : word_starts(page)) {
    const std::size_t end = std::min(page.size(), start + length);
    const double score = detail::jaccard(detail::trigram_codes(text::normalize(page.substr(start, end - start))), quote_grams);
    if (!found || score > best.similarity) {
      best.char_start = start;
      best.char_end = end;
      best.similarity = score;
      found = true;
    }
  }
  if (!found || best.similarity < floor) {
    throw Error(ErrorCode::kNoAlignment,
                "best window similarity " + std::to_string(found ? best.similarity : 0.0) + " below floor " +
                    std::to_string(floor));
  }
  return best;
}

inline SpanMatch locate_span(std::string_view page_utf8, std::string_view quote_utf8, double floor = 0.3) {
  return locate_span(std::u32string_view(text::decode_utf8(page_utf8)),
                     std::u32string_view(text::decode_utf8(quote_utf8)), floor);
}

// Widens a span to the enclosing sentence. Terminators are . ; : and
// newline; a newline bounds the span without being included, so spans never
// cross a line or paragraph break they did not already contain.
inline Span align_boundaries(std::u32string_view page, Span s) {
  if (s.start > s.end || s.end > page.size()) throw Error(ErrorCode::kOutOfRange, "span outside page text");
  Span out = s;

  std::size_t left = 0;
  for (std::size_t k = s.start; k > 0; --k) {
    if (detail::is_terminator(page[k - 1])) {
      left = k;
      break;
    }
  }
  while (left < s.start && text::is_space(page[left])) ++left;
  out.start = left;

  std::size_t last = s.end;
  while (last > s.start && text::is_space(page[last - 1])) --last;
  std::size_t right = page.size();
  for (std::size_t k = last == 0 ? 0 : last - 1; k < page.size(); ++k) {
    if (detail::is_terminator(page[k])) {
      right = page[k] == U'\n' ? k : k + 1;
      break;
    }
  }
  out.end = std::max(s.end, right);
  return out;
}

// locate_span + align_boundaries + token geometry.
inline SpanMatch localize(const PageRecord& page, std::string_view quote, const LocateOptions& opts = {}) {
  const std::u32string cps = text::decode_utf8(page.text);
  SpanMatch m = locate_span(std::u32string_view(cps), std::u32string_view(text::decode_utf8(quote)), opts.floor);
  if (opts.align) {
    const Span aligned = align_boundaries(cps, m.span());
    m.char_start = aligned.start;
    m.char_end = aligned.end;
    m.aligned = true;
  }
  m.bbox = span_to_bbox(page, m.char_start, m.char_end);
  return m;
}

}  // namespace span
}  // namespace covenant
