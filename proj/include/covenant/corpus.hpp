#pragma once

// OCR page ingestion and span -> image-box geometry.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covenant/error.hpp"
#include "covenant/text.hpp"

namespace covenant {

using json = nlohmann::json;
using text::normalize;

struct PageKey {
  std::string doc_id;
  int page_no = 0;

  friend auto operator<=>(const PageKey&, const PageKey&) = default;
  friend bool operator==(const PageKey&, const PageKey&) = default;

  std::string str() const { return doc_id + "#" + std::to_string(page_no); }
};

inline void to_json(json& j, const PageKey& k) { j = json{{"doc_id", k.doc_id}, {"page_no", k.page_no}}; }
inline void from_json(const json& j, PageKey& k) {
  j.at("doc_id").get_to(k.doc_id);
  j.at("page_no").get_to(k.page_no);
}

// Page-relative coordinates in [0,1].
struct BoundingBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

  BoundingBox united(const BoundingBox& o) const {
    return {std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
  }
  bool contains(const BoundingBox& o) const {
    return x0 <= o.x0 && y0 <= o.y0 && x1 >= o.x1 && y1 >= o.y1;
  }
};

inline void to_json(json& j, const BoundingBox& b) {
  j = json{{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}};
}
inline void from_json(const json& j, BoundingBox& b) {
  j.at("x0").get_to(b.x0);
  j.at("y0").get_to(b.y0);
  j.at("x1").get_to(b.x1);
  j.at("y1").get_to(b.y1);
}

struct CalendarDate {
  int year = 0, month = 0, day = 0;

  friend auto operator<=>(const CalendarDate&, const CalendarDate&) = default;
  friend bool operator==(const CalendarDate&, const CalendarDate&) = default;

  // Accepts YYYY-MM-DD.
  static CalendarDate parse(std::string_view s) {
    CalendarDate d;
    char tail = 0;
    const std::string buf(s);
    if (s.size() != 10 || std::sscanf(buf.c_str(), "%4d-%2d-%2d%c", &d.year, &d.month, &d.day, &tail) != 3 ||
        buf[4] != '-' || buf[7] != '-' || d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) {
      throw Error(ErrorCode::kParse, "bad date '" + buf + "', expected YYYY-MM-DD");
    }
    return d;
  }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
  }
};

struct TokenBox {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  BoundingBox box;

  friend bool operator==(const TokenBox&, const TokenBox&) = default;
};

struct PageRecord {
  std::string doc_id;
  int page_no = 1;
  std::string text;  // UTF-8
  std::vector<TokenBox> tokens;
  std::optional<CalendarDate> recorded_date;
  std::optional<std::string> book;
  std::optional<std::string> page_ref;

  PageKey key() const { return {doc_id, page_no}; }
  friend bool operator==(const PageRecord&, const PageRecord&) = default;
};

inline void to_json(json& j, const TokenBox& t) {
  j = json{{"text", t.text},      {"char_start", t.char_start}, {"char_end", t.char_end},
           {"x0", t.box.x0},      {"y0", t.box.y0},             {"x1", t.box.x1},
           {"y1", t.box.y1}};
}

inline void from_json(const json& j, TokenBox& t) {
  j.at("text").get_to(t.text);
  j.at("char_start").get_to(t.char_start);
  j.at("char_end").get_to(t.char_end);
  j.at("x0").get_to(t.box.x0);
  j.at("y0").get_to(t.box.y0);
  j.at("x1").get_to(t.box.x1);
  j.at("y1").get_to(t.box.y1);
}

inline void to_json(json& j, const PageRecord& p) {
  j = json{{"doc_id", p.doc_id}, {"page_no", p.page_no}, {"text", p.text}, {"tokens", p.tokens}};
  if (p.recorded_date) j["recorded_date"] = p.recorded_date->str();
  if (p.book) j["book"] = *p.book;
  if (p.page_ref) j["page_ref"] = *p.page_ref;
}

inline void from_json(const json& j, PageRecord& p) {
  j.at("doc_id").get_to(p.doc_id);
  j.at("page_no").get_to(p.page_no);
  j.at("text").get_to(p.text);
  j.at("tokens").get_to(p.tokens);
  p.recorded_date.reset();
  p.book.reset();
  p.page_ref.reset();
  if (auto it = j.find("recorded_date"); it != j.end() && !it->is_null()) {
    p.recorded_date = CalendarDate::parse(it->get<std::string>());
  }
  if (auto it = j.find("book"); it != j.end() && !it->is_null()) p.book = it->get<std::string>();
  if (auto it = j.find("page_ref"); it != j.end() && !it->is_null()) p.page_ref = it->get<std::string>();
}

// Checks every PageRecord/TokenBox invariant; throws kParse naming the first
// violation. Characters between tokens must be whitespace so that tokens
// rejoined in offset order reproduce the text up to whitespace runs.
inline void validate_page(const PageRecord& p) {
  if (p.doc_id.empty()) throw Error(ErrorCode::kParse, "empty doc_id");
  if (p.page_no < 1) throw Error(ErrorCode::kParse, "page_no must be positive");
  const std::u32string cps = text::decode_utf8(p.text);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < p.tokens.size(); ++i) {
    const auto& t = p.tokens[i];
    const std::string where = "token " + std::to_string(i);
    if (t.char_start >= t.char_end) throw Error(ErrorCode::kParse, where + ": char_start >= char_end");
    if (t.char_end > cps.size()) throw Error(ErrorCode::kParse, where + ": offsets beyond text");
    if (t.char_start < cursor) throw Error(ErrorCode::kParse, where + ": unsorted or overlapping");
    const auto& b = t.box;
    if (!(0.0 <= b.x0 && b.x0 < b.x1 && b.x1 <= 1.0 && 0.0 <= b.y0 && b.y0 < b.y1 && b.y1 <= 1.0)) {
      throw Error(ErrorCode::kParse, where + ": box outside [0,1] or degenerate");
    }
    for (std::size_t k = cursor; k < t.char_start; ++k) {
      if (!text::is_space(cps[k])) throw Error(ErrorCode::kParse, where + ": non-space text between tokens");
    }
    if (text::decode_utf8(t.text) != std::u32string_view(cps).substr(t.char_start, t.char_end - t.char_start)) {
      throw Error(ErrorCode::kParse, where + ": token text differs from page text slice");
    }
    cursor = t.char_end;
  }
  for (std::size_t k = cursor; k < cps.size(); ++k) {
    if (!text::is_space(cps[k])) throw Error(ErrorCode::kParse, "text not covered by tokens at offset " + std::to_string(k));
  }
}

// Minimal box covering every token intersecting [start, end).
inline BoundingBox span_to_bbox(const PageRecord& page, std::size_t start, std::size_t end) {
  const std::size_t len = text::decode_utf8(page.text).size();
  if (start >= end || end > len) {
    throw Error(ErrorCode::kOutOfRange, "span [" + std::to_string(start) + "," + std::to_string(end) +
                                            ") invalid for text of length " + std::to_string(len));
  }
  auto it = std::upper_bound(page.tokens.begin(), page.tokens.end(), start,
                             [](std::size_t s, const TokenBox& t) { return s < t.char_end; });
  std::optional<BoundingBox> box;
  for (; it != page.tokens.end() && it->char_start < end; ++it) {
    box = box ? box->united(it->box) : it->box;
  }
  if (!box) throw Error(ErrorCode::kNoTokens, "span covers no tokens");
  return *box;
}

struct Diagnostic {
  std::size_t line = 0;
  std::string message;
};

struct CorpusStats {
  std::size_t page_count = 0;
  std::size_t doc_count = 0;
  std::optional<std::pair<CalendarDate, CalendarDate>> date_range;
  std::size_t positive_label_count = 0;
};

// Read-only after construction.
class CorpusHandle {
 public:
  CorpusHandle() = default;

  const PageRecord* find(const PageKey& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? nullptr : &pages_[it->second];
  }

  std::span<const PageRecord> pages() const { return pages_; }
  std::span<const Diagnostic> diagnostics() const { return diagnostics_; }
  std::size_t page_count() const { return pages_.size(); }

  CorpusStats stats(std::span<const PageKey> positives = {}) const {
    CorpusStats s;
    s.page_count = pages_.size();
    std::set<std::string_view> docs;
    for (const auto& p : pages_) {
      docs.insert(p.doc_id);
      if (p.recorded_date) {
        if (!s.date_range) {
          s.date_range = {*p.recorded_date, *p.recorded_date};
        } else {
          s.date_range->first = std::min(s.date_range->first, *p.recorded_date);
          s.date_range->second = std::max(s.date_range->second, *p.recorded_date);
        }
      }
    }
    s.doc_count = docs.size();
    std::set<PageKey> seen;
    for (const auto& k : positives) {
      if (index_.count(k) && seen.insert(k).second) ++s.positive_label_count;
    }
    return s;
  }

  // Returns false (and leaves the corpus unchanged) on a duplicate key.
  bool add(PageRecord page) {
    auto key = page.key();
    if (index_.count(key)) return false;
    index_.emplace(std::move(key), pages_.size());
    pages_.push_back(std::move(page));
    return true;
  }

  void add_diagnostic(Diagnostic d) { diagnostics_.push_back(std::move(d)); }

 private:
  std::vector<PageRecord> pages_;
  std::map<PageKey, std::size_t> index_;
  std::vector<Diagnostic> diagnostics_;
};

inline PageRecord parse_page_line(std::string_view line) {
  PageRecord page;
  try {
    page = json::parse(line).get<PageRecord>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  validate_page(page);
  return page;
}

// Line-delimited page records. Malformed lines become diagnostics; blank
// lines are skipped. Stream failure other than EOF aborts with kIo.
inline CorpusHandle ingest_pages(std::istream& in) {
  CorpusHandle corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      PageRecord page = parse_page_line(line);
      const std::string key = page.key().str();
      if (!corpus.add(std::move(page))) {
        corpus.add_diagnostic({line_no, "duplicate page key " + key});
      }
    } catch (const Error& e) {
      corpus.add_diagnostic({line_no, e.what()});
    }
  }
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed after line " + std::to_string(line_no));
  return corpus;
}

// Builds a page whose tokens are the whitespace-separated words of `text`,
// laid out on a grid. Handy for fixtures and tests.
inline PageRecord make_page(std::string doc_id, int page_no, std::string_view utf8_text,
                            std::size_t words_per_line = 12) {
  PageRecord page;
  page.doc_id = std::move(doc_id);
  page.page_no = page_no;
  page.text = std::string(utf8_text);
  const std::u32string cps = text::decode_utf8(utf8_text);
  std::size_t i = 0;
  std::size_t line = 0;
  std::size_t column = 0;
  while (i < cps.size()) {
    while (i < cps.size() && text::is_space(cps[i])) {
      if (cps[i] == U'\n' && column > 0) {
        ++line;
        column = 0;
      }
      ++i;
    }
    if (i >= cps.size()) break;
    const std::size_t s = i;
    while (i < cps.size() && !text::is_space(cps[i])) ++i;
    if (column == words_per_line) {
      ++line;
      column = 0;
    }
    TokenBox t;
    t.text = text::encode_utf8(std::u32string_view(cps).substr(s, i - s));
    t.char_start = s;
    t.char_end = i;
    const double w = 0.9 / static_cast<double>(words_per_line);
    const double x0 = 0.05 + w * static_cast<double>(column);
    const double y0 = 0.02 + 0.012 * static_cast<double>(line % 80);
    t.box = {x0, y0, x0 + w * 0.9, y0 + 0.01};
    page.tokens.push_back(std::move(t));
    ++column;
  }
  return page;
}

}  // namespace covenant
