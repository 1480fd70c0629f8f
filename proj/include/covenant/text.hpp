#pragma once

// UTF-8 <-> code point conversion and the text normalization shared by all
// matchers. Offsets everywhere in this library count Unicode scalar values.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "covenant/error.hpp"

namespace covenant {
namespace text {

inline std::u32string decode_utf8(std::string_view in) {
  std::u32string out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    const auto lead = static_cast<unsigned char>(in[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (lead < 0x80) {
      cp = lead;
      len = 1;
    } else if ((lead & 0xE0) == 0xC0) {
      cp = lead & 0x1F;
      len = 2;
    } else if ((lead & 0xF0) == 0xE0) {
      cp = lead & 0x0F;
      len = 3;
    } else if ((lead & 0xF8) == 0xF0) {
      cp = lead & 0x07;
      len = 4;
    } else {
      throw Error(ErrorCode::kParse, "invalid UTF-8 lead byte at " + std::to_string(i));
    }
    if (i + len > in.size()) {
      throw Error(ErrorCode::kParse, "truncated UTF-8 sequence at " + std::to_string(i));
    }
    for (std::size_t k = 1; k < len; ++k) {
      const auto cont = static_cast<unsigned char>(in[i + k]);
      if ((cont & 0xC0) != 0x80) {
        throw Error(ErrorCode::kParse, "invalid UTF-8 continuation at " + std::to_string(i + k));
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    static constexpr char32_t kMinForLength[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMinForLength[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw Error(ErrorCode::kParse, "invalid code point at " + std::to_string(i));
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode_utf8(std::u32string_view in) {
  std::string out;
  out.reserve(in.size());
  for (char32_t cp : in) append_utf8(out, cp);
  return out;
}

constexpr bool is_space(char32_t c) noexcept {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f' ||
         c == 0xA0 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x3000;
}

// ASCII letters and digits, plus any non-ASCII code point outside the
// Latin-1 symbol block and the general punctuation block.
constexpr bool is_alnum(char32_t c) noexcept {
  if (c < 0x80) {
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9');
  }
  if (c <= 0xBF || c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x206F) return false;
  if (c >= 0x3000 && c <= 0x303F) return false;
  return !is_space(c);
}

// Lowercases ASCII and Latin-1 uppercase letters; other code points pass through.
constexpr char32_t to_lower(char32_t c) noexcept {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  return c;
}

inline std::u32string to_lower(std::u32string_view in) {
  std::u32string out(in);
  for (auto& c : out) c = to_lower(c);
  return out;
}

inline std::string to_lower_utf8(std::string_view in) { return encode_utf8(to_lower(decode_utf8(in))); }

// Normalized text plus, for each normalized code point, the offset of the
// source code point it came from. Collapsed whitespace maps to the first
// whitespace character of its run.
struct NormalizedText {
  std::u32string text;
  std::vector<std::size_t> origin;
};

inline NormalizedText normalize_mapped(std::u32string_view in) {
  NormalizedText out;
  out.text.reserve(in.size());
  out.origin.reserve(in.size());
  bool pending_space = false;
  std::size_t space_origin = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char32_t c = in[i];
    if (is_space(c)) {
      if (!pending_space) space_origin = i;
      pending_space = true;
      continue;
    }
    if (pending_space && !out.text.empty()) {
      out.text.push_back(U' ');
      out.origin.push_back(space_origin);
    }
    pending_space = false;
    out.text.push_back(to_lower(c));
    out.origin.push_back(i);
  }
  return out;
}

inline std::u32string normalize(std::u32string_view in) { return normalize_mapped(in).text; }

// Lowercase, collapse whitespace runs to one space, trim.
inline std::string normalize(std::string_view utf8) { return encode_utf8(normalize(decode_utf8(utf8))); }

struct WordSpan {
  std::size_t start;
  std::size_t end;
};

// Maximal runs of alphanumeric code points.
inline std::vector<WordSpan> split_words(std::u32string_view in) {
  std::vector<WordSpan> words;
  std::size_t i = 0;
  while (i < in.size()) {
    while (i < in.size() && !is_alnum(in[i])) ++i;
    if (i >= in.size()) break;
    const std::size_t start = i;
    while (i < in.size() && is_alnum(in[i])) ++i;
    words.push_back({start, i});
  }
  return words;
}

}  // namespace text
}  // namespace covenant
