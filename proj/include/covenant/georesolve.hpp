#pragma once

// Deed page -> surveyor map -> tract geometry.
//
//   1. extract_clues   map name / book / page / streets from the deed text
//   2. match_map       exact (book, page) key, else fuzzy map-name match
//   3. lookup_geometry polygon for the matched map from the geometry store
//   4. apply_overrides hand-researched locations for maps the store lacks

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covenant/corpus.hpp"
#include "covenant/csv.hpp"
#include "covenant/error.hpp"
#include "covenant/spanloc.hpp"
#include "covenant/text.hpp"

namespace covenant {
namespace geo {

struct GeoClues {
  std::optional<std::string> map_name;
  std::optional<std::string> book;
  std::optional<std::string> map_page;
  std::vector<std::string> streets;
  std::vector<std::string> parties;
  std::optional<CalendarDate> recorded_date;

  bool resolvable() const {
    return map_name || book || map_page || !streets.empty() || !parties.empty() || recorded_date;
  }
  friend bool operator==(const GeoClues&, const GeoClues&) = default;
};

inline void to_json(nlohmann::json& j, const GeoClues& c) {
  auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); };
  j = {{"map_name", opt(c.map_name)}, {"book", opt(c.book)},       {"map_page", opt(c.map_page)},
       {"streets", c.streets},        {"parties", c.parties},
       {"recorded_date", c.recorded_date ? nlohmann::json(c.recorded_date->str()) : nlohmann::json(nullptr)}};
}

inline void from_json(const nlohmann::json& j, GeoClues& c) {
  auto opt = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
  };
  c.map_name = opt("map_name");
  c.book = opt("book");
  c.map_page = opt("map_page");
  c.streets = j.value("streets", std::vector<std::string>{});
  c.parties = j.value("parties", std::vector<std::string>{});
  if (auto d = opt("recorded_date")) c.recorded_date = CalendarDate::parse(*d);
}

// Pluggable structured-extraction step (a prompted model in production).
class ClueExtractor {
 public:
  virtual ~ClueExtractor() = default;
  virtual GeoClues extract(std::string_view page_text) const = 0;
};

namespace detail {

// Curly quotes and backticks to ASCII so one regex covers OCR variants.
inline std::string ascii_quotes(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto c = static_cast<unsigned char>(in[i]);
    if (c == 0xE2 && i + 2 < in.size() && static_cast<unsigned char>(in[i + 1]) == 0x80) {
      const auto d = static_cast<unsigned char>(in[i + 2]);
      if (d == 0x98 || d == 0x99) {
        out.push_back('\'');
        i += 2;
        continue;
      }
      if (d == 0x9C || d == 0x9D) {
        out.push_back('"');
        i += 2;
        continue;
      }
    }
    out.push_back(c == '`' ? '\'' : static_cast<char>(c));
  }
  return out;
}

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::string fold_key(std::string_view s) { return text::to_lower_utf8(trim(std::string(s))); }

}  // namespace detail

// Pattern-based fallback extractor. Recognizes
//   "Book <token> [of Maps][,] [at] page <number>"
//   "Map of [the] <name phrase>"
//   "<Name> Street|Avenue|Road|..."
class RuleClueExtractor final : public ClueExtractor {
 public:
  GeoClues extract(std::string_view page_text) const override {
    static const std::regex kBookPage(R"(\b[Bb][Oo][Oo][Kk]\s+['"]?([A-Za-z0-9]+)['"]?(?:\s+[Oo][Ff]\s+[Mm][Aa][Pp][Ss])?\s*,?\s*(?:[Aa][Tt]\s+)?[Pp][Aa][Gg][Ee][Ss]?\s+(\d+))");
    static const std::regex kMapName(
        R"(\b[Mm][Aa][Pp]\s+[Oo][Ff]\s+(?:[Tt][Hh][Ee]\s+)?([A-Za-z0-9][^,.;:\n"]*?)(?=\s*(?:[,.;:\n"]|$)|\s+(?:recorded|filed|in|which|now|on|and|being|as|at|made|said|of\s+record)\b))");
    static const std::regex kStreet(
        R"(\b((?:[A-Z][a-z]+\s+){1,2}(?:Street|Avenue|Road|Drive|Boulevard|Lane|Way|Court|Place))\b)");
    const std::string src = detail::ascii_quotes(page_text);
    GeoClues clues;
    std::smatch m;
    if (std::regex_search(src, m, kBookPage)) {
      clues.book = m[1].str();
      clues.map_page = m[2].str();
    }
    if (std::regex_search(src, m, kMapName)) {
      std::string name = detail::trim(m[1].str());
      if (!name.empty()) clues.map_name = name;
    }
    std::set<std::string> seen;
    for (auto it = std::sregex_iterator(src.begin(), src.end(), kStreet); it != std::sregex_iterator(); ++it) {
      std::string street = (*it)[1].str();
      if (seen.insert(street).second) clues.streets.push_back(std::move(street));
    }
    return clues;
  }
};

// Uses `backend` when given, falling back to rules when it is unreachable or
// returns garbage.
inline GeoClues extract_clues(std::string_view page_text, const ClueExtractor* backend = nullptr) {
  if (backend) {
    try {
      return backend->extract(page_text);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kBackendUnavailable && e.code() != ErrorCode::kBackendMalformedResponse) throw;
    }
  }
  return RuleClueExtractor().extract(page_text);
}

struct MapIndexEntry {
  std::string canonical_name;
  std::string book;
  std::string page;
  std::optional<std::string> geometry_ref;
  std::string tract_id;

  friend bool operator==(const MapIndexEntry&, const MapIndexEntry&) = default;
};

// Lowercase, punctuation to spaces, leading "map of" / "the" removed.
inline std::string normalize_map_name(std::string_view name) {
  std::u32string cps = text::decode_utf8(name);
  for (auto& c : cps) {
    if (!text::is_alnum(c)) c = U' ';
  }
  std::string norm = text::encode_utf8(text::normalize(cps));
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::string_view prefix : {"map of ", "the "}) {
      if (norm.size() > prefix.size() && norm.compare(0, prefix.size(), prefix) == 0) {
        norm.erase(0, prefix.size());
        changed = true;
      }
    }
  }
  return norm;
}

class MapIndex {
 public:
  MapIndex() = default;

  explicit MapIndex(std::vector<MapIndexEntry> entries) : entries_(std::move(entries)) {
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& e : entries_) {
      if (!keys.insert({detail::fold_key(e.book), detail::fold_key(e.page)}).second) {
        throw Error(ErrorCode::kDuplicateKey, "map index repeats book " + e.book + " page " + e.page);
      }
      normalized_.push_back(normalize_map_name(e.canonical_name));
    }
  }

  // Header: canonical_name,book,page,tract_id,geometry_ref
  static MapIndex parse_csv(std::istream& in) {
    const auto table = csv::Table::parse(in, {"canonical_name", "book", "page", "tract_id", "geometry_ref"});
    std::vector<MapIndexEntry> entries;
    for (std::size_t r = 0; r < table.size(); ++r) {
      MapIndexEntry e;
      e.canonical_name = table.get(r, "canonical_name");
      e.book = detail::trim(table.get(r, "book"));
      e.page = detail::trim(table.get(r, "page"));
      e.tract_id = detail::trim(table.get(r, "tract_id"));
      if (auto ref = detail::trim(table.get(r, "geometry_ref")); !ref.empty()) e.geometry_ref = ref;
      if (e.canonical_name.empty() || e.book.empty() || e.page.empty() || e.tract_id.empty()) {
        throw Error(ErrorCode::kParse, "map index line " + std::to_string(table.line(r)) + " has empty fields");
      }
      entries.push_back(std::move(e));
    }
    return MapIndex(std::move(entries));
  }

  static MapIndex load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open map index " + path);
    return parse_csv(in);
  }

  const std::vector<MapIndexEntry>& entries() const { return entries_; }
  const std::string& normalized_name(std::size_t i) const { return normalized_[i]; }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<MapIndexEntry> entries_;
  std::vector<std::string> normalized_;
};

enum class Method { kExactBookPage, kFuzzyName, kManualOverride, kUnresolved };

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::kExactBookPage: return "exact-book-page";
    case Method::kFuzzyName: return "fuzzy-name";
    case Method::kManualOverride: return "manual-override";
    case Method::kUnresolved: return "unresolved";
  }
  return "unresolved";
}

inline Method method_from_string(std::string_view s) {
  for (Method m : {Method::kExactBookPage, Method::kFuzzyName, Method::kManualOverride, Method::kUnresolved}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorCode::kParse, "unknown resolution method '" + std::string(s) + "'");
}

struct MapMatch {
  MapIndexEntry entry;
  double score = 0.0;
  Method method = Method::kUnresolved;
};

// Exact (book, page) wins outright with score 1.0. Otherwise the map name is
// compared to every canonical name by trigram Jaccard; the best entry at or
// above min_score wins, ties going to the lexicographically smallest name.
inline std::optional<MapMatch> match_map(const GeoClues& clues, const MapIndex& index, double min_score = 0.8) {
  if (index.empty()) throw Error(ErrorCode::kInvalidArgument, "map index is empty");
  if (clues.book && clues.map_page) {
    const auto book = detail::fold_key(*clues.book);
    const auto page = detail::fold_key(*clues.map_page);
    for (const auto& e : index.entries()) {
      if (detail::fold_key(e.book) == book && detail::fold_key(e.page) == page) {
        return MapMatch{e, 1.0, Method::kExactBookPage};
      }
    }
  }
  if (!clues.map_name) return std::nullopt;
  const std::string name = normalize_map_name(*clues.map_name);
  if (name.empty()) return std::nullopt;
  std::optional<std::size_t> best;
  double best_score = -1.0;
  for (std::size_t i = 0; i < index.entries().size(); ++i) {
    if (index.normalized_name(i).empty()) continue;
    const double s = span::jaccard_trigram(name, index.normalized_name(i));
    const bool better = s > best_score ||
                        (s == best_score && index.entries()[i].canonical_name < index.entries()[*best].canonical_name);
    if (better) {
      best = i;
      best_score = s;
    }
  }
  if (!best || best_score < min_score) return std::nullopt;
  return MapMatch{index.entries()[*best], best_score, Method::kFuzzyName};
}

using LonLat = std::array<double, 2>;
using Ring = std::vector<LonLat>;

// GeoJSON Polygon: outer ring first, then holes. Rings are closed.
struct Polygon {
  std::vector<Ring> rings;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

inline void validate_polygon(const Polygon& p) {
  if (p.rings.empty()) throw Error(ErrorCode::kParse, "polygon has no rings");
  for (const auto& ring : p.rings) {
    if (ring.size() < 4) throw Error(ErrorCode::kParse, "polygon ring needs at least 4 positions");
    if (ring.front() != ring.back()) throw Error(ErrorCode::kParse, "polygon ring is not closed");
  }
}

inline nlohmann::json polygon_to_geojson(const Polygon& p) {
  return {{"type", "Polygon"}, {"coordinates", p.rings}};
}

// Accepts a bare Polygon geometry or a Feature wrapping one.
inline Polygon polygon_from_geojson(const nlohmann::json& j) {
  try {
    const nlohmann::json& geometry = j.at("type") == "Feature" ? j.at("geometry") : j;
    if (geometry.at("type") != "Polygon") throw Error(ErrorCode::kParse, "geometry is not a Polygon");
    Polygon p;
    geometry.at("coordinates").get_to(p.rings);
    validate_polygon(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad GeoJSON polygon: ") + e.what());
  }
}

class GeometryStore {
 public:
  virtual ~GeometryStore() = default;
  // nullopt when the store has no geometry for `ref`; throws
  // kStoreUnavailable when the store cannot be reached.
  virtual std::optional<Polygon> fetch(const std::string& ref) const = 0;
};

// One GeoJSON file per geometry ref: <dir>/<ref>.geojson.
class DirectoryGeometryStore final : public GeometryStore {
 public:
  explicit DirectoryGeometryStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<Polygon> fetch(const std::string& ref) const override {
    if (!std::filesystem::is_directory(dir_)) {
      throw Error(ErrorCode::kStoreUnavailable, "geometry directory " + dir_.string() + " is not available");
    }
    if (ref.empty() || ref.find('/') != std::string::npos || ref.find("..") != std::string::npos) return std::nullopt;
    const auto path = dir_ / (ref + ".geojson");
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::kParse, "malformed GeoJSON in " + path.string());
    return polygon_from_geojson(j);
  }

  void store(const std::string& ref, const Polygon& p) const {
    validate_polygon(p);
    std::filesystem::create_directories(dir_);
    std::ofstream out(dir_ / (ref + ".geojson"), std::ios::binary | std::ios::trunc);
    out << polygon_to_geojson(p).dump() << '\n';
    if (!out) throw Error(ErrorCode::kIo, "cannot write geometry " + ref);
  }

 private:
  std::filesystem::path dir_;
};

inline Polygon lookup_geometry(const MapIndexEntry& entry, const GeometryStore& store) {
  if (!entry.geometry_ref) throw Error(ErrorCode::kNotFound, "map '" + entry.canonical_name + "' has no geometry ref");
  auto polygon = store.fetch(*entry.geometry_ref);
  if (!polygon) throw Error(ErrorCode::kNotFound, "no geometry for ref " + *entry.geometry_ref);
  return *std::move(polygon);
}

struct GeoResolution {
  PageKey key;
  std::optional<std::string> tract_id;
  std::optional<Polygon> geometry;
  Method method = Method::kUnresolved;
  double match_score = 0.0;
  // Clue keys, carried so manual overrides can be applied later.
  std::optional<std::string> book;
  std::optional<std::string> map_page;

  friend bool operator==(const GeoResolution&, const GeoResolution&) = default;
};

inline GeoResolution resolve(const PageKey& key, const GeoClues& clues, const MapIndex& index,
                             const GeometryStore* store, double min_score = 0.8) {
  GeoResolution r;
  r.key = key;
  r.book = clues.book;
  r.map_page = clues.map_page;
  auto match = match_map(clues, index, min_score);
  if (!match) return r;
  r.tract_id = match->entry.tract_id;
  r.method = match->method;
  r.match_score = match->score;
  if (store && match->entry.geometry_ref) r.geometry = store->fetch(*match->entry.geometry_ref);
  return r;
}

struct OverrideEntry {
  std::string book;
  std::string page;
  std::string tract_id;
  std::optional<std::string> geometry_ref;
};

class OverrideTable {
 public:
  OverrideTable() = default;

  explicit OverrideTable(const std::vector<OverrideEntry>& entries) {
    for (const auto& e : entries) {
      auto key = std::make_pair(detail::fold_key(e.book), detail::fold_key(e.page));
      if (!entries_.emplace(std::move(key), e).second) {
        throw Error(ErrorCode::kDuplicateKey, "override table repeats book " + e.book + " page " + e.page);
      }
    }
  }

  // Header: book,page,tract_id[,geometry_ref]
  static OverrideTable parse_csv(std::istream& in) {
    const auto table = csv::Table::parse(in, {"book", "page", "tract_id"});
    std::vector<OverrideEntry> entries;
    for (std::size_t r = 0; r < table.size(); ++r) {
      OverrideEntry e{detail::trim(table.get(r, "book")), detail::trim(table.get(r, "page")),
                      detail::trim(table.get(r, "tract_id")), std::nullopt};
      if (auto ref = detail::trim(table.get(r, "geometry_ref")); !ref.empty()) e.geometry_ref = ref;
      if (e.book.empty() || e.page.empty() || e.tract_id.empty()) {
        throw Error(ErrorCode::kParse, "override line " + std::to_string(table.line(r)) + " has empty fields");
      }
      entries.push_back(std::move(e));
    }
    return OverrideTable(entries);
  }

  static OverrideTable load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open override table " + path);
    return parse_csv(in);
  }

  const OverrideEntry* find(std::string_view book, std::string_view page) const {
    auto it = entries_.find({detail::fold_key(book), detail::fold_key(page)});
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::pair<std::string, std::string>, OverrideEntry> entries_;
};

// Overrides replace unresolved and fuzzy results; exact matches are kept.
inline std::vector<GeoResolution> apply_overrides(std::vector<GeoResolution> resolutions, const OverrideTable& overrides,
                                                  const GeometryStore* store = nullptr) {
  for (auto& r : resolutions) {
    if (r.method == Method::kExactBookPage || r.method == Method::kManualOverride) continue;
    if (!r.book || !r.map_page) continue;
    const OverrideEntry* o = overrides.find(*r.book, *r.map_page);
    if (!o) continue;
    r.tract_id = o->tract_id;
    r.method = Method::kManualOverride;
    r.match_score = 1.0;
    r.geometry.reset();
    if (store && o->geometry_ref) r.geometry = store->fetch(*o->geometry_ref);
  }
  return resolutions;
}

inline double resolved_fraction(const std::vector<GeoResolution>& resolutions) {
  if (resolutions.empty()) return 0.0;
  const auto resolved = std::count_if(resolutions.begin(), resolutions.end(),
                                      [](const GeoResolution& r) { return r.method != Method::kUnresolved; });
  return static_cast<double>(resolved) / static_cast<double>(resolutions.size());
}

inline nlohmann::json to_feature(const GeoResolution& r) {
  nlohmann::json props = {{"doc_id", r.key.doc_id},
                          {"page_no", r.key.page_no},
                          {"tract_id", r.tract_id ? nlohmann::json(*r.tract_id) : nlohmann::json(nullptr)},
                          {"method", std::string(to_string(r.method))},
                          {"match_score", r.match_score}};
  return {{"type", "Feature"},
          {"geometry", r.geometry ? polygon_to_geojson(*r.geometry) : nlohmann::json(nullptr)},
          {"properties", std::move(props)}};
}

inline nlohmann::json export_geojson(const std::vector<GeoResolution>& resolutions) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& r : resolutions) features.push_back(to_feature(r));
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

// Schema check for exported resolution collections; returns one message per
// violation (empty when valid).
inline std::vector<std::string> validate_resolution_geojson(const nlohmann::json& fc) {
  std::vector<std::string> problems;
  if (!fc.is_object() || fc.value("type", "") != "FeatureCollection") problems.push_back("root is not a FeatureCollection");
  if (!fc.contains("features") || !fc["features"].is_array()) {
    problems.push_back("features is not an array");
    return problems;
  }
  for (std::size_t i = 0; i < fc["features"].size(); ++i) {
    const auto& f = fc["features"][i];
    const std::string where = "feature " + std::to_string(i) + ": ";
    if (!f.is_object() || f.value("type", "") != "Feature") {
      problems.push_back(where + "type is not Feature");
      continue;
    }
    if (!f.contains("geometry")) {
      problems.push_back(where + "missing geometry");
    } else if (!f["geometry"].is_null()) {
      try {
        polygon_from_geojson(f["geometry"]);
      } catch (const Error& e) {
        problems.push_back(where + e.what());
      }
    }
    if (!f.contains("properties") || !f["properties"].is_object()) {
      problems.push_back(where + "missing properties");
      continue;
    }
    const auto& p = f["properties"];
    if (!p.contains("doc_id") || !p["doc_id"].is_string()) problems.push_back(where + "doc_id must be a string");
    if (!p.contains("page_no") || !p["page_no"].is_number_integer() || p["page_no"].get<long long>() < 1) {
      problems.push_back(where + "page_no must be a positive integer");
    }
    if (!p.contains("tract_id") || !(p["tract_id"].is_string() || p["tract_id"].is_null())) {
      problems.push_back(where + "tract_id must be a string or null");
    }
    if (!p.contains("match_score") || !p["match_score"].is_number() || p["match_score"].get<double>() < 0.0 ||
        p["match_score"].get<double>() > 1.0) {
      problems.push_back(where + "match_score must be a number in [0,1]");
    }
    if (!p.contains("method") || !p["method"].is_string()) {
      problems.push_back(where + "method must be a string");
    } else {
      try {
        const Method m = method_from_string(p["method"].get<std::string>());
        if (m == Method::kUnresolved && !p["tract_id"].is_null()) problems.push_back(where + "unresolved with a tract_id");
        if (m != Method::kUnresolved && p["tract_id"].is_null()) problems.push_back(where + "resolved without a tract_id");
      } catch (const Error& e) {
        problems.push_back(where + e.what());
      }
    }
  }
  return problems;
}

}  // namespace geo
}  // namespace covenant
