#pragma once

// From confirmed covenant deeds to a deduplicated count of affected lots.
//
// Lot identity is (tract, block, lot). A tract covered by a tract-wide
// declaration contributes its full lot count once; individual lot records
// filed inside such a tract add nothing. gross - net is the removed count.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "covenant/corpus.hpp"
#include "covenant/csv.hpp"
#include "covenant/error.hpp"
#include "covenant/text.hpp"

namespace covenant {
namespace prevalence {

enum class Scope { kTractWide, kMultiLot, kSingleLot };

constexpr std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::kTractWide: return "tract-wide";
    case Scope::kMultiLot: return "multi-lot";
    case Scope::kSingleLot: return "single-lot";
  }
  return "single-lot";
}

inline Scope scope_from_string(std::string_view s) {
  for (Scope v : {Scope::kTractWide, Scope::kMultiLot, Scope::kSingleLot}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::kParse, "unknown scope '" + std::string(s) + "'");
}

struct CovenantRecord {
  std::string deed_id;
  std::optional<CalendarDate> recorded_date;
  std::optional<std::string> tract_id;
  std::optional<std::string> block;
  std::vector<std::string> lots;
  Scope scope = Scope::kSingleLot;
  std::optional<std::size_t> lot_count_if_tract_wide;

  friend bool operator==(const CovenantRecord&, const CovenantRecord&) = default;
};

inline void validate(const CovenantRecord& r) {
  switch (r.scope) {
    case Scope::kTractWide:
      if (!r.lot_count_if_tract_wide || *r.lot_count_if_tract_wide == 0 || !r.lots.empty()) {
        throw Error(ErrorCode::kInvalidArgument, r.deed_id + ": tract-wide needs a positive lot count and no lots");
      }
      break;
    case Scope::kMultiLot:
      if (r.lots.size() < 2) throw Error(ErrorCode::kInvalidArgument, r.deed_id + ": multi-lot needs >= 2 lots");
      break;
    case Scope::kSingleLot:
      if (r.lots.size() != 1) throw Error(ErrorCode::kInvalidArgument, r.deed_id + ": single-lot needs exactly 1 lot");
      break;
  }
}

// Lot numbers are strings ("7A" exists); trimmed and uppercased.
inline std::string normalize_lot(std::string_view lot) {
  std::string out;
  for (char c : lot) {
    if (c == ' ' || c == '\t') continue;
    out.push_back(c >= 'a' && c <= 'z' ? static_cast<char>(c - 32) : c);
  }
  return out;
}

struct ScopeHeuristic {
  std::vector<std::string> declaration_terms = {"declaration"};
  std::vector<std::string> whole_tract_phrases = {
      "all lots in said tract",      "all of the lots in said tract", "all lots in the tract",
      "all lots shown on said map",  "all lots shown upon said map",  "each and every lot",
      "the entire tract",            "all of said tract",             "all lots and parcels",
      "all of the lots shown",       "every lot in said subdivision", "all lots in said subdivision"};
};

// Optional model-backed tract-wide judgement; nullopt means "no opinion".
class ScopeClassifier {
 public:
  virtual ~ScopeClassifier() = default;
  virtual std::optional<bool> tract_wide(std::string_view deed_text) const = 0;
};

inline bool declaration_heuristic(std::string_view deed_text, const ScopeHeuristic& h = {}) {
  const std::string norm = text::normalize(deed_text);
  const auto has = [&](const std::vector<std::string>& terms) {
    return std::any_of(terms.begin(), terms.end(),
                       [&](const std::string& t) { return norm.find(text::normalize(t)) != std::string::npos; });
  };
  return has(h.declaration_terms) && has(h.whole_tract_phrases);
}

// "Lot 12", "Lots 3, 4 and 7", "Lots No. 5 & 6".
inline std::vector<std::string> extract_lots(std::string_view deed_text) {
  static const std::regex kLots(
      R"(\b[Ll][Oo][Tt][Ss]?\s+(?:[Nn][Oo][Ss]?\.?\s*)?([0-9]+[A-Za-z]?(?:\s*(?:,|and|&)\s*(?:and\s+)?[0-9]+[A-Za-z]?)*))");
  static const std::regex kNumber(R"([0-9]+[A-Za-z]?)");
  const std::string src(deed_text);
  std::vector<std::string> lots;
  std::set<std::string> seen;
  for (auto it = std::sregex_iterator(src.begin(), src.end(), kLots); it != std::sregex_iterator(); ++it) {
    const std::string list = (*it)[1].str();
    for (auto n = std::sregex_iterator(list.begin(), list.end(), kNumber); n != std::sregex_iterator(); ++n) {
      std::string lot = normalize_lot(n->str());
      if (seen.insert(lot).second) lots.push_back(std::move(lot));
    }
  }
  return lots;
}

inline Scope classify_scope(std::string_view deed_text, const std::vector<std::string>& lots,
                            const ScopeClassifier* backend = nullptr, const ScopeHeuristic& h = {}) {
  if (declaration_heuristic(deed_text, h)) return Scope::kTractWide;
  if (backend && !deed_text.empty()) {
    if (auto verdict = backend->tract_wide(deed_text); verdict && *verdict) return Scope::kTractWide;
  }
  std::vector<std::string> effective = lots;
  if (effective.empty()) effective = extract_lots(deed_text);
  if (effective.size() >= 2) return Scope::kMultiLot;
  if (effective.size() == 1) return Scope::kSingleLot;
  throw Error(ErrorCode::kUnclassifiableScope, "no lots and no tract-wide signal; route to manual review");
}

struct LotKey {
  std::string tract_id;
  std::string block;
  std::string lot;
  friend auto operator<=>(const LotKey&, const LotKey&) = default;
  friend bool operator==(const LotKey&, const LotKey&) = default;
};

struct TractTally {
  std::size_t tract_wide_lots = 0;
  std::size_t individual_lots = 0;
  std::size_t net_lots() const { return tract_wide_lots + individual_lots; }
};

struct DedupResult {
  std::set<LotKey> lots;                            // individual lots outside tract-wide tracts
  std::map<std::string, std::size_t> tract_wide;    // tract -> lot count
  std::size_t undeduplicated_lots = 0;              // records without a tract id
  std::size_t gross_lots = 0;
  std::size_t removed = 0;

  std::size_t net_lots() const {
    std::size_t n = lots.size() + undeduplicated_lots;
    for (const auto& [tract, count] : tract_wide) n += count;
    return n;
  }

  std::map<std::string, TractTally> per_tract() const {
    std::map<std::string, TractTally> out;
    for (const auto& [tract, count] : tract_wide) out[tract].tract_wide_lots = count;
    for (const auto& key : lots) ++out[key.tract_id].individual_lots;
    return out;
  }
};

inline std::size_t gross_lots(const CovenantRecord& r) {
  return r.scope == Scope::kTractWide ? r.lot_count_if_tract_wide.value_or(0) : r.lots.size();
}

inline DedupResult dedup_lots(const std::vector<CovenantRecord>& records) {
  DedupResult out;
  // Pass 1: tract-wide coverage. Repeated declarations for one tract keep
  // the largest lot count.
  for (const auto& r : records) {
    out.gross_lots += gross_lots(r);
    if (r.scope != Scope::kTractWide) continue;
    if (!r.tract_id) {
      out.undeduplicated_lots += gross_lots(r);
      continue;
    }
    auto& count = out.tract_wide[*r.tract_id];
    count = std::max(count, *r.lot_count_if_tract_wide);
  }
  // Pass 2: individual lots not already covered.
  for (const auto& r : records) {
    if (r.scope == Scope::kTractWide) continue;
    if (!r.tract_id) {
      out.undeduplicated_lots += r.lots.size();
      continue;
    }
    if (out.tract_wide.count(*r.tract_id)) continue;
    for (const auto& lot : r.lots) out.lots.insert({*r.tract_id, r.block.value_or(""), normalize_lot(lot)});
  }
  out.removed = out.gross_lots - out.net_lots();
  return out;
}

// Records that reproduce a dedup result exactly, for re-running dedup on
// its own output.
inline std::vector<CovenantRecord> to_records(const DedupResult& d) {
  std::vector<CovenantRecord> out;
  for (const auto& [tract, count] : d.tract_wide) {
    CovenantRecord r;
    r.deed_id = "tract:" + tract;
    r.tract_id = tract;
    r.scope = Scope::kTractWide;
    r.lot_count_if_tract_wide = count;
    out.push_back(std::move(r));
  }
  for (const auto& key : d.lots) {
    CovenantRecord r;
    r.deed_id = "lot:" + key.tract_id + "/" + key.block + "/" + key.lot;
    r.tract_id = key.tract_id;
    if (!key.block.empty()) r.block = key.block;
    r.lots = {key.lot};
    r.scope = Scope::kSingleLot;
    out.push_back(std::move(r));
  }
  return out;
}

struct HousingStock {
  int year = 0;
  std::size_t dwelling_units = 0;
};

struct ReportInputs {
  std::size_t tract_wide_deeds = 0;
  std::size_t tract_wide_lots = 0;
  std::size_t multi_lot_deeds = 0;
  std::size_t multi_lot_lots = 0;
  std::size_t single_lot_deeds = 0;
  std::size_t dedup_removed = 0;
};

struct PrevalenceReport {
  std::size_t tract_wide_deeds = 0;
  std::size_t tract_wide_lots = 0;
  std::size_t multi_lot_deeds = 0;
  std::size_t multi_lot_lots = 0;
  std::size_t single_lot_deeds = 0;
  std::size_t dedup_removed = 0;
  std::size_t net_lots = 0;
  double coverage_ratio = 0.0;
  int stock_year = 0;
  std::size_t dwelling_units = 0;
  std::size_t undeduplicated_lots = 0;
};

inline PrevalenceReport estimate_coverage(const ReportInputs& in, const HousingStock& stock) {
  if (stock.dwelling_units == 0) throw Error(ErrorCode::kInvalidArgument, "dwelling units must be positive");
  const std::size_t gross = in.tract_wide_lots + in.multi_lot_lots + in.single_lot_deeds;
  if (in.dedup_removed > gross) throw Error(ErrorCode::kInvalidArgument, "removed lots exceed gross lots");
  PrevalenceReport r;
  r.tract_wide_deeds = in.tract_wide_deeds;
  r.tract_wide_lots = in.tract_wide_lots;
  r.multi_lot_deeds = in.multi_lot_deeds;
  r.multi_lot_lots = in.multi_lot_lots;
  r.single_lot_deeds = in.single_lot_deeds;
  r.dedup_removed = in.dedup_removed;
  r.net_lots = gross - in.dedup_removed;
  r.coverage_ratio = static_cast<double>(r.net_lots) / static_cast<double>(stock.dwelling_units);
  r.stock_year = stock.year;
  r.dwelling_units = stock.dwelling_units;
  return r;
}

inline ReportInputs tally(const std::vector<CovenantRecord>& records, const DedupResult& dedup) {
  ReportInputs in;
  for (const auto& r : records) {
    switch (r.scope) {
      case Scope::kTractWide:
        ++in.tract_wide_deeds;
        in.tract_wide_lots += gross_lots(r);
        break;
      case Scope::kMultiLot:
        ++in.multi_lot_deeds;
        in.multi_lot_lots += r.lots.size();
        break;
      case Scope::kSingleLot:
        ++in.single_lot_deeds;
        break;
    }
  }
  in.dedup_removed = dedup.removed;
  return in;
}

inline PrevalenceReport build_report(const std::vector<CovenantRecord>& records, const HousingStock& stock) {
  for (const auto& r : records) validate(r);
  const DedupResult dedup = dedup_lots(records);
  PrevalenceReport report = estimate_coverage(tally(records, dedup), stock);
  report.undeduplicated_lots = dedup.undeduplicated_lots;
  return report;
}

inline nlohmann::json to_json(const PrevalenceReport& r) {
  return {{"tract_wide_deeds", r.tract_wide_deeds}, {"tract_wide_lots", r.tract_wide_lots},
          {"multi_lot_deeds", r.multi_lot_deeds},   {"multi_lot_lots", r.multi_lot_lots},
          {"single_lot_deeds", r.single_lot_deeds}, {"dedup_removed", r.dedup_removed},
          {"net_lots", r.net_lots},                 {"coverage_ratio", r.coverage_ratio},
          {"stock_year", r.stock_year},             {"dwelling_units", r.dwelling_units},
          {"undeduplicated_lots", r.undeduplicated_lots}};
}

inline std::string per_tract_csv(const DedupResult& d) {
  std::string out = csv::format_row({"tract_id", "tract_wide_lots", "individual_lots", "net_lots"});
  for (const auto& [tract, t] : d.per_tract()) {
    out += csv::format_row({tract, std::to_string(t.tract_wide_lots), std::to_string(t.individual_lots),
                            std::to_string(t.net_lots())});
  }
  return out;
}

// Header: deed_id,date,tract_id,block,lots,scope,lot_count_if_tract_wide.
// Lots are pipe-separated.
inline std::vector<CovenantRecord> parse_records_csv(std::istream& in) {
  const auto table =
      csv::Table::parse(in, {"deed_id", "date", "tract_id", "block", "lots", "scope", "lot_count_if_tract_wide"});
  std::vector<CovenantRecord> out;
  out.reserve(table.size());
  for (std::size_t row = 0; row < table.size(); ++row) {
    const std::string where = "covenant CSV line " + std::to_string(table.line(row)) + ": ";
    try {
      CovenantRecord r;
      r.deed_id = table.get(row, "deed_id");
      if (const auto& d = table.get(row, "date"); !d.empty()) r.recorded_date = CalendarDate::parse(d);
      if (const auto& t = table.get(row, "tract_id"); !t.empty()) r.tract_id = t;
      if (const auto& b = table.get(row, "block"); !b.empty()) r.block = b;
      const std::string& lots = table.get(row, "lots");
      std::size_t pos = 0;
      while (!lots.empty() && pos <= lots.size()) {
        const auto bar = lots.find('|', pos);
        std::string lot = normalize_lot(lots.substr(pos, bar == std::string::npos ? std::string::npos : bar - pos));
        if (!lot.empty()) r.lots.push_back(std::move(lot));
        if (bar == std::string::npos) break;
        pos = bar + 1;
      }
      r.scope = scope_from_string(table.get(row, "scope"));
      if (const auto& c = table.get(row, "lot_count_if_tract_wide"); !c.empty()) {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(c, &used);
        if (used != c.size()) throw Error(ErrorCode::kParse, "bad lot count '" + c + "'");
        r.lot_count_if_tract_wide = static_cast<std::size_t>(v);
      }
      validate(r);
      out.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    }
  }
  return out;
}

inline std::vector<CovenantRecord> load_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open covenant records " + path);
  return parse_records_csv(in);
}

}  // namespace prevalence
}  // namespace covenant
