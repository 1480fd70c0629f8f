#pragma once

// Human review queue for flagged pages.
//
// Every state change is first appended to a journal (write-ahead) and only
// then applied in memory, all under one mutex, so transitions are
// linearizable. Decisions are compare-and-set on the item revision; there
// are no locks held between reading an item and deciding it.
//
// The registry is the subset of journal events produced by decisions. It
// keeps the original, unredacted page text alongside each decision and is
// never rewritten.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unistd.h>
#include <utility>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "covenant/corpus.hpp"
#include "covenant/error.hpp"
#include "covenant/nndetect.hpp"
#include "covenant/spanloc.hpp"

namespace covenant {
namespace review {

using nlohmann::json;

enum class Status { kPending, kConfirmed, kRejected, kCorrected };
enum class Verdict { kConfirm, kReject, kCorrect };
enum class Role { kRecorder, kCounsel };
enum class Order { kConfidenceDesc, kDateAsc };

constexpr std::string_view to_string(Status s) {
  switch (s) {
    case Status::kPending: return "pending";
    case Status::kConfirmed: return "confirmed";
    case Status::kRejected: return "rejected";
    case Status::kCorrected: return "corrected";
  }
  return "pending";
}
constexpr std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kConfirm: return "confirm";
    case Verdict::kReject: return "reject";
    case Verdict::kCorrect: return "correct";
  }
  return "confirm";
}
constexpr std::string_view to_string(Role r) { return r == Role::kCounsel ? "counsel" : "recorder"; }
constexpr std::string_view to_string(Order o) { return o == Order::kDateAsc ? "date-asc" : "confidence-desc"; }

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const E (&values)[N], const char* what) {
  for (E v : values) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::kInvalidArgument, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

inline Status status_from_string(std::string_view s) {
  static constexpr Status kAll[] = {Status::kPending, Status::kConfirmed, Status::kRejected, Status::kCorrected};
  return parse_enum(s, kAll, "status");
}
inline Verdict verdict_from_string(std::string_view s) {
  static constexpr Verdict kAll[] = {Verdict::kConfirm, Verdict::kReject, Verdict::kCorrect};
  return parse_enum(s, kAll, "verdict");
}
inline Role role_from_string(std::string_view s) {
  static constexpr Role kAll[] = {Role::kRecorder, Role::kCounsel};
  return parse_enum(s, kAll, "role");
}
inline Order order_from_string(std::string_view s) {
  static constexpr Order kAll[] = {Order::kConfidenceDesc, Order::kDateAsc};
  return parse_enum(s, kAll, "order");
}

struct ReviewItem {
  std::string item_id;
  PageKey key;
  double confidence = 0.0;
  std::string quote;
  std::string detector;
  span::Span span;
  double similarity = 0.0;
  std::optional<BoundingBox> bbox;
  std::optional<CalendarDate> recorded_date;
  Status status = Status::kPending;
  std::optional<span::Span> corrected_span;
  std::optional<BoundingBox> corrected_bbox;
  std::optional<std::string> reviewer_id;
  std::optional<Role> reviewer_role;
  std::optional<std::string> decided_at;
  std::int64_t revision = 1;
  std::string enqueued_at;

  span::Span final_span() const { return corrected_span.value_or(span); }
  std::optional<BoundingBox> final_bbox() const { return corrected_span ? corrected_bbox : bbox; }
};

struct DecisionRecord {
  Verdict verdict = Verdict::kConfirm;
  Status status = Status::kConfirmed;
  std::string reviewer_id;
  Role role = Role::kRecorder;
  std::string decided_at;
  span::Span final_span;
  std::int64_t revision = 0;
};

struct RegistryEntry {
  std::string entry_id;
  std::string item_id;
  PageKey key;
  std::string original_text_snapshot;
  DecisionRecord decision;
  std::string created_at;
};

inline json span_json(const span::Span& s) { return {{"start", s.start}, {"end", s.end}}; }
inline span::Span span_from_json(const json& j) { return {j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()}; }

template <typename T, typename F>
json opt_json(const std::optional<T>& v, F&& f) {
  return v ? f(*v) : json(nullptr);
}

inline json to_json(const ReviewItem& it) {
  return {{"item_id", it.item_id},
          {"doc_id", it.key.doc_id},
          {"page_no", it.key.page_no},
          {"confidence", it.confidence},
          {"quote", it.quote},
          {"detector", it.detector},
          {"span", span_json(it.span)},
          {"similarity", it.similarity},
          {"bbox", opt_json(it.bbox, [](const BoundingBox& b) { return json(b); })},
          {"recorded_date", opt_json(it.recorded_date, [](const CalendarDate& d) { return json(d.str()); })},
          {"status", std::string(to_string(it.status))},
          {"corrected_span", opt_json(it.corrected_span, span_json)},
          {"corrected_bbox", opt_json(it.corrected_bbox, [](const BoundingBox& b) { return json(b); })},
          {"reviewer_id", opt_json(it.reviewer_id, [](const std::string& s) { return json(s); })},
          {"reviewer_role", opt_json(it.reviewer_role, [](Role r) { return json(std::string(to_string(r))); })},
          {"decided_at", opt_json(it.decided_at, [](const std::string& s) { return json(s); })},
          {"revision", it.revision},
          {"enqueued_at", it.enqueued_at}};
}

inline ReviewItem item_from_json(const json& j) {
  ReviewItem it;
  it.item_id = j.at("item_id").get<std::string>();
  it.key = {j.at("doc_id").get<std::string>(), j.at("page_no").get<int>()};
  it.confidence = j.at("confidence").get<double>();
  it.quote = j.at("quote").get<std::string>();
  it.detector = j.value("detector", std::string());
  it.span = span_from_json(j.at("span"));
  it.similarity = j.value("similarity", 0.0);
  if (!j.at("bbox").is_null()) it.bbox = j.at("bbox").get<BoundingBox>();
  if (!j.at("recorded_date").is_null()) it.recorded_date = CalendarDate::parse(j.at("recorded_date").get<std::string>());
  it.status = status_from_string(j.at("status").get<std::string>());
  if (!j.at("corrected_span").is_null()) it.corrected_span = span_from_json(j.at("corrected_span"));
  if (!j.at("corrected_bbox").is_null()) it.corrected_bbox = j.at("corrected_bbox").get<BoundingBox>();
  if (!j.at("reviewer_id").is_null()) it.reviewer_id = j.at("reviewer_id").get<std::string>();
  if (!j.at("reviewer_role").is_null()) it.reviewer_role = role_from_string(j.at("reviewer_role").get<std::string>());
  if (!j.at("decided_at").is_null()) it.decided_at = j.at("decided_at").get<std::string>();
  it.revision = j.at("revision").get<std::int64_t>();
  it.enqueued_at = j.value("enqueued_at", std::string());
  return it;
}

inline json to_json(const RegistryEntry& e) {
  return {{"entry_id", e.entry_id},
          {"item_id", e.item_id},
          {"doc_id", e.key.doc_id},
          {"page_no", e.key.page_no},
          {"original_text_snapshot", e.original_text_snapshot},
          {"decision",
           {{"verdict", std::string(to_string(e.decision.verdict))},
            {"status", std::string(to_string(e.decision.status))},
            {"reviewer_id", e.decision.reviewer_id},
            {"role", std::string(to_string(e.decision.role))},
            {"decided_at", e.decision.decided_at},
            {"final_span", span_json(e.decision.final_span)},
            {"revision", e.decision.revision}}},
          {"created_at", e.created_at}};
}

inline RegistryEntry registry_from_json(const json& j) {
  RegistryEntry e;
  e.entry_id = j.at("entry_id").get<std::string>();
  e.item_id = j.at("item_id").get<std::string>();
  e.key = {j.at("doc_id").get<std::string>(), j.at("page_no").get<int>()};
  e.original_text_snapshot = j.at("original_text_snapshot").get<std::string>();
  const json& d = j.at("decision");
  e.decision.verdict = verdict_from_string(d.at("verdict").get<std::string>());
  e.decision.status = status_from_string(d.at("status").get<std::string>());
  e.decision.reviewer_id = d.at("reviewer_id").get<std::string>();
  e.decision.role = role_from_string(d.at("role").get<std::string>());
  e.decision.decided_at = d.at("decided_at").get<std::string>();
  e.decision.final_span = span_from_json(d.at("final_span"));
  e.decision.revision = d.at("revision").get<std::int64_t>();
  e.created_at = j.at("created_at").get<std::string>();
  return e;
}

// Final status of every decided item, from registry entries alone.
inline std::map<std::string, Status> replay_registry(const std::vector<RegistryEntry>& entries) {
  std::map<std::string, Status> out;
  for (const auto& e : entries) out[e.item_id] = e.decision.status;
  return out;
}

// Append-only event storage.
class Journal {
 public:
  virtual ~Journal() = default;
  // Durable once it returns; throws kIo otherwise.
  virtual void append(const json& event) = 0;
  virtual std::vector<json> read_all() const = 0;
};

class MemoryJournal final : public Journal {
 public:
  void append(const json& event) override { events_.push_back(event); }
  std::vector<json> read_all() const override { return events_; }

 private:
  std::vector<json> events_;
};

// NDJSON file, one event per line, fsync'd per append. A torn final line
// (crash mid-write) is ignored on replay and overwritten by the next append.
class FileJournal final : public Journal {
 public:
  explicit FileJournal(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    truncate_torn_tail();
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::kIo, "cannot open journal " + path_.string());
  }
  ~FileJournal() override {
    if (fd_ >= 0) ::close(fd_);
  }
  FileJournal(const FileJournal&) = delete;
  FileJournal& operator=(const FileJournal&) = delete;

  void append(const json& event) override {
    const std::string line = event.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
      if (n < 0) throw Error(ErrorCode::kIo, "journal write failed");
      written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw Error(ErrorCode::kIo, "journal fsync failed");
  }

  std::vector<json> read_all() const override {
    std::vector<json> out;
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (in.eof()) break;  // no trailing newline: torn write
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::kParse, "corrupt journal line in " + path_.string());
      out.push_back(std::move(j));
    }
    return out;
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  void truncate_torn_tail() {
    if (!std::filesystem::exists(path_)) return;
    std::ifstream in(path_, std::ios::binary);
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto last_newline = data.find_last_of('\n');
    const std::size_t keep = last_newline == std::string::npos ? 0 : last_newline + 1;
    if (keep != data.size()) std::filesystem::resize_file(path_, keep);
  }

  std::filesystem::path path_;
  int fd_ = -1;
};

using Clock = std::function<std::string()>;

// UTC, millisecond precision, e.g. 2024-05-01T12:00:00.000Z.
inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

struct Reviewer {
  std::string id;
  Role role = Role::kRecorder;
};

struct Stats {
  std::map<Status, std::size_t> by_status;
  std::size_t total = 0;
  std::optional<double> mean_confidence;
  std::map<std::string, std::size_t> decisions_per_reviewer;
};

inline json to_json(const Stats& s) {
  json by_status = json::object();
  for (Status st : {Status::kPending, Status::kConfirmed, Status::kRejected, Status::kCorrected}) {
    auto it = s.by_status.find(st);
    by_status[std::string(to_string(st))] = it == s.by_status.end() ? 0 : it->second;
  }
  return {{"by_status", by_status},
          {"total", s.total},
          {"mean_confidence", s.mean_confidence ? json(*s.mean_confidence) : json(nullptr)},
          {"decisions_per_reviewer", s.decisions_per_reviewer}};
}

struct ExportFilter {
  std::optional<std::string> from;  // inclusive, compared against decided_at
  std::optional<std::string> to;    // inclusive
};

class ReviewService {
 public:
  explicit ReviewService(std::shared_ptr<Journal> journal, Clock clock = utc_now)
      : journal_(std::move(journal)), clock_(std::move(clock)) {
    for (const auto& event : journal_->read_all()) apply(event);
  }

  // Idempotent per (page, localized span): re-enqueueing returns the item
  // already queued.
  ReviewItem enqueue(const nn::Detection& detection, const span::SpanMatch& match, const PageRecord& page) {
    if (!detection.flagged) throw Error(ErrorCode::kNotFlagged, detection.key.str() + " is not flagged");
    if (!(detection.key == page.key())) throw Error(ErrorCode::kInvalidArgument, "detection and page keys differ");
    std::lock_guard lock(mu_);
    const auto dedup_key = std::make_tuple(page.key(), match.char_start, match.char_end);
    if (auto it = by_span_.find(dedup_key); it != by_span_.end()) return items_.at(it->second);

    ReviewItem item;
    item.item_id = next_item_id();
    item.key = page.key();
    item.confidence = detection.confidence;
    item.quote = detection.quote;
    item.detector = detection.detector;
    item.span = match.span();
    item.similarity = match.similarity;
    item.bbox = match.bbox;
    item.recorded_date = page.recorded_date;
    item.enqueued_at = clock_();
    json event = {{"type", "enqueue"}, {"item", to_json(item)}};
    if (!pages_.count(page.key())) event["page"] = page;
    journal_->append(event);
    apply(event);
    return item;
  }

  std::optional<ReviewItem> get(const std::string& item_id) const {
    std::lock_guard lock(mu_);
    auto it = items_.find(item_id);
    if (it == items_.end()) return std::nullopt;
    return it->second;
  }

  // Sorted by item id.
  std::vector<ReviewItem> list(std::optional<Status> status = std::nullopt) const {
    std::lock_guard lock(mu_);
    std::vector<ReviewItem> out;
    for (const auto& [id, item] : items_) {
      if (!status || item.status == *status) out.push_back(item);
    }
    return out;
  }

  // Does not claim the item; a later decide() may still lose the CAS.
  std::optional<ReviewItem> next_pending(const std::string& /*reviewer_id*/, Order order) const {
    std::lock_guard lock(mu_);
    const ReviewItem* best = nullptr;
    for (const auto& [id, item] : items_) {
      if (item.status != Status::kPending) continue;
      if (!best || precedes(item, *best, order)) best = &item;
    }
    if (!best) return std::nullopt;
    return *best;
  }

  ReviewItem decide(const std::string& item_id, std::int64_t revision, Verdict verdict, const Reviewer& reviewer,
                    std::optional<span::Span> corrected_span = std::nullopt) {
    if (reviewer.id.empty()) throw Error(ErrorCode::kInvalidArgument, "reviewer id is required");
    if (verdict == Verdict::kCorrect && !corrected_span) {
      throw Error(ErrorCode::kMissingCorrectedSpan, "correct verdict needs a corrected span");
    }
    std::lock_guard lock(mu_);
    auto it = items_.find(item_id);
    if (it == items_.end()) throw Error(ErrorCode::kNotFound, "no item " + item_id);
    const ReviewItem& current = it->second;
    if (current.revision != revision) {
      throw Error(ErrorCode::kRevisionConflict, item_id + " is at revision " + std::to_string(current.revision) +
                                                    ", not " + std::to_string(revision));
    }
    if (current.status != Status::kPending) throw Error(ErrorCode::kAlreadyDecided, item_id + " was already decided");

    const PageRecord& page = pages_.at(current.key);
    std::optional<BoundingBox> corrected_bbox;
    if (verdict == Verdict::kCorrect) {
      corrected_bbox = span_to_bbox(page, corrected_span->start, corrected_span->end);
    } else {
      corrected_span.reset();
    }

    DecisionRecord decision;
    decision.verdict = verdict;
    decision.status = verdict == Verdict::kConfirm ? Status::kConfirmed
                      : verdict == Verdict::kReject ? Status::kRejected
                                                    : Status::kCorrected;
    decision.reviewer_id = reviewer.id;
    decision.role = reviewer.role;
    decision.decided_at = clock_();
    decision.final_span = corrected_span.value_or(current.span);
    decision.revision = current.revision + 1;

    RegistryEntry entry;
    entry.entry_id = "entry-" + pad(registry_.size() + 1);
    entry.item_id = item_id;
    entry.key = current.key;
    entry.original_text_snapshot = page.text;
    entry.decision = decision;
    entry.created_at = decision.decided_at;

    json event = {{"type", "decide"},
                  {"item_id", item_id},
                  {"corrected_span", corrected_span ? span_json(*corrected_span) : json(nullptr)},
                  {"corrected_bbox", corrected_bbox ? json(*corrected_bbox) : json(nullptr)},
                  {"registry", to_json(entry)}};
    journal_->append(event);
    apply(event);
    return items_.at(item_id);
  }

  std::vector<RegistryEntry> registry() const {
    std::lock_guard lock(mu_);
    return registry_;
  }

  const PageRecord* page(const PageKey& key) const {
    std::lock_guard lock(mu_);
    auto it = pages_.find(key);
    return it == pages_.end() ? nullptr : &it->second;
  }

  std::vector<ReviewItem> items_for_page(const PageKey& key) const {
    std::lock_guard lock(mu_);
    std::vector<ReviewItem> out;
    for (const auto& [id, item] : items_) {
      if (item.key == key) out.push_back(item);
    }
    return out;
  }

  Stats stats() const {
    std::lock_guard lock(mu_);
    Stats s;
    double sum = 0.0;
    for (const auto& [id, item] : items_) {
      ++s.by_status[item.status];
      ++s.total;
      sum += item.confidence;
      if (item.reviewer_id) ++s.decisions_per_reviewer[*item.reviewer_id];
    }
    if (s.total > 0) s.mean_confidence = sum / static_cast<double>(s.total);
    return s;
  }

  // Confirmed and corrected items decided within the filter, ordered by
  // item id, plus a manifest with the record count and a SHA-256 of the
  // serialized records. Contains no export-time data, so repeated exports
  // are byte-identical.
  std::string export_packet(const ExportFilter& filter = {}) const {
    std::lock_guard lock(mu_);
    json records = json::array();
    for (const auto& [id, item] : items_) {
      if (item.status != Status::kConfirmed && item.status != Status::kCorrected) continue;
      const std::string& at = *item.decided_at;
      if (filter.from && at < *filter.from) continue;
      if (filter.to && at > *filter.to) continue;
      const span::Span s = item.final_span();
      const std::u32string text = text::decode_utf8(pages_.at(item.key).text);
      const auto bbox = item.final_bbox();
      records.push_back({{"item_id", item.item_id},
                         {"doc_id", item.key.doc_id},
                         {"page_no", item.key.page_no},
                         {"status", std::string(to_string(item.status))},
                         {"span_start", s.start},
                         {"span_end", s.end},
                         {"span_text", text::encode_utf8(std::u32string_view(text).substr(s.start, s.end - s.start))},
                         {"bbox", bbox ? json(*bbox) : json(nullptr)},
                         {"quote", item.quote},
                         {"reviewer_id", *item.reviewer_id},
                         {"reviewer_role", std::string(to_string(item.reviewer_role.value_or(Role::kRecorder)))},
                         {"decided_at", at}});
    }
    if (records.empty()) throw Error(ErrorCode::kEmptyRange, "no confirmed or corrected items in range");
    const std::string body = records.dump();
    json packet = {{"manifest",
                    {{"count", records.size()},
                     {"from", filter.from ? json(*filter.from) : json(nullptr)},
                     {"to", filter.to ? json(*filter.to) : json(nullptr)},
                     {"content_sha256", sha256_hex(body)}}},
                   {"records", std::move(records)}};
    return packet.dump(2) + "\n";
  }

 private:
  static std::string pad(std::size_t n) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%06zu", n);
    return buf;
  }

  std::string next_item_id() const { return "item-" + pad(items_.size() + 1); }

  static bool precedes(const ReviewItem& a, const ReviewItem& b, Order order) {
    if (order == Order::kConfidenceDesc) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
    } else {
      // Undated items sort after dated ones.
      if (a.recorded_date != b.recorded_date) {
        if (!a.recorded_date) return false;
        if (!b.recorded_date) return true;
        return *a.recorded_date < *b.recorded_date;
      }
    }
    return a.item_id < b.item_id;
  }

  // Caller holds mu_ (or is the constructor).
  void apply(const json& event) {
    const std::string type = event.at("type").get<std::string>();
    if (type == "enqueue") {
      ReviewItem item = item_from_json(event.at("item"));
      if (event.contains("page")) {
        PageRecord page = event.at("page").get<PageRecord>();
        pages_.emplace(page.key(), std::move(page));
      }
      by_span_[std::make_tuple(item.key, item.span.start, item.span.end)] = item.item_id;
      items_[item.item_id] = std::move(item);
    } else if (type == "decide") {
      RegistryEntry entry = registry_from_json(event.at("registry"));
      ReviewItem& item = items_.at(entry.item_id);
      item.status = entry.decision.status;
      item.reviewer_id = entry.decision.reviewer_id;
      item.reviewer_role = entry.decision.role;
      item.decided_at = entry.decision.decided_at;
      item.revision = entry.decision.revision;
      if (!event.at("corrected_span").is_null()) item.corrected_span = span_from_json(event.at("corrected_span"));
      if (!event.at("corrected_bbox").is_null()) item.corrected_bbox = event.at("corrected_bbox").get<BoundingBox>();
      registry_.push_back(std::move(entry));
    } else {
      throw Error(ErrorCode::kParse, "unknown journal event '" + type + "'");
    }
  }

  std::shared_ptr<Journal> journal_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, ReviewItem> items_;
  std::map<std::tuple<PageKey, std::size_t, std::size_t>, std::string> by_span_;
  std::map<PageKey, PageRecord> pages_;
  std::vector<RegistryEntry> registry_;
};

}  // namespace review
}  // namespace covenant
