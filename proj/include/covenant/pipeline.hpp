#pragma once

// Batch driver: scan pages with one detector, geolocate flagged pages, and
// build the prevalence / evaluation / cost reports.
//
// scan() streams input shards in fixed-size batches. Each batch is run in
// parallel and written in input order, then a checkpoint is committed by
// write-temp-then-rename. A restarted run truncates the outputs back to the
// sizes recorded in the checkpoint and continues after the recorded line, so
// an interrupted run ends with the same bytes as an uninterrupted one.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covenant/corpus.hpp"
#include "covenant/costmodel.hpp"
#include "covenant/error.hpp"
#include "covenant/evalkit.hpp"
#include "covenant/georesolve.hpp"
#include "covenant/lexdetect.hpp"
#include "covenant/nndetect.hpp"
#include "covenant/prevalence.hpp"
#include "covenant/spanloc.hpp"

namespace covenant {
namespace pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

enum class DetectorKind { kKeyword, kFuzzy, kModel };

constexpr std::string_view to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::kKeyword: return "keyword";
    case DetectorKind::kFuzzy: return "fuzzy";
    case DetectorKind::kModel: return "model";
  }
  return "keyword";
}

inline DetectorKind detector_from_string(std::string_view s) {
  for (DetectorKind k : {DetectorKind::kKeyword, DetectorKind::kFuzzy, DetectorKind::kModel}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown detector '" + std::string(s) + "'");
}

inline constexpr const char* kDetectionsFile = "detections.jsonl";
inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kErrorsFile = "errors.jsonl";
inline constexpr const char* kCheckpointFile = "checkpoint.json";

struct ScanConfig {
  std::vector<fs::path> inputs;
  DetectorKind detector = DetectorKind::kKeyword;
  lex::KeywordList keywords = lex::county_default_keywords();
  lex::FuzzyConfig fuzzy;
  nn::DetectorConfig model;
  // Used by the model detector; the mock backend when null.
  std::shared_ptr<const nn::ModelBackend> backend;
  int backend_attempts = 3;
  span::LocateOptions locate;
  fs::path output_dir;
  unsigned parallelism = 1;
  std::size_t batch_size = 16;
  bool resume = true;
  // Test hook simulating a crash: once this many pages are committed, the
  // next batch is written to the outputs but not checkpointed, and scan
  // returns with `interrupted` set.
  std::optional<std::size_t> stop_after_pages;

  void validate() const {
    if (parallelism == 0) throw Error(ErrorCode::kInvalidArgument, "parallelism must be at least 1");
    if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be at least 1");
    if (output_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "output directory is required");
    if (backend_attempts < 1) throw Error(ErrorCode::kInvalidArgument, "backend attempts must be at least 1");
    fuzzy.validate();
    model.validate();
  }
};

struct ScanSummary {
  std::size_t pages = 0;
  std::size_t flagged = 0;
  std::size_t page_errors = 0;
  std::string detector;

  double flagged_rate() const { return pages == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(pages); }
};

inline json to_json(const ScanSummary& s) {
  return {{"pages", s.pages},
          {"flagged", s.flagged},
          {"flagged_rate", s.flagged_rate()},
          {"page_errors", s.page_errors},
          {"detector", s.detector}};
}

struct ScanResult {
  ScanSummary summary;
  bool interrupted = false;
  bool resumed = false;
};

// One flagged page as written to the detections file. Same shape as the
// review service's enqueue body.
struct DetectionLine {
  nn::Detection detection;
  std::optional<span::SpanMatch> span_match;
  std::optional<std::string> span_error;
  PageRecord page;
};

inline json to_json(const DetectionLine& d) {
  json sm = nullptr;
  if (d.span_match) {
    sm = {{"char_start", d.span_match->char_start},
          {"char_end", d.span_match->char_end},
          {"similarity", d.span_match->similarity},
          {"aligned", d.span_match->aligned},
          {"bbox", d.span_match->bbox ? json(*d.span_match->bbox) : json(nullptr)}};
  }
  return {{"detection", d.detection},
          {"span_match", sm},
          {"span_error", d.span_error ? json(*d.span_error) : json(nullptr)},
          {"page", d.page}};
}

inline DetectionLine detection_line_from_json(const json& j) {
  DetectionLine d;
  d.detection = j.at("detection").get<nn::Detection>();
  d.page = j.at("page").get<PageRecord>();
  if (const auto& sm = j.at("span_match"); !sm.is_null()) {
    span::SpanMatch m;
    m.char_start = sm.at("char_start").get<std::size_t>();
    m.char_end = sm.at("char_end").get<std::size_t>();
    m.similarity = sm.at("similarity").get<double>();
    m.aligned = sm.at("aligned").get<bool>();
    if (!sm.at("bbox").is_null()) m.bbox = sm.at("bbox").get<BoundingBox>();
    d.span_match = m;
  }
  if (j.contains("span_error") && !j.at("span_error").is_null()) d.span_error = j.at("span_error").get<std::string>();
  return d;
}

inline std::vector<DetectionLine> read_detections(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "cannot read detections " + path.string());
  std::vector<DetectionLine> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(detection_line_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

namespace detail {

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_atomic(const fs::path& path, std::string_view data) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Lexical hit -> sentence-aligned span in original page coordinates.
inline span::SpanMatch span_for_hit(const PageRecord& page, const std::u32string& cps, const text::NormalizedText& norm,
                                    const lex::LexHit& hit) {
  const span::Span raw{norm.origin[hit.char_start], norm.origin[hit.char_end - 1] + 1};
  const span::Span aligned = span::align_boundaries(cps, raw);
  span::SpanMatch m;
  m.char_start = aligned.start;
  m.char_end = aligned.end;
  m.similarity = 1.0;
  m.aligned = true;
  m.bbox = span_to_bbox(page, m.char_start, m.char_end);
  return m;
}

struct PageOutcome {
  std::optional<DetectionLine> flagged;
  std::optional<json> error;
};

inline json page_error(const fs::path& shard, std::size_t line_no, const std::optional<PageKey>& key, const Error& e) {
  return {{"shard", shard.filename().string()},
          {"line", line_no},
          {"doc_id", key ? json(key->doc_id) : json(nullptr)},
          {"page_no", key ? json(key->page_no) : json(nullptr)},
          {"error", std::string(to_string(e.code()))},
          {"message", e.what()}};
}

class Detector {
 public:
  explicit Detector(const ScanConfig& cfg)
      : cfg_(cfg),
        fuzzy_(cfg.keywords, cfg.fuzzy),
        backend_(cfg.backend ? cfg.backend : std::make_shared<nn::MockBackend>(nn::mock_backend())),
        template_(nn::default_template(nn::default_shots())) {}

  std::optional<DetectionLine> run(const PageRecord& page) const {
    if (cfg_.detector == DetectorKind::kModel) return run_model(page);
    return run_lexical(page);
  }

 private:
  std::optional<DetectionLine> run_lexical(const PageRecord& page) const {
    const std::u32string cps = text::decode_utf8(page.text);
    const text::NormalizedText norm = text::normalize_mapped(cps);
    const auto hits = cfg_.detector == DetectorKind::kKeyword ? lex::keyword_scan(norm.text, cfg_.keywords)
                                                              : fuzzy_.scan(norm.text);
    if (hits.empty()) return std::nullopt;
    DetectionLine d;
    d.page = page;
    d.span_match = span_for_hit(page, cps, norm, hits.front());
    d.detection.key = page.key();
    d.detection.flagged = true;
    d.detection.confidence = hits.front().score;
    d.detection.detector = std::string(to_string(cfg_.detector));
    d.detection.quote =
        text::encode_utf8(std::u32string_view(cps).substr(d.span_match->char_start, d.span_match->span().size()));
    return d;
  }

  std::optional<DetectionLine> run_model(const PageRecord& page) const {
    std::optional<nn::Detection> det;
    for (int attempt = 1; !det; ++attempt) {
      try {
        det = nn::classify_page(page, *backend_, cfg_.model, template_);
      } catch (const Error& e) {
        if (!e.retryable() || attempt >= cfg_.backend_attempts) throw;
      }
    }
    if (!det->flagged) return std::nullopt;
    DetectionLine d;
    d.page = page;
    d.detection = *det;
    try {
      d.span_match = span::localize(page, det->quote, cfg_.locate);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoAlignment && e.code() != ErrorCode::kEmptyQuote &&
          e.code() != ErrorCode::kNoTokens) {
        throw;
      }
      d.span_error = std::string(to_string(e.code()));
    }
    return d;
  }

  const ScanConfig& cfg_;
  lex::FuzzyMatcher fuzzy_;
  std::shared_ptr<const nn::ModelBackend> backend_;
  nn::PromptTemplate template_;
};

struct PendingLine {
  std::size_t shard = 0;
  std::size_t line_no = 0;  // 1-based within the shard
  std::string text;
};

struct ShardProgress {
  std::string path;
  std::size_t lines_done = 0;
  std::optional<std::string> last_key;
};

struct Checkpoint {
  std::string fingerprint;
  std::vector<ShardProgress> shards;
  std::uintmax_t detections_bytes = 0;
  std::uintmax_t errors_bytes = 0;
  ScanSummary summary;
};

inline json to_json(const Checkpoint& c) {
  json shards = json::array();
  for (const auto& s : c.shards) {
    shards.push_back({{"path", s.path}, {"lines_done", s.lines_done},
                      {"last_key", s.last_key ? json(*s.last_key) : json(nullptr)}});
  }
  return {{"fingerprint", c.fingerprint},
          {"shards", shards},
          {"detections_bytes", c.detections_bytes},
          {"errors_bytes", c.errors_bytes},
          {"pages", c.summary.pages},
          {"flagged", c.summary.flagged},
          {"page_errors", c.summary.page_errors}};
}

inline Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint c;
  c.fingerprint = j.at("fingerprint").get<std::string>();
  for (const auto& s : j.at("shards")) {
    ShardProgress p;
    p.path = s.at("path").get<std::string>();
    p.lines_done = s.at("lines_done").get<std::size_t>();
    if (!s.at("last_key").is_null()) p.last_key = s.at("last_key").get<std::string>();
    c.shards.push_back(std::move(p));
  }
  c.detections_bytes = j.at("detections_bytes").get<std::uintmax_t>();
  c.errors_bytes = j.at("errors_bytes").get<std::uintmax_t>();
  c.summary.pages = j.at("pages").get<std::size_t>();
  c.summary.flagged = j.at("flagged").get<std::size_t>();
  c.summary.page_errors = j.at("page_errors").get<std::size_t>();
  return c;
}

// Everything that changes output bytes. Parallelism and batch size do not.
inline std::string fingerprint(const ScanConfig& cfg) {
  json inputs = json::array();
  for (const auto& p : cfg.inputs) inputs.push_back(p.string());
  return json{{"inputs", inputs},
              {"detector", std::string(to_string(cfg.detector))},
              {"keywords", cfg.keywords.terms()},
              {"fuzzy", {cfg.fuzzy.n, cfg.fuzzy.threshold, static_cast<int>(cfg.fuzzy.comparison), cfg.fuzzy.pad}},
              {"model",
               {cfg.model.confidence_threshold, cfg.model.fair_housing_filter, cfg.model.filter_phrases,
                cfg.model.few_shot}},
              {"locate", {cfg.locate.floor, cfg.locate.align}}}
      .dump();
}

template <typename F>
void parallel_for(std::size_t n, unsigned parallelism, F&& f) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(parallelism, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace detail

inline ScanResult scan(const ScanConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  const fs::path det_path = cfg.output_dir / kDetectionsFile;
  const fs::path err_path = cfg.output_dir / kErrorsFile;
  const fs::path ckpt_path = cfg.output_dir / kCheckpointFile;
  const fs::path summary_path = cfg.output_dir / kSummaryFile;

  detail::Checkpoint ckpt;
  ckpt.fingerprint = detail::fingerprint(cfg);
  for (const auto& p : cfg.inputs) ckpt.shards.push_back({p.string(), 0, std::nullopt});
  ckpt.summary.detector = std::string(to_string(cfg.detector));

  ScanResult result;
  if (cfg.resume && fs::exists(ckpt_path)) {
    detail::Checkpoint saved = detail::checkpoint_from_json(json::parse(detail::read_file(ckpt_path)));
    if (saved.fingerprint != ckpt.fingerprint) {
      throw Error(ErrorCode::kInvalidArgument, "checkpoint in " + cfg.output_dir.string() + " is from a different run");
    }
    saved.summary.detector = ckpt.summary.detector;
    ckpt = std::move(saved);
    result.resumed = true;
  }
  fs::remove(summary_path);
  // Drop anything written after the last commit.
  for (const auto& [path, size] : {std::pair{det_path, ckpt.detections_bytes}, std::pair{err_path, ckpt.errors_bytes}}) {
    if (!fs::exists(path)) std::ofstream(path, std::ios::binary).flush();
    fs::resize_file(path, size);
  }

  std::ofstream det_out(det_path, std::ios::binary | std::ios::app);
  std::ofstream err_out(err_path, std::ios::binary | std::ios::app);
  if (!det_out || !err_out) throw Error(ErrorCode::kIo, "cannot open outputs in " + cfg.output_dir.string());

  const detail::Detector detector(cfg);
  bool simulate_crash = false;

  for (std::size_t shard = 0; shard < cfg.inputs.size(); ++shard) {
    std::ifstream in(cfg.inputs[shard], std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot read input " + cfg.inputs[shard].string());
    std::string line;
    std::size_t line_no = 0;
    while (line_no < ckpt.shards[shard].lines_done && std::getline(in, line)) ++line_no;

    bool eof = false;
    while (!eof) {
      std::vector<detail::PendingLine> batch;
      while (batch.size() < cfg.batch_size) {
        if (!std::getline(in, line)) {
          eof = true;
          break;
        }
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        batch.push_back({shard, line_no, std::move(line)});
      }
      if (in.bad()) throw Error(ErrorCode::kIo, "read failure on " + cfg.inputs[shard].string());

      std::vector<detail::PageOutcome> outcomes(batch.size());
      std::vector<std::optional<PageKey>> keys(batch.size());
      detail::parallel_for(batch.size(), cfg.parallelism, [&](std::size_t i) {
        std::optional<PageKey> key;
        try {
          const PageRecord page = parse_page_line(batch[i].text);
          key = page.key();
          keys[i] = key;
          outcomes[i].flagged = detector.run(page);
        } catch (const Error& e) {
          outcomes[i].error = detail::page_error(cfg.inputs[shard], batch[i].line_no, key, e);
        } catch (const std::exception& e) {
          outcomes[i].error =
              detail::page_error(cfg.inputs[shard], batch[i].line_no, key, Error(ErrorCode::kParse, e.what()));
        }
      });

      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (outcomes[i].error) {
          err_out << outcomes[i].error->dump() << '\n';
          ++ckpt.summary.page_errors;
          continue;
        }
        ++ckpt.summary.pages;
        if (outcomes[i].flagged) {
          det_out << to_json(*outcomes[i].flagged).dump() << '\n';
          ++ckpt.summary.flagged;
        }
        if (keys[i]) ckpt.shards[shard].last_key = keys[i]->str();
      }
      det_out.flush();
      err_out.flush();
      if (!det_out || !err_out) throw Error(ErrorCode::kIo, "write failure in " + cfg.output_dir.string());
      if (simulate_crash) {
        result.interrupted = true;
        result.summary = ckpt.summary;
        return result;
      }

      ckpt.shards[shard].lines_done = line_no;
      ckpt.detections_bytes = fs::file_size(det_path);
      ckpt.errors_bytes = fs::file_size(err_path);
      detail::write_file_atomic(ckpt_path, to_json(ckpt).dump(2));
      if (cfg.stop_after_pages && ckpt.summary.pages + ckpt.summary.page_errors >= *cfg.stop_after_pages) {
        simulate_crash = true;
      }
    }
  }

  detail::write_file_atomic(summary_path, to_json(ckpt.summary).dump(2) + "\n");
  fs::remove(ckpt_path);
  result.summary = ckpt.summary;
  return result;
}

struct GeolocateConfig {
  fs::path detections;
  fs::path map_index;
  std::optional<fs::path> geometry_dir;
  std::optional<fs::path> overrides;
  double min_score = 0.8;
  fs::path output;
};

struct GeolocateResult {
  std::vector<geo::GeoResolution> resolutions;
  json feature_collection;
  std::map<std::string, std::size_t> by_method;
  double resolved_fraction = 0.0;
};

inline json to_json(const GeolocateResult& r) {
  return {{"features", r.resolutions.size()}, {"by_method", r.by_method}, {"resolved_fraction", r.resolved_fraction}};
}

inline GeolocateResult geolocate(const GeolocateConfig& cfg) {
  if (!fs::exists(cfg.map_index)) throw Error(ErrorCode::kMissingArtifact, "map index not found: " + cfg.map_index.string());
  if (!fs::exists(cfg.detections)) {
    throw Error(ErrorCode::kMissingArtifact, "detections not found: " + cfg.detections.string());
  }
  const geo::MapIndex index = geo::MapIndex::load_csv(cfg.map_index.string());
  std::optional<geo::DirectoryGeometryStore> store;
  if (cfg.geometry_dir) store.emplace(*cfg.geometry_dir);
  const geo::GeometryStore* store_ptr = store ? &*store : nullptr;

  GeolocateResult out;
  for (const auto& d : read_detections(cfg.detections)) {
    if (!d.detection.flagged) continue;
    geo::GeoClues clues = geo::extract_clues(d.page.text);
    if (!clues.recorded_date) clues.recorded_date = d.page.recorded_date;
    out.resolutions.push_back(geo::resolve(d.detection.key, clues, index, store_ptr, cfg.min_score));
  }
  if (cfg.overrides) {
    if (!fs::exists(*cfg.overrides)) {
      throw Error(ErrorCode::kMissingArtifact, "overrides not found: " + cfg.overrides->string());
    }
    out.resolutions =
        geo::apply_overrides(std::move(out.resolutions), geo::OverrideTable::load_csv(cfg.overrides->string()), store_ptr);
  }
  for (const auto& r : out.resolutions) ++out.by_method[std::string(geo::to_string(r.method))];
  out.resolved_fraction = geo::resolved_fraction(out.resolutions);
  out.feature_collection = geo::export_geojson(out.resolutions);
  if (!cfg.output.empty()) {
    if (cfg.output.has_parent_path()) fs::create_directories(cfg.output.parent_path());
    detail::write_file_atomic(cfg.output, out.feature_collection.dump(2) + "\n");
  }
  return out;
}

struct ReportConfig {
  std::optional<fs::path> records;  // prevalence input
  prevalence::HousingStock stock{1950, 92'315};
  std::optional<fs::path> gold;     // evaluation labels
  std::optional<fs::path> detections;
  std::string model_name = "scan";
  cost::ReferenceInputs cost_inputs;
  fs::path output_dir;
};

struct ReportResult {
  json report;
  std::string text;
  std::vector<std::string> diagnostics;  // missing artifacts and skipped sections
};

inline ReportResult report(const ReportConfig& cfg) {
  ReportResult out;
  out.report = json::object();
  std::ostringstream txt;

  const auto missing = [&](const char* what, const fs::path& p) {
    out.diagnostics.push_back(std::string(to_string(ErrorCode::kMissingArtifact)) + ": " + what + " " + p.string());
  };

  if (cfg.records) {
    if (!fs::exists(*cfg.records)) {
      missing("covenant records", *cfg.records);
    } else {
      const auto records = prevalence::load_records_csv(cfg.records->string());
      const auto rep = prevalence::build_report(records, cfg.stock);
      out.report["prevalence"] = prevalence::to_json(rep);
      char ratio[32];
      std::snprintf(ratio, sizeof ratio, "%.4f", rep.coverage_ratio);
      txt << "Prevalence\n"
          << "  tract-wide deeds  " << rep.tract_wide_deeds << " (" << rep.tract_wide_lots << " lots)\n"
          << "  multi-lot deeds   " << rep.multi_lot_deeds << " (" << rep.multi_lot_lots << " lots)\n"
          << "  single-lot deeds  " << rep.single_lot_deeds << "\n"
          << "  dedup removed     " << rep.dedup_removed << "\n"
          << "  net lots          " << rep.net_lots << "\n"
          << "  coverage          " << rep.net_lots << " / " << rep.dwelling_units << " = " << ratio << "\n\n";
      if (!cfg.output_dir.empty()) {
        fs::create_directories(cfg.output_dir);
        detail::write_file_atomic(cfg.output_dir / "per_tract.csv",
                                  prevalence::per_tract_csv(prevalence::dedup_lots(records)));
      }
    }
  }

  if (cfg.gold) {
    if (!fs::exists(*cfg.gold)) {
      missing("gold labels", *cfg.gold);
    } else if (const auto gold = eval::load_gold_csv(cfg.gold->string()); gold.empty()) {
      out.diagnostics.push_back("evaluation skipped: gold file has no rows");
    } else if (!cfg.detections || !fs::exists(*cfg.detections)) {
      missing("detections", cfg.detections.value_or("<unset>"));
    } else {
      std::map<PageKey, std::string> flagged;
      for (const auto& d : read_detections(*cfg.detections)) {
        if (d.detection.flagged) flagged.emplace(d.detection.key, d.detection.quote);
      }
      std::vector<eval::PagePrediction> preds;
      for (const auto& g : gold) {
        auto it = flagged.find(g.key);
        preds.push_back({g.key, it != flagged.end(), it != flagged.end() ? it->second : std::string()});
      }
      const auto metrics = eval::page_metrics(preds, gold);
      out.report["evaluation"] = eval::to_json(metrics);
      out.report["evaluation"]["model"] = cfg.model_name;
      txt << "Evaluation\n" << eval::render_table({{cfg.model_name, metrics}}) << "\n";
    }
  }

  const auto costs = cost::reference_table(cfg.cost_inputs);
  json cost_rows = json::array();
  for (const auto& c : costs) cost_rows.push_back(cost::to_json(c));
  out.report["cost"] = cost_rows;
  txt << "Cost\n" << cost::render_table(costs);

  if (!out.diagnostics.empty()) out.report["diagnostics"] = out.diagnostics;
  out.text = txt.str();
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    detail::write_file_atomic(cfg.output_dir / "report.json", out.report.dump(2) + "\n");
    detail::write_file_atomic(cfg.output_dir / "report.txt", out.text);
  }
  return out;
}

}  // namespace pipeline
}  // namespace covenant
