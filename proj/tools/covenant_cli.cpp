// covenant: scan deed pages for racial covenants, geolocate them, report
// prevalence and cost, and serve the review queue.
//
// Exit status: 0 success, 2 if some pages or artifacts failed, 1 on fatal error.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "covenant/costmodel.hpp"
#include "covenant/http_backend.hpp"
#include "covenant/pipeline.hpp"
#include "covenant/review_http.hpp"
#include "covenant/reviewsvc.hpp"

namespace {

using namespace covenant;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct ScanArgs {
  std::vector<std::string> inputs;
  std::string detector = "keyword";
  std::string keywords;
  double fuzzy_threshold = 0.75;
  bool fuzzy_inclusive = false;
  bool fuzzy_pad = false;
  double confidence_threshold = 0.75;
  bool no_filter = false;
  bool few_shot = false;
  std::string backend_url;
  std::string out;
  unsigned parallelism = 1;
  std::size_t batch_size = 16;
  bool fresh = false;
  std::size_t stop_after = 0;
};

struct GeoArgs {
  std::string detections, map_index, geometry_dir, overrides, out;
  double min_score = 0.8;
};

struct ReportArgs {
  std::string records, gold, detections, out_dir, model_name = "scan";
  std::size_t dwelling_units = 92'315;
  int stock_year = 1950;
};

struct CostArgs {
  std::optional<std::int64_t> pages;
  std::string scenario;
  std::vector<std::string> params;
  std::string format = "text";
};

struct ServeArgs {
  std::string journal = "review/journal.ndjson";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> detections;
};

// host:port, optionally prefixed with http://
std::pair<std::string, int> parse_host_port(std::string url) {
  if (url.rfind("http://", 0) == 0) url = url.substr(7);
  if (auto slash = url.find('/'); slash != std::string::npos) url = url.substr(0, slash);
  const auto colon = url.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "backend url needs host:port");
  return {url.substr(0, colon), std::stoi(url.substr(colon + 1))};
}

int run_scan(const ScanArgs& a) {
  pipeline::ScanConfig cfg;
  for (const auto& p : a.inputs) cfg.inputs.emplace_back(p);
  cfg.detector = pipeline::detector_from_string(a.detector);
  if (!a.keywords.empty()) cfg.keywords = lex::KeywordList::load(a.keywords);
  cfg.fuzzy.threshold = a.fuzzy_threshold;
  cfg.fuzzy.comparison = a.fuzzy_inclusive ? lex::Comparison::kGreaterOrEqual : lex::Comparison::kGreater;
  cfg.fuzzy.pad = a.fuzzy_pad;
  cfg.model.confidence_threshold = a.confidence_threshold;
  cfg.model.fair_housing_filter = !a.no_filter;
  cfg.model.few_shot = a.few_shot;
  if (!a.backend_url.empty()) {
    const auto [host, port] = parse_host_port(a.backend_url);
    cfg.backend = std::make_shared<nn::HttpBackend>(host, port);
  }
  cfg.output_dir = a.out;
  cfg.parallelism = a.parallelism;
  cfg.batch_size = a.batch_size;
  cfg.resume = !a.fresh;
  if (a.stop_after > 0) cfg.stop_after_pages = a.stop_after;

  const auto result = pipeline::scan(cfg);
  std::cout << pipeline::to_json(result.summary).dump(2) << "\n";
  if (result.interrupted) {
    std::cerr << "scan stopped early; rerun to resume\n";
    return kExitPartial;
  }
  if (result.summary.page_errors > 0) {
    std::cerr << result.summary.page_errors << " page(s) failed; see " << (cfg.output_dir / pipeline::kErrorsFile).string()
              << "\n";
    return kExitPartial;
  }
  return kExitOk;
}

int run_geolocate(const GeoArgs& a) {
  pipeline::GeolocateConfig cfg;
  cfg.detections = a.detections;
  cfg.map_index = a.map_index;
  if (!a.geometry_dir.empty()) cfg.geometry_dir = a.geometry_dir;
  if (!a.overrides.empty()) cfg.overrides = a.overrides;
  cfg.min_score = a.min_score;
  cfg.output = a.out;
  const auto result = pipeline::geolocate(cfg);
  std::cout << pipeline::to_json(result).dump(2) << "\n";
  return kExitOk;
}

int run_report(const ReportArgs& a) {
  pipeline::ReportConfig cfg;
  if (!a.records.empty()) cfg.records = a.records;
  if (!a.gold.empty()) cfg.gold = a.gold;
  if (!a.detections.empty()) cfg.detections = a.detections;
  cfg.stock = {a.stock_year, a.dwelling_units};
  cfg.model_name = a.model_name;
  cfg.output_dir = a.out_dir;
  const auto result = pipeline::report(cfg);
  std::cout << result.text;
  for (const auto& d : result.diagnostics) std::cerr << d << "\n";
  const bool missing = std::any_of(result.diagnostics.begin(), result.diagnostics.end(), [](const std::string& d) {
    return d.rfind(std::string(to_string(ErrorCode::kMissingArtifact)), 0) == 0;
  });
  return missing ? kExitPartial : kExitOk;
}

int run_cost(const CostArgs& a) {
  std::vector<cost::CostEstimate> rows;
  if (a.scenario.empty()) {
    if (!a.params.empty()) throw Error(ErrorCode::kInvalidArgument, "--param needs --scenario");
    cost::ReferenceInputs in;
    if (a.pages) in.pages = *a.pages;
    rows = cost::reference_table(in);
  } else {
    cost::CostScenario s;
    s.pages = a.pages;
    for (const auto& kv : a.params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "--param expects key=value, got " + kv);
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      if (key == "pages_per_hour") s.pages_per_hour = std::stod(value);
      else if (key == "hourly_wage") s.hourly_wage = cost::Cents::from_dollars(std::stod(value));
      else if (key == "tokens_per_page") s.tokens_per_page = std::stoll(value);
      else if (key == "price_per_million_tokens") s.price_per_million_tokens = cost::Cents::from_dollars(std::stod(value));
      else if (key == "requests_per_minute") s.requests_per_minute = std::stod(value);
      else if (key == "pages_per_day") s.pages_per_day = std::stod(value);
      else if (key == "compute_cost_total") s.compute_cost_total = cost::Cents::from_dollars(std::stod(value));
      else throw Error(ErrorCode::kInvalidArgument, "unknown cost parameter '" + key + "'");
    }
    if (a.scenario == "manual") rows.push_back(cost::manual_cost(s));
    else if (a.scenario == "api") rows.push_back(cost::api_cost(s));
    else if (a.scenario == "selfhosted") rows.push_back(cost::selfhosted_cost(s));
    else throw Error(ErrorCode::kInvalidArgument, "unknown scenario '" + a.scenario + "'");
  }
  if (a.format == "json") {
    json out = json::array();
    for (const auto& r : rows) out.push_back(cost::to_json(r));
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << cost::render_table(rows);
  }
  return kExitOk;
}

httplib::Server* g_server = nullptr;

int run_serve(const ServeArgs& a) {
  auto journal = std::make_shared<review::FileJournal>(a.journal);
  review::ReviewService svc(journal);
  std::size_t enqueued = 0, skipped = 0;
  for (const auto& path : a.detections) {
    for (const auto& d : pipeline::read_detections(path)) {
      if (!d.span_match) {
        ++skipped;
        continue;
      }
      svc.enqueue(d.detection, *d.span_match, d.page);
      ++enqueued;
    }
  }
  if (!a.detections.empty()) {
    std::cerr << "loaded " << enqueued << " detection(s), skipped " << skipped << " without a located span\n";
  }
  httplib::Server server;
  review::mount(server, svc);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "review service on http://" << a.host << ":" << a.port << "\n";
  if (!server.listen(a.host, a.port)) throw Error(ErrorCode::kIo, "cannot listen on " + a.host + ":" + std::to_string(a.port));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Find, locate and report racial covenants in deed records"};
  app.set_config("--config", "", "TOML-style key/value file; command-line flags take precedence");
  app.require_subcommand(1);

  ScanArgs scan;
  auto* s = app.add_subcommand("scan", "Run a detector over page records");
  s->add_option("-i,--input", scan.inputs, "Page JSONL shard(s)")->required()->check(CLI::ExistingFile);
  s->add_option("-d,--detector", scan.detector, "keyword | fuzzy | model")
      ->check(CLI::IsMember({"keyword", "fuzzy", "model"}));
  s->add_option("--keywords", scan.keywords, "Keyword list file (default: county list)")->check(CLI::ExistingFile);
  s->add_option("--fuzzy-threshold", scan.fuzzy_threshold, "Cosine threshold for fuzzy matches");
  s->add_flag("--fuzzy-inclusive", scan.fuzzy_inclusive, "Match at scores equal to the threshold");
  s->add_flag("--fuzzy-pad", scan.fuzzy_pad, "Pad words before taking trigrams");
  s->add_option("--confidence-threshold", scan.confidence_threshold, "Model confidence needed to flag");
  s->add_flag("--no-fair-housing-filter", scan.no_filter, "Keep pages quoting fair-housing language");
  s->add_flag("--few-shot", scan.few_shot, "Include worked examples in the prompt");
  s->add_option("--backend-url", scan.backend_url, "Remote model host:port (default: built-in mock)");
  s->add_option("-o,--out", scan.out, "Output directory")->required();
  s->add_option("-j,--parallelism", scan.parallelism, "Worker threads")->check(CLI::PositiveNumber);
  s->add_option("--batch-size", scan.batch_size, "Pages per checkpoint")->check(CLI::PositiveNumber);
  s->add_flag("--fresh", scan.fresh, "Ignore an existing checkpoint");
  s->add_option("--stop-after", scan.stop_after, "Simulate a crash after this many pages")->group("");

  GeoArgs geo_args;
  auto* g = app.add_subcommand("geolocate", "Resolve flagged pages to subdivision maps");
  g->add_option("--detections", geo_args.detections, "Detections JSONL from scan")->required();
  g->add_option("--map-index", geo_args.map_index, "Map index CSV")->required();
  g->add_option("--geometry-dir", geo_args.geometry_dir, "Directory of <ref>.geojson polygons");
  g->add_option("--overrides", geo_args.overrides, "Manual override CSV");
  g->add_option("--min-score", geo_args.min_score, "Fuzzy name threshold");
  g->add_option("-o,--out", geo_args.out, "Output GeoJSON path")->required();

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Prevalence, evaluation and cost reports");
  r->add_option("--records", rep.records, "Covenant records CSV");
  r->add_option("--dwelling-units", rep.dwelling_units, "Housing stock denominator");
  r->add_option("--stock-year", rep.stock_year, "Year of the housing stock count");
  r->add_option("--gold", rep.gold, "Gold labels CSV");
  r->add_option("--detections", rep.detections, "Detections JSONL to evaluate");
  r->add_option("--model-name", rep.model_name, "Row label in the evaluation table");
  r->add_option("-o,--out-dir", rep.out_dir, "Directory for report.json, report.txt, per_tract.csv");

  CostArgs cst;
  auto* c = app.add_subcommand("cost", "Estimate time and cost of a review approach");
  c->add_option("--pages", cst.pages, "Number of pages");
  c->add_option("--scenario", cst.scenario, "manual | api | selfhosted (default: reference table)")
      ->check(CLI::IsMember({"manual", "api", "selfhosted"}));
  c->add_option("--param", cst.params, "Scenario input key=value (money in dollars)");
  c->add_option("--format", cst.format, "text | json")->check(CLI::IsMember({"text", "json"}));

  ServeArgs srv;
  auto* v = app.add_subcommand("serve", "Run the review service");
  v->add_option("--journal", srv.journal, "Append-only journal file");
  v->add_option("--host", srv.host, "Bind address");
  v->add_option("--port", srv.port, "Port");
  v->add_option("--detections", srv.detections, "Detections JSONL to enqueue at startup");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (*s) return run_scan(scan);
    if (*g) return run_geolocate(geo_args);
    if (*r) return run_report(rep);
    if (*c) return run_cost(cst);
    if (*v) return run_serve(srv);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitFatal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}
