#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>

#include <json.hpp>

#include "test_support.hpp"

namespace covenant {
namespace {

using nlohmann::json;
using testing::fixture;
using testing::slurp;
using testing::spit;
using testing::TempDir;

struct Run {
  int status = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(COVENANT_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  Run r;
  if (!pipe) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

TEST(Cli, CostPrintsReferenceTable) {
  const auto r = cli("cost");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out,
            "Method                                Time        Cost\n"
            "Manual Review (One Staff Member)      9.89 years  $1,386,667\n"
            "Off-the-Shelf LM (GPT-3.5, few-shot)  3.61 days   $13,634\n"
            "Off-the-Shelf LM (GPT-4 Turbo)        3.61 days   $47,944\n"
            "Custom LM (Finetuned Mistral)         6 days      $258\n");
}

TEST(Cli, CostScenarioAsJson) {
  const auto r = cli("cost --scenario manual --pages 60 --param pages_per_hour=60 --param hourly_wage=16 --format json");
  ASSERT_EQ(r.status, 0);
  const auto j = json::parse(r.out);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["cost_cents"], 1600);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("").status, 1);
  EXPECT_EQ(cli("cost --format yaml").status, 1);
  EXPECT_EQ(cli("cost --scenario api --pages 10").status, 1);  // missing fields
  EXPECT_EQ(cli("--help").status, 0);

  TempDir dir;
  spit(dir / "bad.jsonl", "{oops\n");
  EXPECT_EQ(cli("scan -i " + quoted(dir / "bad.jsonl") + " -o " + quoted(dir / "out")).status, 2);
  EXPECT_EQ(cli("scan -i " + quoted(dir / "missing.jsonl") + " -o " + quoted(dir / "out")).status, 1);
  EXPECT_EQ(cli("report --records " + quoted(dir / "missing.csv")).status, 2);
}

TEST(Cli, ScanGeolocateReport) {
  TempDir dir;
  const auto geo = fixture("geo");
  auto r = cli("scan -i " + quoted(geo / "pages.jsonl") + " -o " + quoted(dir / "scan"));
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(json::parse(r.out)["flagged"], 5);

  r = cli("geolocate --detections " + quoted(dir / "scan" / "detections.jsonl") + " --map-index " +
          quoted(geo / "map_index.csv") + " --geometry-dir " + quoted(geo / "geometry") + " --overrides " +
          quoted(geo / "overrides.csv") + " -o " + quoted(dir / "geo.json"));
  ASSERT_EQ(r.status, 0);
  EXPECT_DOUBLE_EQ(json::parse(r.out)["resolved_fraction"].get<double>(), 0.8);
  EXPECT_EQ(json::parse(slurp(dir / "geo.json"))["features"].size(), 5u);

  r = cli("report --records " + quoted(fixture("prevalence_records.csv")) + " -o " + quoted(dir / "report"));
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("24522 / 92315 = 0.2656"), std::string::npos);
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
  TempDir dir;
  spit(dir / "cfg.toml", "[cost]\nformat = \"json\"\npages = 60\n");
  auto r = cli("--config " + quoted(dir / "cfg.toml") + " cost");
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(json::parse(r.out).size(), 4u);
  r = cli("--config " + quoted(dir / "cfg.toml") + " cost --format text");
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(r.out.starts_with("Method"));
  EXPECT_NE(r.out.find("  $16\n"), std::string::npos);
}

}  // namespace
}  // namespace covenant
