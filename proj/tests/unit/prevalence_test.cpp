#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "covenant/prevalence.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace covenant::prevalence {
namespace {

using testing::code_of;

CovenantRecord lots_in(const std::string& id, std::optional<std::string> tract, std::optional<std::string> block,
                       std::vector<std::string> lots) {
  CovenantRecord r;
  r.deed_id = id;
  r.tract_id = std::move(tract);
  r.block = std::move(block);
  r.scope = lots.size() == 1 ? Scope::kSingleLot : Scope::kMultiLot;
  r.lots = std::move(lots);
  return r;
}

CovenantRecord declaration(const std::string& id, std::optional<std::string> tract, std::size_t lots) {
  CovenantRecord r;
  r.deed_id = id;
  r.tract_id = std::move(tract);
  r.scope = Scope::kTractWide;
  r.lot_count_if_tract_wide = lots;
  return r;
}

TEST(DedupLots, SameLotTwice) {
  const auto d = dedup_lots({lots_in("a", "T", "B", {"5"}), lots_in("b", "T", "B", {"5"})});
  EXPECT_EQ(d.net_lots(), 1u);
  EXPECT_EQ(d.removed, 1u);
}

TEST(DedupLots, TractWideSubsumesIndividualLot) {
  const auto d = dedup_lots({declaration("decl", "T", 196), lots_in("s", "T", std::nullopt, {"12"})});
  EXPECT_EQ(d.net_lots(), 196u);
  EXPECT_EQ(d.removed, 1u);
}

TEST(DedupLots, DisjointRecordsRemoveNothing) {
  const auto d = dedup_lots({lots_in("a", "T1", "1", {"1", "2"}), lots_in("b", "T2", "1", {"1"}),
                             lots_in("c", "T1", "2", {"1"})});
  EXPECT_EQ(d.net_lots(), 4u);
  EXPECT_EQ(d.removed, 0u);
}

TEST(DedupLots, LotStringsAreNormalized) {
  const auto d = dedup_lots({lots_in("a", "T", "B", {"7a"}), lots_in("b", "T", "B", {" 7A"})});
  EXPECT_EQ(d.net_lots(), 1u);
}

TEST(DedupLots, UnknownTractIsCountedSeparately) {
  const auto d = dedup_lots({lots_in("a", std::nullopt, "B", {"1"}), lots_in("b", std::nullopt, "B", {"1"})});
  EXPECT_EQ(d.undeduplicated_lots, 2u);
  EXPECT_EQ(d.net_lots(), 2u);
  EXPECT_EQ(d.removed, 0u);
}

std::vector<CovenantRecord> random_records(std::mt19937& rng) {
  std::vector<CovenantRecord> out;
  const std::size_t n = rng() % 201;
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::string> tract;
    if (rng() % 10) tract = "T" + std::to_string(rng() % 6);
    const std::string id = "d" + std::to_string(i);
    if (rng() % 12 == 0) {
      out.push_back(declaration(id, tract, 1 + rng() % 60));
      continue;
    }
    std::vector<std::string> lots;
    const std::size_t k = 1 + rng() % 4;
    while (lots.size() < k) {
      std::string lot = std::to_string(rng() % 15);
      if (std::find(lots.begin(), lots.end(), lot) == lots.end()) lots.push_back(lot);
    }
    std::optional<std::string> block;
    if (rng() % 3) block = std::to_string(rng() % 3);
    out.push_back(lots_in(id, tract, block, lots));
  }
  return out;
}

oracle::Record to_oracle(const CovenantRecord& r) {
  oracle::Record o;
  o.tract = r.tract_id.value_or("");
  o.block = r.block.value_or("");
  o.lots = r.lots;
  if (r.scope == Scope::kTractWide) o.tract_wide_lots = r.lot_count_if_tract_wide;
  return o;
}

TEST(DedupLots, MatchesSetUnionOracle) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto records = random_records(rng);
    std::vector<oracle::Record> simple;
    std::size_t gross = 0;
    for (const auto& r : records) {
      simple.push_back(to_oracle(r));
      gross += gross_lots(r);
    }
    const auto d = dedup_lots(records);
    EXPECT_EQ(d.net_lots(), oracle::net_lots(simple));
    EXPECT_EQ(d.gross_lots, gross);
    EXPECT_LE(d.net_lots(), d.gross_lots);
    EXPECT_EQ(d.removed, d.gross_lots - d.net_lots());
  }
}

TEST(DedupLots, IdempotentAndOrderInvariant) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    auto records = random_records(rng);
    const auto d = dedup_lots(records);
    const auto again = dedup_lots(to_records(d));
    EXPECT_EQ(again.removed, 0u);
    EXPECT_EQ(again.net_lots() + d.undeduplicated_lots, d.net_lots());
    std::shuffle(records.begin(), records.end(), rng);
    EXPECT_EQ(dedup_lots(records).net_lots(), d.net_lots());
  }
}

TEST(EstimateCoverage, HeadlineArithmetic) {
  ReportInputs in;
  in.tract_wide_lots = 18871;
  in.multi_lot_lots = 5354;
  in.single_lot_deeds = 5612;
  in.dedup_removed = 5315;
  const auto r = estimate_coverage(in, {1950, 92315});
  EXPECT_EQ(r.net_lots, 24522u);
  EXPECT_DOUBLE_EQ(r.coverage_ratio, 24522.0 / 92315.0);
  EXPECT_NEAR(r.coverage_ratio, 0.26563, 5e-6);
}

TEST(EstimateCoverage, ZeroInputsAndBadStock) {
  const auto r = estimate_coverage({}, {1950, 1});
  EXPECT_EQ(r.net_lots, 0u);
  EXPECT_DOUBLE_EQ(r.coverage_ratio, 0.0);
  EXPECT_EQ(code_of([] { estimate_coverage({}, {1950, 0}); }), ErrorCode::kInvalidArgument);
  ReportInputs bad;
  bad.dedup_removed = 1;
  EXPECT_EQ(code_of([&] { estimate_coverage(bad, {1950, 10}); }), ErrorCode::kInvalidArgument);
}

TEST(BuildReport, PackagedFixtureReproducesTotals) {
  const auto records = load_records_csv(testing::fixture("prevalence_records.csv").string());
  const auto r = build_report(records, {1950, 92315});
  EXPECT_EQ(r.tract_wide_deeds, 412u);
  EXPECT_EQ(r.tract_wide_lots, 18871u);
  EXPECT_EQ(r.multi_lot_lots, 5354u);
  EXPECT_EQ(r.single_lot_deeds, 5612u);
  EXPECT_EQ(r.dedup_removed, 5315u);
  EXPECT_EQ(r.net_lots, 24522u);
  EXPECT_NEAR(r.coverage_ratio, 0.2656, 1e-4);
}

TEST(ClassifyScope, Examples) {
  EXPECT_EQ(classify_scope("Declaration of Restrictions. These restrictions shall apply to all lots in said tract.", {}),
            Scope::kTractWide);
  EXPECT_EQ(classify_scope("", {"3", "4", "7"}), Scope::kMultiLot);
  EXPECT_EQ(classify_scope("", {"12"}), Scope::kSingleLot);
  EXPECT_EQ(classify_scope("conveys Lots 3, 4 and 7 in Block 2", {}), Scope::kMultiLot);
  EXPECT_EQ(classify_scope("conveys Lot 12 of said tract", {}), Scope::kSingleLot);
  EXPECT_EQ(code_of([] { classify_scope("the said premises", {}); }), ErrorCode::kUnclassifiableScope);
}

class AlwaysTractWide final : public ScopeClassifier {
 public:
  std::optional<bool> tract_wide(std::string_view) const override { return true; }
};

TEST(ClassifyScope, BackendCanDeclareTractWide) {
  const AlwaysTractWide backend;
  EXPECT_EQ(classify_scope("restrictions for the subdivision", {}, &backend), Scope::kTractWide);
}

TEST(ExtractLots, ParsesListsAndSuffixes) {
  EXPECT_EQ(extract_lots("Lots No. 5 & 6 and Lot 7a"), (std::vector<std::string>{"5", "6", "7A"}));
  EXPECT_TRUE(extract_lots("no lot numbers here").empty());
}

TEST(ParseRecordsCsv, ParsesAndValidates) {
  std::istringstream in(
      "deed_id,date,tract_id,block,lots,scope,lot_count_if_tract_wide\n"
      "D1,1941-02-03,T,2,3|4,multi-lot,\n"
      "D2,,T,,,tract-wide,40\n");
  const auto rs = parse_records_csv(in);
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[0].lots, (std::vector<std::string>{"3", "4"}));
  EXPECT_EQ(rs[0].recorded_date->str(), "1941-02-03");
  EXPECT_EQ(rs[1].lot_count_if_tract_wide, 40u);
  EXPECT_FALSE(rs[1].block);

  std::istringstream bad("deed_id,date,tract_id,block,lots,scope,lot_count_if_tract_wide\nD1,,T,,3,multi-lot,\n");
  EXPECT_EQ(code_of([&] { parse_records_csv(bad); }), ErrorCode::kInvalidArgument);
  std::istringstream scope("deed_id,date,tract_id,block,lots,scope,lot_count_if_tract_wide\nD1,,T,,3,whole,\n");
  EXPECT_EQ(code_of([&] { parse_records_csv(scope); }), ErrorCode::kParse);
}

TEST(PerTractCsv, ListsEachTract) {
  const auto d = dedup_lots({declaration("x", "A", 3), lots_in("y", "B", "1", {"1", "2"})});
  EXPECT_EQ(per_tract_csv(d), "tract_id,tract_wide_lots,individual_lots,net_lots\nA,3,0,3\nB,0,2,2\n");
}

}  // namespace
}  // namespace covenant::prevalence
