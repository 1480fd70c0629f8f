#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "covenant/evalkit.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace covenant::eval {
namespace {

using testing::code_of;

TEST(Wilson, AuditExample) {
  const auto ci = wilson_interval(198, 200);
  EXPECT_NEAR(ci.low, 0.9643, 5e-4);
  EXPECT_NEAR(ci.high, 0.9973, 5e-4);
  const auto [lo, hi] = oracle::wilson(198, 200);
  EXPECT_NEAR(ci.low, lo, 1e-12);
  EXPECT_NEAR(ci.high, hi, 1e-12);
}

TEST(Wilson, EdgesAndErrors) {
  EXPECT_DOUBLE_EQ(wilson_interval(0, 10).low, 0.0);
  EXPECT_DOUBLE_EQ(wilson_interval(50, 50).high, 1.0);
  EXPECT_EQ(code_of([] { wilson_interval(0, 0); }), ErrorCode::kInvalidCounts);
  EXPECT_EQ(code_of([] { wilson_interval(3, 2); }), ErrorCode::kInvalidCounts);
}

TEST(Wilson, PropertiesOverAllSmallCounts) {
  for (std::size_t n = 1; n <= 120; ++n) {
    Interval prev{-1, -1};
    for (std::size_t k = 0; k <= n; ++k) {
      const auto ci = wilson_interval(k, n);
      const double p = static_cast<double>(k) / static_cast<double>(n);
      EXPECT_LE(ci.low, p);
      EXPECT_GE(ci.high, p);
      EXPECT_GE(ci.low, 0.0);
      EXPECT_LE(ci.high, 1.0);
      EXPECT_GE(ci.low, prev.low);
      EXPECT_GE(ci.high, prev.high);
      prev = ci;
    }
  }
  // Same proportion, more trials -> narrower interval.
  for (std::size_t n = 10; n <= 1000; n *= 10) {
    const auto a = wilson_interval(n / 2, n), b = wilson_interval(n * 5, n * 10);
    EXPECT_LT(b.high - b.low, a.high - a.low);
  }
}

TEST(Bleu, IdentityEmptyAndErrors) {
  EXPECT_DOUBLE_EQ(bleu("no person of african descent", "No  person of African descent"), 1.0);
  EXPECT_DOUBLE_EQ(bleu("", "a b c d"), 0.0);
  EXPECT_DOUBLE_EQ(bleu("zzz", "a b c d"), 0.0);
  EXPECT_EQ(code_of([] { bleu("a", "  "); }), ErrorCode::kEmptyReference);
}

TEST(Bleu, NearMissAgreesWithIndependentImplementation) {
  const double got = bleu("no person not of the caucasian race", "no persons not of the caucasian race");
  const double want = oracle::bleu("no person not of the caucasian race", "no persons not of the caucasian race");
  EXPECT_NEAR(got, want, 1e-12);
  // Hand count: precisions 6/7, 4/6, 3/5, 2/4, equal lengths.
  EXPECT_NEAR(got, std::pow(6.0 / 7 * 4.0 / 6 * 3.0 / 5 * 2.0 / 4, 0.25), 1e-12);
}

TEST(Bleu, RandomSentencesAgreeWithOracle) {
  std::mt19937 rng(12);
  const std::vector<std::string> vocab = {"no", "lot", "said", "the", "race", "of", "not"};
  const auto sentence = [&](std::size_t max_len) {
    std::string s;
    for (std::size_t i = 0, n = 1 + rng() % max_len; i < n; ++i) s += (i ? " " : "") + vocab[rng() % vocab.size()];
    return s;
  };
  for (int trial = 0; trial < 2000; ++trial) {
    const std::string c = sentence(12), r = sentence(12);
    const double b = bleu(c, r);
    EXPECT_NEAR(b, oracle::bleu(c, r), 1e-12) << c << " | " << r;
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0 + 1e-12);
  }
}

TEST(PageMetrics, SmallExample) {
  const std::vector<LabeledPage> gold = {
      {{"a", 1}, true, "no lot shall be sold"}, {{"b", 1}, true, std::nullopt}, {{"c", 1}, false, std::nullopt}, {{"d", 1}, false, std::nullopt}};
  const std::vector<PagePrediction> preds = {
      {{"a", 1}, true, "No lot shall be  sold"}, {{"b", 1}, false, ""}, {{"c", 1}, true, ""}, {{"d", 1}, false, ""}};
  auto m = page_metrics(preds, gold);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 1u);
  EXPECT_DOUBLE_EQ(*m.mean_bleu, 1.0);

  m = metrics_from_counts(2, 1, 1, 0);
  EXPECT_DOUBLE_EQ(*m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*m.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*m.f1, 2.0 / 3.0);
}

TEST(PageMetrics, PerfectAndAllNegative) {
  auto m = metrics_from_counts(5, 0, 0, 5);
  EXPECT_DOUBLE_EQ(*m.precision, 1.0);
  EXPECT_DOUBLE_EQ(*m.recall, 1.0);
  EXPECT_DOUBLE_EQ(*m.f1, 1.0);
  m = metrics_from_counts(0, 0, 0, 9);
  EXPECT_FALSE(m.precision);
  EXPECT_FALSE(m.recall);
  EXPECT_FALSE(m.f1);
  const auto j = to_json(m);
  EXPECT_TRUE(j["precision"].is_null());
  EXPECT_EQ(j["tn"], 9);
}

TEST(PageMetrics, KeyMismatch) {
  const std::vector<LabeledPage> gold = {{{"a", 1}, true, std::nullopt}};
  EXPECT_EQ(code_of([&] { page_metrics({{{"b", 1}, true, ""}}, gold); }), ErrorCode::kKeyMismatch);
  EXPECT_EQ(code_of([&] { page_metrics({}, gold); }), ErrorCode::kKeyMismatch);
  EXPECT_EQ(code_of([&] { page_metrics({{{"a", 1}, true, ""}, {{"a", 1}, false, ""}}, gold); }),
            ErrorCode::kKeyMismatch);
}

struct SweepFixture {
  std::vector<ScoredPage> scored;
  std::vector<LabeledPage> gold;
};

SweepFixture random_sweep(std::mt19937& rng, std::size_t n) {
  SweepFixture f;
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const bool label = rng() % 3 == 0;
    const PageKey key{"P", static_cast<int>(i + 1)};
    f.gold.push_back({key, label, std::nullopt});
    // Positives skew high so the sweep has a real optimum.
    f.scored.push_back({key, label ? std::sqrt(u(rng)) : u(rng) * u(rng), ""});
  }
  return f;
}

TEST(ThresholdSweep, ExtremeThresholds) {
  std::mt19937 rng(13);
  const auto f = random_sweep(rng, 60);
  const auto sweep = threshold_sweep(f.scored, f.gold, {0.0, 1.01});
  EXPECT_DOUBLE_EQ(*sweep[0].second.recall, 1.0);
  EXPECT_DOUBLE_EQ(*sweep[1].second.recall, 0.0);
  EXPECT_EQ(code_of([&] { threshold_sweep(f.scored, f.gold, {0.5, 0.2}); }), ErrorCode::kInvalidArgument);
}

TEST(ThresholdSweep, BestF1MatchesBruteForceAndRecallIsMonotone) {
  std::mt19937 rng(14);
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto f = random_sweep(rng, 80);
    const auto sweep = threshold_sweep(f.scored, f.gold, grid);

    double best_f1 = -1;
    std::optional<double> best_t;
    for (double t : grid) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < f.scored.size(); ++i) {
        const bool flag = f.scored[i].confidence >= t;
        tp += flag && f.gold[i].gold_label;
        fp += flag && !f.gold[i].gold_label;
        fn += !flag && f.gold[i].gold_label;
      }
      if (tp + fp == 0 || tp + fn == 0) continue;
      const double f1 = 2.0 * tp / (2.0 * tp + fp + fn);
      if (f1 > best_f1 + 1e-12) {
        best_f1 = f1;
        best_t = t;
      }
    }
    EXPECT_EQ(best_f1_threshold(sweep), best_t);
    for (std::size_t i = 1; i < sweep.size(); ++i) EXPECT_LE(*sweep[i].second.recall, *sweep[i - 1].second.recall);
  }
}

TEST(RenderTable, FixedLayout) {
  const auto table = render_table({{"keyword", metrics_from_counts(1, 1, 0, 0)}, {"none", metrics_from_counts(0, 0, 0, 1)}});
  std::istringstream in(table);
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  EXPECT_TRUE(header.starts_with("Model  "));
  EXPECT_NE(row1.find("0.500 ("), std::string::npos);
  EXPECT_NE(row2.find(" - "), std::string::npos);
  EXPECT_EQ(table, render_table({{"keyword", metrics_from_counts(1, 1, 0, 0)}, {"none", metrics_from_counts(0, 0, 0, 1)}}));
}

TEST(GoldCsv, ParsesAndRejects) {
  std::istringstream in("doc_id,page_no,gold_label,gold_span\nA,1,true,\"no person, ever\"\nB,2,0,\n");
  const auto gold = parse_gold_csv(in);
  ASSERT_EQ(gold.size(), 2u);
  EXPECT_EQ(gold[0].gold_span, "no person, ever");
  EXPECT_FALSE(gold[1].gold_label);
  std::istringstream bad("doc_id,page_no,gold_label\nA,x,true\n");
  EXPECT_EQ(code_of([&] { parse_gold_csv(bad); }), ErrorCode::kParse);
  std::istringstream neg("doc_id,page_no,gold_label,gold_span\nA,1,false,span\n");
  EXPECT_EQ(code_of([&] { parse_gold_csv(neg); }), ErrorCode::kParse);
}

}  // namespace
}  // namespace covenant::eval
