#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "covenant/lexdetect.hpp"
#include "test_support.hpp"

namespace covenant::lex {
namespace {

// Independent trigram-set oracle over ASCII words.
std::set<std::string> grams(const std::string& w, std::size_t n = 3) {
  if (w.size() < n) return {w};
  std::set<std::string> out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) out.insert(w.substr(i, n));
  return out;
}

double oracle_cosine(const std::string& a, const std::string& b) {
  const auto ga = grams(a), gb = grams(b);
  std::size_t common = 0;
  for (const auto& g : ga) common += gb.count(g);
  return static_cast<double>(common) / std::sqrt(static_cast<double>(ga.size() * gb.size()));
}

std::vector<std::string> as_strings(const NgramSet& s) {
  std::vector<std::string> out;
  for (const auto& g : s) out.push_back(text::encode_utf8(g));
  return out;
}

TEST(NgramSet, Examples) {
  EXPECT_EQ(as_strings(ngram_set(std::string("caucasian"), 3)),
            (std::vector<std::string>{"asi", "auc", "cas", "cau", "ian", "sia", "uca"}));
  EXPECT_EQ(as_strings(ngram_set(std::string("ab"), 3)), (std::vector<std::string>{"ab"}));
  EXPECT_EQ(as_strings(ngram_set(std::string("negro"), 3)), (std::vector<std::string>{"egr", "gro", "neg"}));
}

TEST(NgramSet, PaddingAddsBoundaryGrams) {
  const auto padded = as_strings(ngram_set(std::string("ab"), 3, true));
  EXPECT_EQ(padded, (std::vector<std::string>{"  a", " ab", "ab "}));
}

TEST(CosineSim, HandEnumeratedCases) {
  const auto s = [](const char* w) { return ngram_set(std::string(w), 3); };
  EXPECT_DOUBLE_EQ(cosine_sim(s("caucasian"), s("caucasian")), 1.0);
  EXPECT_DOUBLE_EQ(cosine_sim(s("negro"), s("white")), 0.0);
  const double caucasia = cosine_sim(s("caucasia"), s("caucasian"));
  EXPECT_DOUBLE_EQ(caucasia, 6.0 / std::sqrt(42.0));
  EXPECT_NEAR(caucasia, 0.926, 5e-4);
  const double caucian = cosine_sim(s("caucian"), s("caucasian"));
  EXPECT_DOUBLE_EQ(caucian, 3.0 / std::sqrt(35.0));
  EXPECT_NEAR(caucian, 0.507, 5e-4);
  EXPECT_DOUBLE_EQ(caucian, oracle_cosine("caucian", "caucasian"));
}

TEST(CosineSim, EmptySetThrows) {
  try {
    cosine_sim({}, ngram_set(std::string("abc"), 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptySet);
  }
}

std::string random_word(std::mt19937& rng, const std::string& alphabet, std::size_t min_len, std::size_t max_len) {
  const std::size_t len = min_len + rng() % (max_len - min_len + 1);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w.push_back(alphabet[rng() % alphabet.size()]);
  return w;
}

TEST(CosineSim, MatchesOracleAndIsSymmetricOnRandomPairs) {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::string a = random_word(rng, "abcde", 1, 9);
    const std::string b = random_word(rng, "abcde", 1, 9);
    const auto ga = ngram_set(a, 3), gb = ngram_set(b, 3);
    EXPECT_DOUBLE_EQ(cosine_sim(ga, gb), cosine_sim(gb, ga));
    EXPECT_NEAR(cosine_sim(ga, gb), oracle_cosine(a, b), 1e-12);
  }
}

TEST(KeywordScan, Examples) {
  const auto caucasian = KeywordList::from_terms({"caucasian"}, "t");
  auto hits = keyword_scan(std::string("no persons not of the caucasian race"), caucasian);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].keyword, "caucasian");
  EXPECT_EQ(hits[0].char_start, 22u);
  EXPECT_EQ(hits[0].char_end, 31u);

  hits = keyword_scan(std::string("whitestone avenue"), KeywordList::from_terms({"white"}, "t"));
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].word, "whitestone");
  EXPECT_DOUBLE_EQ(hits[0].score, 1.0);

  EXPECT_TRUE(keyword_scan(std::string("anything at all"), KeywordList::from_terms({}, "empty")).empty());
}

TEST(KeywordScan, MatchesNaiveSubstringOracle) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> terms;
    const int n_terms = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n_terms; ++i) terms.push_back(random_word(rng, "ab", 1, 3));
    const auto list = KeywordList::from_terms(terms, "rand");
    std::string page = random_word(rng, "ab ", 0, 30);
    page = text::normalize(page);

    std::multiset<std::tuple<std::size_t, std::size_t, std::string>> expected;
    for (const auto& t : list.terms()) {
      for (std::size_t i = 0; i + t.size() <= page.size(); ++i) {
        bool eq = true;
        for (std::size_t k = 0; k < t.size(); ++k) eq = eq && page[i + k] == t[k];
        if (eq) expected.insert({i, i + t.size(), t});
      }
    }
    std::multiset<std::tuple<std::size_t, std::size_t, std::string>> got;
    for (const auto& h : keyword_scan(page, list)) got.insert({h.char_start, h.char_end, h.keyword});
    EXPECT_EQ(got, expected) << page;
  }
}

TEST(FuzzyScan, Examples) {
  const auto list = KeywordList::from_terms({"caucasian"}, "t");
  auto hits = fuzzy_scan(std::string("of the caucasian race"), list);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_DOUBLE_EQ(hits[0].score, 1.0);

  hits = fuzzy_scan(std::string("of the caucasia race"), list);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].word, "caucasia");
  EXPECT_NEAR(hits[0].score, 0.926, 5e-4);

  EXPECT_TRUE(fuzzy_scan(std::string("of the caucian race"), list).empty());
}

TEST(FuzzyScan, SkipsMultiWordTerms) {
  const auto list = KeywordList::from_terms({"restricted district"}, "t");
  EXPECT_TRUE(fuzzy_scan(std::string("restricted district"), list).empty());
  EXPECT_EQ(keyword_scan(std::string("a restricted district"), list).size(), 1u);
}

TEST(FuzzyScan, ComparisonModeAtThreshold) {
  // "abcd" vs "abce": one shared gram of two each -> cosine 0.5.
  const auto list = KeywordList::from_terms({"abce"}, "t");
  FuzzyConfig cfg;
  cfg.threshold = 0.5;
  EXPECT_TRUE(fuzzy_scan(std::string("abcd"), list, cfg).empty());
  cfg.comparison = Comparison::kGreaterOrEqual;
  EXPECT_EQ(fuzzy_scan(std::string("abcd"), list, cfg).size(), 1u);
}

TEST(FuzzyScan, ThresholdOneInclusiveEqualsWholeWordMatch) {
  std::mt19937 rng(99);
  FuzzyConfig cfg;
  cfg.threshold = 1.0;
  cfg.comparison = Comparison::kGreaterOrEqual;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> terms = {random_word(rng, "abc", 3, 5), random_word(rng, "abc", 3, 5)};
    const auto list = KeywordList::from_terms(terms, "t");
    const std::string page = text::normalize(random_word(rng, "abc ", 0, 25));
    bool whole_word = false;
    std::istringstream words(page);
    for (std::string w; words >> w;) {
      for (const auto& t : list.terms()) whole_word = whole_word || (w == t);
    }
    // Trigram sets can coincide for distinct words, so equality of sets is
    // the exact criterion; check it implies the whole-word case.
    const bool flagged = !fuzzy_scan(page, list, cfg).empty();
    if (whole_word) {
      EXPECT_TRUE(flagged) << page;
    }
    if (flagged && !whole_word) {
      bool same_set = false;
      std::istringstream again(page);
      for (std::string w; again >> w;) {
        for (const auto& t : list.terms()) same_set = same_set || grams(w) == grams(t);
      }
      EXPECT_TRUE(same_set) << page;
    }
  }
}

TEST(FuzzyScan, LoweringThresholdNeverRemovesHits) {
  std::mt19937 rng(5);
  const auto list = county_default_keywords();
  for (int trial = 0; trial < 300; ++trial) {
    const std::string page = text::normalize(random_word(rng, "aeicnrstuwhl ", 5, 60));
    FuzzyConfig hi, lo;
    hi.threshold = 0.3 + 0.6 * (rng() % 1000) / 1000.0;
    lo.threshold = hi.threshold * (rng() % 1000) / 1000.0 + 1e-3;
    std::set<std::size_t> hi_starts, lo_starts;
    for (const auto& h : fuzzy_scan(page, list, hi)) hi_starts.insert(h.char_start);
    for (const auto& h : fuzzy_scan(page, list, lo)) lo_starts.insert(h.char_start);
    for (auto s : hi_starts) EXPECT_TRUE(lo_starts.count(s)) << page;
  }
}

TEST(KeywordList, ParsesFileFormat) {
  std::istringstream in("# header\nCaucasian\n\n  negro  # trailing comment\ncaucasian\nRestricted   District\n");
  const auto list = KeywordList::parse(in, "file");
  EXPECT_EQ(list.terms(), (std::vector<std::string>{"caucasian", "negro", "restricted district"}));
  EXPECT_EQ(list.source(), "file");
}

TEST(KeywordList, ShippedFileMatchesBuiltInDefault) {
  const auto from_file = KeywordList::load((testing::data_dir() / "keywords" / "county_default.txt").string());
  const auto builtin = county_default_keywords();
  EXPECT_EQ(from_file.terms(), builtin.terms());
  EXPECT_EQ(builtin.source(), "county-default");
  EXPECT_EQ(builtin.terms().size(), 53u);
}

TEST(FuzzyConfig, Validation) {
  FuzzyConfig cfg;
  cfg.n = 1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.threshold = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.threshold = 1.0;
  EXPECT_NO_THROW(cfg.validate());
}

}  // namespace
}  // namespace covenant::lex
