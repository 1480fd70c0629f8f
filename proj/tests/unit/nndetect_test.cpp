#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <thread>

#include "covenant/http_backend.hpp"
#include "covenant/nndetect.hpp"
#include "test_support.hpp"

namespace covenant::nn {
namespace {

using testing::code_of;

class FixedBackend final : public ModelBackend {
 public:
  explicit FixedBackend(ModelJudgment j) : j_(std::move(j)) {}
  ModelJudgment judge(const InferenceRequest&) const override { return j_; }

 private:
  ModelJudgment j_;
};

TEST(RenderPrompt, EmptyPageZeroShot) {
  const auto tpl = default_template(default_shots());
  const std::string out = render_prompt(tpl, "", false);
  EXPECT_TRUE(out.ends_with("### Deed page:\n\n\n### Answer:"));
  EXPECT_EQ(out.find("Caucasian race"), std::string::npos);
}

TEST(RenderPrompt, FewShotIncludesBothExamplesBeforeTarget) {
  const auto tpl = default_template(default_shots());
  const std::string out = render_prompt(tpl, "TARGET PAGE", true);
  std::size_t count = 0;
  for (std::size_t pos = out.find("### Deed page:"); pos != std::string::npos; pos = out.find("### Deed page:", pos + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 3u);
  EXPECT_LT(out.find(tpl.shots()[1].page_text), out.find("TARGET PAGE"));
  EXPECT_TRUE(out.ends_with("TARGET PAGE\n\n### Answer:"));
}

TEST(RenderPrompt, DistinctPagesGiveDistinctPrompts) {
  const auto tpl = default_template();
  std::mt19937 rng(1);
  std::set<std::string> pages, prompts;
  for (int i = 0; i < 500; ++i) {
    std::string p;
    for (int k = 0, n = static_cast<int>(rng() % 8); k < n; ++k) p.push_back("ab \n{}"[rng() % 6]);
    if (pages.insert(p).second) prompts.insert(render_prompt(tpl, p, false));
  }
  EXPECT_EQ(pages.size(), prompts.size());
}

TEST(PromptTemplate, RequiresExactlyOneSlot) {
  EXPECT_EQ(code_of([] { PromptTemplate("i", "no slot here"); }), ErrorCode::kMissingPlaceholder);
  EXPECT_EQ(code_of([] { PromptTemplate("i", "{page_text} and {page_text}"); }), ErrorCode::kInvalidArgument);
}

TEST(ScoreConfidence, Examples) {
  EXPECT_DOUBLE_EQ(score_confidence({0.0, 0.0, ""}), 0.5);
  EXPECT_NEAR(score_confidence({std::log(3.0), 0.0, ""}), 0.75, 1e-12);
  EXPECT_DOUBLE_EQ(score_confidence({1000.0, 0.0, ""}), 1.0);
  EXPECT_DOUBLE_EQ(score_confidence({-1000.0, 1000.0, ""}), 0.0);
}

TEST(ScoreConfidence, ComplementMonotoneAndShiftInvariant) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> d(-50, 50);
  for (int i = 0; i < 2000; ++i) {
    const double a = d(rng), b = d(rng), c = d(rng);
    const double p = score_confidence({a, b, ""});
    EXPECT_NEAR(p + score_confidence({b, a, ""}), 1.0, 1e-12);
    EXPECT_NEAR(score_confidence({a + c, b + c, ""}), p, 1e-9);
    EXPECT_GE(score_confidence({a + std::abs(c), b, ""}), p);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

PageRecord page_of(const std::string& text) { return make_page("D", 1, text); }

TEST(ClassifyPage, FixedLogitsAreGated) {
  const auto page = page_of("said lot");
  DetectorConfig cfg;
  auto d = classify_page(page, FixedBackend({2.0, 0.0, "said lot"}), cfg);
  EXPECT_NEAR(d.confidence, 0.881, 5e-4);
  EXPECT_TRUE(d.flagged);
  EXPECT_EQ(d.detector, "model");

  // 0.74 sits just under the 0.75 default.
  const double w = std::log(0.74 / 0.26);
  d = classify_page(page, FixedBackend({w, 0.0, "said lot"}), cfg);
  EXPECT_NEAR(d.confidence, 0.74, 1e-12);
  EXPECT_FALSE(d.flagged);
  EXPECT_FALSE(d.filtered_reason);
}

TEST(ClassifyPage, FairHousingQuoteIsFiltered) {
  const auto page = page_of("This deed complies with the Fair Housing Act.");
  DetectorConfig cfg;
  auto d = classify_page(page, FixedBackend({5.0, 0.0, "complies with the Fair Housing Act"}), cfg);
  EXPECT_FALSE(d.flagged);
  EXPECT_EQ(d.filtered_reason, "fair housing");
  cfg.fair_housing_filter = false;
  d = classify_page(page, FixedBackend({5.0, 0.0, "complies with the Fair Housing Act"}), cfg);
  EXPECT_TRUE(d.flagged);
}

TEST(ClassifyPage, RaisingThresholdNeverAddsFlags) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> logit(-6, 6), thr(0, 1);
  const auto page = page_of("x");
  for (int i = 0; i < 1000; ++i) {
    const FixedBackend b({logit(rng), logit(rng), "x"});
    DetectorConfig lo, hi;
    lo.confidence_threshold = thr(rng);
    hi.confidence_threshold = lo.confidence_threshold + (1 - lo.confidence_threshold) * thr(rng);
    if (classify_page(page, b, hi).flagged) {
      EXPECT_TRUE(classify_page(page, b, lo).flagged);
    }
  }
}

TEST(ClassifyPage, RejectsBadConfigAndNonFiniteLogits) {
  DetectorConfig cfg;
  cfg.confidence_threshold = 1.5;
  EXPECT_EQ(code_of([&] { classify_page(page_of("x"), FixedBackend({1, 0, ""}), cfg); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { classify_page(page_of("x"), FixedBackend({NAN, 0, ""}), {}); }),
            ErrorCode::kBackendMalformedResponse);
}

TEST(MockBackend, DeterministicAndQuotesSentence) {
  const auto mock = mock_backend();
  const std::string text = "Lot 4 of Block 2. No person not of the Caucasian race shall occupy the premises. End.";
  const InferenceRequest req{"prompt", text};
  const auto a = mock.judge(req);
  EXPECT_EQ(a, mock.judge(req));
  EXPECT_EQ(a.quote, "No person not of the Caucasian race shall occupy the premises.");
  EXPECT_GT(a.w_yes, a.w_no);
  const auto b = mock.judge({"prompt", "Lot 4 of Block 2 in the Caucasia tract."});
  EXPECT_LT(b.w_yes, b.w_no);
  EXPECT_TRUE(b.quote.empty());
}

TEST(Judgment, ParsesWireFormat) {
  EXPECT_EQ(judgment_from_json(nlohmann::json::parse(R"({"w_yes": 1.5, "w_no": -2, "quote": "q"})")),
            (ModelJudgment{1.5, -2.0, "q"}));
  EXPECT_EQ(judgment_from_json(nlohmann::json::parse(R"({"w_yes": 0, "w_no": 0, "quote": null})")).quote, "");
  EXPECT_EQ(code_of([] { judgment_from_json(nlohmann::json::parse(R"({"w_yes": "x", "w_no": 0})")); }),
            ErrorCode::kBackendMalformedResponse);
  EXPECT_EQ(code_of([] { judgment_from_json(nlohmann::json::parse(R"({"w_no": 0})")); }),
            ErrorCode::kBackendMalformedResponse);
}

class StubServer {
 public:
  StubServer() {
    server_.Post("/v1/judge", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      last_body = req.body;
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  int port() const { return port_; }

  std::atomic<int> calls{0};
  int status = 200;
  std::string body;
  std::string last_body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(HttpBackend, SpeaksWireContract) {
  StubServer stub;
  stub.body = R"({"w_yes": 3.0, "w_no": 0.0, "quote": "not of the Caucasian race"})";
  const HttpBackend backend("127.0.0.1", stub.port());
  const auto j = backend.judge({"the prompt", "page"});
  EXPECT_EQ(j, (ModelJudgment{3.0, 0.0, "not of the Caucasian race"}));
  EXPECT_EQ(nlohmann::json::parse(stub.last_body), (nlohmann::json{{"prompt", "the prompt"}}));
}

TEST(HttpBackend, MapsFailures) {
  StubServer stub;
  const HttpBackend backend("127.0.0.1", stub.port());
  stub.status = 503;
  stub.body = "{}";
  EXPECT_EQ(code_of([&] { backend.judge({"p", ""}); }), ErrorCode::kBackendUnavailable);
  stub.status = 200;
  stub.body = "not json";
  EXPECT_EQ(code_of([&] { backend.judge({"p", ""}); }), ErrorCode::kBackendMalformedResponse);
  stub.status = 404;
  EXPECT_EQ(code_of([&] { backend.judge({"p", ""}); }), ErrorCode::kBackendMalformedResponse);
}

TEST(HttpBackend, UnreachableServerIsUnavailable) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  const HttpBackend backend("127.0.0.1", port, "/v1/judge", 2);
  EXPECT_EQ(code_of([&] { backend.judge({"p", ""}); }), ErrorCode::kBackendUnavailable);
}

}  // namespace
}  // namespace covenant::nn
