#pragma once

// Model-backed covenant classification: prompt rendering, yes/no confidence
// from answer-token logits, threshold gating and the phrase filter applied
// at deployment time.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "covenant/corpus.hpp"
#include "covenant/error.hpp"
#include "covenant/spanloc.hpp"
#include "covenant/text.hpp"

namespace covenant {
namespace nn {

inline constexpr std::string_view kPageSlot = "{page_text}";

struct FewShotExample {
  std::string page_text;
  bool answer = true;
  std::string quote;
};

class PromptTemplate {
 public:
  // `body` must contain the page slot exactly once.
  PromptTemplate(std::string instruction, std::string body, std::vector<FewShotExample> shots = {})
      : instruction_(std::move(instruction)), shots_(std::move(shots)) {
    const auto pos = body.find(kPageSlot);
    if (pos == std::string::npos) throw Error(ErrorCode::kMissingPlaceholder, "template body lacks {page_text}");
    if (body.find(kPageSlot, pos + 1) != std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument, "template body repeats {page_text}");
    }
    prefix_ = body.substr(0, pos);
    suffix_ = body.substr(pos + kPageSlot.size());
  }

  const std::vector<FewShotExample>& shots() const { return shots_; }

  std::string render(std::string_view page_text, bool few_shot) const {
    std::string out = instruction_;
    out += "\n\n";
    if (few_shot) {
      for (const auto& shot : shots_) {
        out += prefix_;
        out += shot.page_text;
        out += suffix_;
        out += shot.answer ? " yes" : " no";
        if (shot.answer) {
          out += "\n### Quote:\n";
          out += shot.quote;
        }
        out += "\n\n";
      }
    }
    out += prefix_;
    out += page_text;
    out += suffix_;
    return out;
  }

 private:
  std::string instruction_;
  std::string prefix_;
  std::string suffix_;
  std::vector<FewShotExample> shots_;
};

inline PromptTemplate default_template(std::vector<FewShotExample> shots = {}) {
  return PromptTemplate(
      "Read the following page from a property deed. Answer \"yes\" if it contains a racially restrictive "
      "covenant and \"no\" otherwise. If the answer is yes, quote the covenant exactly as it appears on the page.",
      "### Deed page:\n{page_text}\n\n### Answer:", std::move(shots));
}

// The two shots used for few-shot prompting.
inline std::vector<FewShotExample> default_shots() {
  return {
      {"The said premises shall not be sold, leased or rented to any person not of the Caucasian race. "
       "This covenant shall run with the land.",
       true, "The said premises shall not be sold, leased or rented to any person not of the Caucasian race."},
      {"No part of said property shall ever be occupied by any person of African, Chinese or Japanese "
       "descent, except as servants of the owner.",
       true,
       "No part of said property shall ever be occupied by any person of African, Chinese or Japanese descent, "
       "except as servants of the owner."},
  };
}

inline std::string render_prompt(const PromptTemplate& tpl, std::string_view page_text, bool few_shot) {
  return tpl.render(page_text, few_shot);
}

struct ModelJudgment {
  double w_yes = 0.0;
  double w_no = 0.0;
  std::string quote;

  friend bool operator==(const ModelJudgment&, const ModelJudgment&) = default;
};

// Wire form: {"w_yes": float, "w_no": float, "quote": string}.
inline nlohmann::json judgment_to_json(const ModelJudgment& j) {
  return {{"w_yes", j.w_yes}, {"w_no", j.w_no}, {"quote", j.quote}};
}

inline ModelJudgment judgment_from_json(const nlohmann::json& j) {
  try {
    ModelJudgment out;
    out.w_yes = j.at("w_yes").get<double>();
    out.w_no = j.at("w_no").get<double>();
    if (auto it = j.find("quote"); it != j.end() && !it->is_null()) out.quote = it->get<std::string>();
    if (!std::isfinite(out.w_yes) || !std::isfinite(out.w_no)) {
      throw Error(ErrorCode::kBackendMalformedResponse, "non-finite logits");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBackendMalformedResponse, e.what());
  }
}

// softmax([w_yes, w_no])[yes], shifted by the max logit.
inline double score_confidence(const ModelJudgment& j) {
  const double m = std::max(j.w_yes, j.w_no);
  const double yes = std::exp(j.w_yes - m);
  const double no = std::exp(j.w_no - m);
  return yes / (yes + no);
}

struct InferenceRequest {
  std::string prompt;
  // Local-only view of the target page for in-process backends; never
  // serialized.
  std::string_view page_text;
};

// Must tolerate concurrent judge() calls.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual ModelJudgment judge(const InferenceRequest& request) const = 0;
};

// Deterministic stand-in: says yes (w_yes = 4) and quotes the sentence
// around the first whole-word seed term found on the page, else says no
// (w_no = 4) with an empty quote.
class MockBackend final : public ModelBackend {
 public:
  explicit MockBackend(std::vector<std::string> seed_terms) {
    for (auto& t : seed_terms) {
      auto norm = text::normalize(t);
      if (!norm.empty()) seeds_.push_back(text::decode_utf8(norm));
    }
  }

  ModelJudgment judge(const InferenceRequest& request) const override {
    const std::u32string page = text::decode_utf8(request.page_text);
    for (const auto& w : text::split_words(page)) {
      std::u32string word = text::to_lower(std::u32string_view(page).substr(w.start, w.end - w.start));
      if (std::find(seeds_.begin(), seeds_.end(), word) == seeds_.end()) continue;
      const span::Span sentence = span::align_boundaries(page, {w.start, w.end});
      std::u32string quote = page.substr(sentence.start, sentence.end - sentence.start);
      while (!quote.empty() && text::is_space(quote.back())) quote.pop_back();
      return {4.0, 0.0, text::encode_utf8(quote)};
    }
    return {0.0, 4.0, ""};
  }

 private:
  std::vector<std::u32string> seeds_;
};

// Terms that, standing alone as words, almost only appear in covenants.
inline std::vector<std::string> covenant_seed_terms() {
  return {"caucasian", "negro",   "negroes", "mongolian", "mongolians", "ethiopian", "ethiopians", "malay",
          "malays",    "mulatto", "african", "asiatic",   "hindu",      "japanese",  "chinese"};
}

inline MockBackend mock_backend(std::vector<std::string> seed_terms = covenant_seed_terms()) {
  return MockBackend(std::move(seed_terms));
}

struct DetectorConfig {
  double confidence_threshold = 0.75;
  bool fair_housing_filter = true;
  std::vector<std::string> filter_phrases = {"fair housing"};
  bool few_shot = false;

  void validate() const {
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "confidence threshold must lie in [0, 1]");
    }
  }
};

struct Detection {
  PageKey key;
  bool flagged = false;
  double confidence = 0.0;
  std::string quote;
  std::string detector;
  std::optional<std::string> filtered_reason;

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline void to_json(nlohmann::json& j, const Detection& d) {
  j = nlohmann::json{{"doc_id", d.key.doc_id}, {"page_no", d.key.page_no}, {"flagged", d.flagged},
                     {"confidence", d.confidence}, {"quote", d.quote}, {"detector", d.detector}};
  j["filtered_reason"] = d.filtered_reason ? nlohmann::json(*d.filtered_reason) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, Detection& d) {
  j.at("doc_id").get_to(d.key.doc_id);
  j.at("page_no").get_to(d.key.page_no);
  j.at("flagged").get_to(d.flagged);
  j.at("confidence").get_to(d.confidence);
  d.quote = j.value("quote", std::string());
  d.detector = j.value("detector", std::string());
  d.filtered_reason.reset();
  if (auto it = j.find("filtered_reason"); it != j.end() && !it->is_null()) d.filtered_reason = it->get<std::string>();
}

// First configured phrase found (case-insensitively) in the quote, or in
// the page text when the quote is empty.
inline std::optional<std::string> matched_filter_phrase(const DetectorConfig& cfg, std::string_view quote,
                                                        std::string_view page_text) {
  if (!cfg.fair_housing_filter) return std::nullopt;
  const std::string haystack = text::normalize(quote.empty() ? page_text : quote);
  for (const auto& phrase : cfg.filter_phrases) {
    const std::string needle = text::normalize(phrase);
    if (!needle.empty() && haystack.find(needle) != std::string::npos) return needle;
  }
  return std::nullopt;
}

// Applies threshold and phrase filter to a judgment already obtained.
inline Detection gate(const PageKey& key, const PageRecord* page, const ModelJudgment& j, const DetectorConfig& cfg,
                      std::string detector) {
  Detection d;
  d.key = key;
  d.detector = std::move(detector);
  d.quote = j.quote;
  d.confidence = score_confidence(j);
  if (d.confidence >= cfg.confidence_threshold) {
    d.filtered_reason = matched_filter_phrase(cfg, j.quote, page ? std::string_view(page->text) : std::string_view());
    d.flagged = !d.filtered_reason.has_value();
  }
  return d;
}

inline Detection classify_page(const PageRecord& page, const ModelBackend& backend, const DetectorConfig& cfg,
                               const PromptTemplate& tpl = default_template(default_shots())) {
  cfg.validate();
  const InferenceRequest request{render_prompt(tpl, page.text, cfg.few_shot), page.text};
  const ModelJudgment judgment = backend.judge(request);
  if (!std::isfinite(judgment.w_yes) || !std::isfinite(judgment.w_no)) {
    throw Error(ErrorCode::kBackendMalformedResponse, "non-finite logits from backend");
  }
  return gate(page.key(), &page, judgment, cfg, "model");
}

}  // namespace nn
}  // namespace covenant
