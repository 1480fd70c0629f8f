#pragma once

// Resource-cost calculator for manual review, per-token API pricing and a
// self-hosted model. Money is carried in integer cents.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covenant/error.hpp"

namespace covenant {
namespace cost {

struct Cents {
  std::int64_t value = 0;

  static Cents from_dollars(double dollars) { return {static_cast<std::int64_t>(std::llround(dollars * 100.0))}; }
  double dollars() const { return static_cast<double>(value) / 100.0; }
  friend auto operator<=>(const Cents&, const Cents&) = default;
};

// Hours in a year of continuous time (365.25 days).
inline constexpr double kHoursPerYear = 8766.0;

struct CostScenario {
  std::optional<std::int64_t> pages;
  std::optional<double> pages_per_hour;
  std::optional<Cents> hourly_wage;
  std::optional<std::int64_t> tokens_per_page;
  std::optional<Cents> price_per_million_tokens;
  std::optional<double> requests_per_minute;
  std::optional<double> pages_per_day;
  std::optional<Cents> compute_cost_total;
};

enum class TimeUnit { kHours, kDays, kYears };

struct CostEstimate {
  std::string method;
  double hours = 0.0;
  TimeUnit unit = TimeUnit::kHours;
  double elapsed = 0.0;  // in `unit`
  Cents cost;

  std::string elapsed_text() const {
    const char* name = unit == TimeUnit::kHours ? "hours" : unit == TimeUnit::kDays ? "days" : "years";
    char buf[64];
    if (elapsed == std::floor(elapsed)) {
      std::snprintf(buf, sizeof buf, "%.0f %s", elapsed, name);
    } else {
      std::snprintf(buf, sizeof buf, "%.2f %s", elapsed, name);
    }
    return buf;
  }
};

namespace detail {

template <typename T>
T require(const std::optional<T>& v, const char* field) {
  if (!v) throw Error(ErrorCode::kMissingField, std::string("scenario needs ") + field);
  return *v;
}

template <typename T>
T require_positive(const std::optional<T>& v, const char* field) {
  const T x = require(v, field);
  if (!(x > T{})) throw Error(ErrorCode::kMissingField, std::string(field) + " must be positive");
  return x;
}

inline Cents require_money(const std::optional<Cents>& v, const char* field) {
  const Cents c = require(v, field);
  if (c.value < 0) throw Error(ErrorCode::kMissingField, std::string(field) + " must be non-negative");
  return c;
}

// Round-half-up integer division for non-negative operands.
inline std::int64_t div_round(std::int64_t num, std::int64_t den) { return (num + den / 2) / den; }

}  // namespace detail

// hours = pages / rate; cost = hours * wage; elapsed in continuous years.
inline CostEstimate manual_cost(const CostScenario& s, std::string method = "Manual Review") {
  const auto pages = detail::require_positive(s.pages, "pages");
  const double rate = detail::require_positive(s.pages_per_hour, "pages_per_hour");
  const Cents wage = detail::require_money(s.hourly_wage, "hourly_wage");
  CostEstimate e;
  e.method = std::move(method);
  e.hours = static_cast<double>(pages) / rate;
  e.cost = {static_cast<std::int64_t>(
      std::llround(static_cast<long double>(pages) * static_cast<long double>(wage.value) / rate))};
  e.unit = TimeUnit::kYears;
  e.elapsed = e.hours / kHoursPerYear;
  if (e.hours < kHoursPerYear) {
    e.unit = TimeUnit::kHours;
    e.elapsed = e.hours;
  }
  return e;
}

// cost = pages * tokens/page * price per 1e6 tokens; elapsed from request rate.
inline CostEstimate api_cost(const CostScenario& s, std::string method = "Off-the-Shelf LM") {
  const auto pages = detail::require_positive(s.pages, "pages");
  const auto tokens = detail::require_positive(s.tokens_per_page, "tokens_per_page");
  const Cents price = detail::require_money(s.price_per_million_tokens, "price_per_million_tokens");
  const double rpm = detail::require_positive(s.requests_per_minute, "requests_per_minute");
  CostEstimate e;
  e.method = std::move(method);
  e.cost = {detail::div_round(pages * tokens * price.value, 1'000'000)};
  e.hours = static_cast<double>(pages) / rpm / 60.0;
  e.unit = TimeUnit::kDays;
  e.elapsed = e.hours / 24.0;
  return e;
}

// Whole days at the stated throughput; fixed compute bill.
inline CostEstimate selfhosted_cost(const CostScenario& s, std::string method = "Custom LM") {
  const auto pages = detail::require_positive(s.pages, "pages");
  const double per_day = detail::require_positive(s.pages_per_day, "pages_per_day");
  const Cents total = detail::require_money(s.compute_cost_total, "compute_cost_total");
  CostEstimate e;
  e.method = std::move(method);
  e.unit = TimeUnit::kDays;
  e.elapsed = std::ceil(static_cast<double>(pages) / per_day);
  e.hours = e.elapsed * 24.0;
  e.cost = total;
  return e;
}

inline std::string format_dollars(Cents c) {
  const std::int64_t whole = (c.value + 50) / 100;
  std::string digits = std::to_string(whole);
  std::string out;
  const int n = static_cast<int>(digits.size());
  for (int i = 0; i < n; ++i) {
    out.push_back(digits[i]);
    if ((n - i - 1) % 3 == 0 && i != n - 1) out.push_back(',');
  }
  return "$" + out;
}

inline std::string render_table(const std::vector<CostEstimate>& estimates) {
  std::size_t w_method = 6, w_time = 4;
  for (const auto& e : estimates) {
    w_method = std::max(w_method, e.method.size());
    w_time = std::max(w_time, e.elapsed_text().size());
  }
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %-*s  %s\n", static_cast<int>(w_method), "Method", static_cast<int>(w_time),
                "Time", "Cost");
  out += line;
  for (const auto& e : estimates) {
    std::snprintf(line, sizeof line, "%-*s  %-*s  %s\n", static_cast<int>(w_method), e.method.c_str(),
                  static_cast<int>(w_time), e.elapsed_text().c_str(), format_dollars(e.cost).c_str());
    out += line;
  }
  return out;
}

inline nlohmann::json to_json(const CostEstimate& e) {
  return {{"method", e.method},          {"hours", e.hours},
          {"elapsed", e.elapsed},        {"elapsed_text", e.elapsed_text()},
          {"cost_cents", e.cost.value},  {"cost_dollars", e.cost.dollars()}};
}

// Inputs behind the published comparison for the 5.2M-page archive.
struct ReferenceInputs {
  std::int64_t pages = 5'200'000;
  double pages_per_hour = 60.0;
  Cents hourly_wage{1600};
  std::int64_t zero_shot_tokens_per_page = 922;
  // Few-shot tokens/page is not published; 2,622 reproduces the $13,634 figure.
  std::int64_t few_shot_tokens_per_page = 2622;
  Cents gpt35_price{100};
  Cents gpt4_price{1000};
  double requests_per_minute = 1000.0;
  double pages_per_day = 1'000'000.0;
  Cents compute_cost_total{25800};
};

inline std::vector<CostEstimate> reference_table(const ReferenceInputs& in = {}) {
  CostScenario manual;
  manual.pages = in.pages;
  manual.pages_per_hour = in.pages_per_hour;
  manual.hourly_wage = in.hourly_wage;

  CostScenario gpt35;
  gpt35.pages = in.pages;
  gpt35.tokens_per_page = in.few_shot_tokens_per_page;
  gpt35.price_per_million_tokens = in.gpt35_price;
  gpt35.requests_per_minute = in.requests_per_minute;

  CostScenario gpt4 = gpt35;
  gpt4.tokens_per_page = in.zero_shot_tokens_per_page;
  gpt4.price_per_million_tokens = in.gpt4_price;

  CostScenario hosted;
  hosted.pages = in.pages;
  hosted.pages_per_day = in.pages_per_day;
  hosted.compute_cost_total = in.compute_cost_total;

  return {manual_cost(manual, "Manual Review (One Staff Member)"),
          api_cost(gpt35, "Off-the-Shelf LM (GPT-3.5, few-shot)"),
          api_cost(gpt4, "Off-the-Shelf LM (GPT-4 Turbo)"),
          selfhosted_cost(hosted, "Custom LM (Finetuned Mistral)")};
}

}  // namespace cost
}  // namespace covenant
