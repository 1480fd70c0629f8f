#pragma once

// Page-level detector evaluation: confusion counts, precision/recall/F1 with
// Wilson score intervals, span-level BLEU and threshold sweeps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covenant/corpus.hpp"
#include "covenant/csv.hpp"
#include "covenant/error.hpp"
#include "covenant/nndetect.hpp"
#include "covenant/text.hpp"

namespace covenant {
namespace eval {

struct LabeledPage {
  PageKey key;
  bool gold_label = false;
  std::optional<std::string> gold_span;
};

struct PagePrediction {
  PageKey key;
  bool flagged = false;
  std::string quote;
};

inline PagePrediction from_detection(const nn::Detection& d) { return {d.key, d.flagged, d.quote}; }

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct MetricReport {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<Interval> precision_ci;
  std::optional<Interval> recall_ci;
  std::optional<double> mean_bleu;
};

// Wilson score interval for k successes in n trials, clamped to [0,1].
inline Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.96) {
  if (n == 0 || k > n) {
    throw Error(ErrorCode::kInvalidCounts, "wilson interval needs 0 <= k <= n and n >= 1 (k=" + std::to_string(k) +
                                               ", n=" + std::to_string(n) + ")");
  }
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double center = p + z2 / (2.0 * nn);
  const double margin = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  const double denom = 1.0 + z2 / nn;
  Interval ci{(center - margin) / denom, (center + margin) / denom};
  ci.low = std::clamp(ci.low, 0.0, 1.0);
  ci.high = std::clamp(ci.high, 0.0, 1.0);
  // Keep the point estimate inside the interval despite rounding at k=0, k=n.
  ci.low = std::min(ci.low, p);
  ci.high = std::max(ci.high, p);
  return ci;
}

inline std::vector<std::string> bleu_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in(text::normalize(s));
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// Sentence BLEU without smoothing: geometric mean of clipped n-gram
// precisions for n = 1..max_n times the brevity penalty. Zero as soon as
// any order has no match.
inline double bleu(std::string_view candidate, std::string_view reference, std::size_t max_n = 4) {
  const auto ref = bleu_tokens(reference);
  if (ref.empty()) throw Error(ErrorCode::kEmptyReference, "BLEU reference is empty");
  const auto cand = bleu_tokens(candidate);
  if (cand.empty() || max_n == 0) return 0.0;

  using Gram = std::vector<std::string>;
  const auto count_grams = [](const std::vector<std::string>& toks, std::size_t n) {
    std::map<Gram, std::size_t> counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[Gram(toks.begin() + i, toks.begin() + i + n)];
    return counts;
  };

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    if (cand.size() < n) return 0.0;
    const auto c = count_grams(cand, n);
    const auto r = count_grams(ref, n);
    std::size_t clipped = 0;
    for (const auto& [gram, count] : c) {
      if (auto it = r.find(gram); it != r.end()) clipped += std::min(count, it->second);
    }
    if (clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(cand.size() - n + 1));
  }
  const double c_len = static_cast<double>(cand.size());
  const double r_len = static_cast<double>(ref.size());
  const double bp = c_len > r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

inline MetricReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  MetricReport m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  if (tp + fp > 0) {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.precision_ci = wilson_interval(tp, tp + fp);
  }
  if (tp + fn > 0) {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.recall_ci = wilson_interval(tp, tp + fn);
  }
  if (m.precision && m.recall) {
    const double sum = *m.precision + *m.recall;
    m.f1 = sum == 0.0 ? 0.0 : 2.0 * *m.precision * *m.recall / sum;
  }
  return m;
}

// Every gold page needs exactly one prediction and vice versa.
inline MetricReport page_metrics(const std::vector<PagePrediction>& predictions, const std::vector<LabeledPage>& gold) {
  std::map<PageKey, const PagePrediction*> by_key;
  for (const auto& p : predictions) {
    if (!by_key.emplace(p.key, &p).second) throw Error(ErrorCode::kKeyMismatch, "duplicate prediction for " + p.key.str());
  }
  if (by_key.size() != gold.size()) {
    throw Error(ErrorCode::kKeyMismatch, std::to_string(predictions.size()) + " predictions for " +
                                             std::to_string(gold.size()) + " gold pages");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double bleu_sum = 0.0;
  std::size_t bleu_count = 0;
  for (const auto& g : gold) {
    auto it = by_key.find(g.key);
    if (it == by_key.end()) throw Error(ErrorCode::kKeyMismatch, "no prediction for " + g.key.str());
    const PagePrediction& p = *it->second;
    if (g.gold_label && p.flagged) {
      ++tp;
      if (g.gold_span && !bleu_tokens(*g.gold_span).empty()) {
        bleu_sum += bleu(p.quote, *g.gold_span);
        ++bleu_count;
      }
    } else if (!g.gold_label && p.flagged) {
      ++fp;
    } else if (g.gold_label) {
      ++fn;
    } else {
      ++tn;
    }
  }
  MetricReport m = metrics_from_counts(tp, fp, fn, tn);
  if (bleu_count > 0) m.mean_bleu = bleu_sum / static_cast<double>(bleu_count);
  return m;
}

struct ScoredPage {
  PageKey key;
  double confidence = 0.0;
  std::string quote;
};

// One report per threshold; a page is flagged when confidence >= threshold.
inline std::vector<std::pair<double, MetricReport>> threshold_sweep(const std::vector<ScoredPage>& scored,
                                                                    const std::vector<LabeledPage>& gold,
                                                                    const std::vector<double>& grid) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw Error(ErrorCode::kInvalidArgument, "threshold grid must be ascending");
  std::vector<std::pair<double, MetricReport>> out;
  out.reserve(grid.size());
  std::vector<PagePrediction> preds(scored.size());
  for (double t : grid) {
    for (std::size_t i = 0; i < scored.size(); ++i) {
      preds[i] = {scored[i].key, scored[i].confidence >= t, scored[i].quote};
    }
    out.emplace_back(t, page_metrics(preds, gold));
  }
  return out;
}

// Highest F1 on the sweep; the lowest threshold wins ties. nullopt if no
// threshold has a defined F1.
inline std::optional<double> best_f1_threshold(const std::vector<std::pair<double, MetricReport>>& sweep) {
  std::optional<double> best;
  double best_f1 = -1.0;
  for (const auto& [t, m] : sweep) {
    if (m.f1 && *m.f1 > best_f1) {
      best_f1 = *m.f1;
      best = t;
    }
  }
  return best;
}

inline nlohmann::json to_json(const MetricReport& m) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  auto ci = [](const std::optional<Interval>& v) {
    return v ? nlohmann::json::array({v->low, v->high}) : nlohmann::json(nullptr);
  };
  return {{"tp", m.tp},
          {"fp", m.fp},
          {"fn", m.fn},
          {"tn", m.tn},
          {"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"f1", opt(m.f1)},
          {"precision_ci", ci(m.precision_ci)},
          {"recall_ci", ci(m.recall_ci)},
          {"mean_bleu", opt(m.mean_bleu)}};
}

// Fixed-width table: Model | Precision (CI) | Recall (CI) | F1 | BLEU.
inline std::string render_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  const auto point_ci = [](const std::optional<double>& v, const std::optional<Interval>& ci) -> std::string {
    if (!v) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f (%.3f, %.3f)", *v, ci ? ci->low : *v, ci ? ci->high : *v);
    return buf;
  };
  const auto point = [](const std::optional<double>& v) -> std::string {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
  };
  std::size_t name_width = 5;
  for (const auto& [name, m] : rows) name_width = std::max(name_width, name.size());
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %-22s  %-22s  %-5s  %-5s\n", static_cast<int>(name_width), "Model",
                "Precision", "Recall", "F1", "BLEU");
  out += line;
  for (const auto& [name, m] : rows) {
    std::snprintf(line, sizeof line, "%-*s  %-22s  %-22s  %-5s  %-5s\n", static_cast<int>(name_width), name.c_str(),
                  point_ci(m.precision, m.precision_ci).c_str(), point_ci(m.recall, m.recall_ci).c_str(),
                  point(m.f1).c_str(), point(m.mean_bleu).c_str());
    out += line;
  }
  return out;
}

inline bool parse_bool(std::string_view s) {
  const std::string v = text::to_lower_utf8(s);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw Error(ErrorCode::kParse, "bad boolean '" + std::string(s) + "'");
}

// Header: doc_id,page_no,gold_label,gold_span
inline std::vector<LabeledPage> parse_gold_csv(std::istream& in) {
  const auto table = csv::Table::parse(in, {"doc_id", "page_no", "gold_label"});
  std::vector<LabeledPage> out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::string where = "gold CSV line " + std::to_string(table.line(r)) + ": ";
    LabeledPage p;
    p.key.doc_id = table.get(r, "doc_id");
    try {
      std::size_t used = 0;
      p.key.page_no = std::stoi(table.get(r, "page_no"), &used);
      if (used != table.get(r, "page_no").size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, where + "bad page_no");
    }
    try {
      p.gold_label = parse_bool(table.get(r, "gold_label"));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    }
    const std::string& spanv = table.get(r, "gold_span");
    if (!spanv.empty()) {
      if (!p.gold_label) throw Error(ErrorCode::kParse, where + "negative page carries a gold span");
      p.gold_span = spanv;
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<LabeledPage> load_gold_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open gold labels " + path);
  return parse_gold_csv(in);
}

}  // namespace eval
}  // namespace covenant
