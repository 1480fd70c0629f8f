#pragma once

// JSON-over-HTTP front end for ReviewService.

#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "covenant/reviewsvc.hpp"

namespace covenant {
namespace review {

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kEmptyRange:
      return 404;
    case ErrorCode::kRevisionConflict:
    case ErrorCode::kAlreadyDecided:
      return 409;
    case ErrorCode::kStoreUnavailable:
    case ErrorCode::kIo:
      return 503;
    default:
      return 400;
  }
}

inline json error_body(const Error& e) { return {{"error", std::string(to_string(e.code()))}, {"message", e.what()}}; }

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_json(res, http_status(e.code()), error_body(e));
  } catch (const json::exception& e) {
    send_json(res, 400, {{"error", "BadRequest"}, {"message", e.what()}});
  }
}

inline std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

}  // namespace detail

// Routes:
//   POST /items                     {detection, span_match, page} -> item
//   GET  /items?status=             {"items": [...]}
//   GET  /items/next?order=         {"item": item | null}
//   GET  /items/{id}                item
//   POST /items/{id}/decision       {revision, verdict, corrected_span?}, X-Reviewer-Id, X-Reviewer-Role
//   GET  /stats
//   GET  /export?from=&to=
//   GET  /pages/{doc_id}/{page_no}  {"page": ..., "items": [...]}
inline void mount(httplib::Server& server, ReviewService& svc) {
  using detail::guarded;
  using detail::send_json;

  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type, X-Reviewer-Id, X-Reviewer-Role"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/items", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      const PageRecord page = body.at("page").get<PageRecord>();
      nn::Detection det;
      const json& d = body.at("detection");
      det.key = {d.at("doc_id").get<std::string>(), d.at("page_no").get<int>()};
      det.flagged = d.at("flagged").get<bool>();
      det.confidence = d.at("confidence").get<double>();
      det.quote = d.value("quote", std::string());
      det.detector = d.value("detector", std::string());
      span::SpanMatch m;
      const json& s = body.at("span_match");
      m.char_start = s.at("char_start").get<std::size_t>();
      m.char_end = s.at("char_end").get<std::size_t>();
      m.similarity = s.value("similarity", 0.0);
      if (s.contains("bbox") && !s.at("bbox").is_null()) m.bbox = s.at("bbox").get<BoundingBox>();
      send_json(res, 201, to_json(svc.enqueue(det, m, page)));
    });
  });

  server.Get("/items", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<Status> status;
      if (auto s = detail::param(req, "status")) status = status_from_string(*s);
      json items = json::array();
      for (const auto& it : svc.list(status)) items.push_back(to_json(it));
      send_json(res, 200, {{"items", items}});
    });
  });

  server.Get("/items/next", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Order order = order_from_string(detail::param(req, "order").value_or("confidence-desc"));
      const auto item = svc.next_pending(req.get_header_value("X-Reviewer-Id"), order);
      send_json(res, 200, {{"item", item ? to_json(*item) : json(nullptr)}});
    });
  });

  server.Get(R"(/items/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto item = svc.get(req.matches[1]);
      if (!item) throw Error(ErrorCode::kNotFound, "no item " + std::string(req.matches[1]));
      send_json(res, 200, to_json(*item));
    });
  });

  server.Post(R"(/items/([^/]+)/decision)", [&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    try {
      const std::string reviewer = req.get_header_value("X-Reviewer-Id");
      if (reviewer.empty()) throw Error(ErrorCode::kInvalidArgument, "X-Reviewer-Id header is required");
      const std::string role = req.get_header_value("X-Reviewer-Role");
      const json body = json::parse(req.body);
      std::optional<span::Span> corrected;
      if (body.contains("corrected_span") && !body.at("corrected_span").is_null()) {
        corrected = span_from_json(body.at("corrected_span"));
      }
      const ReviewItem item = svc.decide(id, body.at("revision").get<std::int64_t>(),
                                         verdict_from_string(body.at("verdict").get<std::string>()),
                                         {reviewer, role.empty() ? Role::kRecorder : role_from_string(role)}, corrected);
      send_json(res, 200, to_json(item));
    } catch (const Error& e) {
      json body = detail::error_body(e);
      // Conflicts carry the current item so the client can refresh.
      if (auto current = svc.get(id)) {
        body["item"] = to_json(*current);
        body["revision"] = current->revision;
      }
      send_json(res, detail::http_status(e.code()), body);
    } catch (const json::exception& e) {
      send_json(res, 400, {{"error", "BadRequest"}, {"message", e.what()}});
    }
  });

  server.Get("/stats", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(svc.stats())); });
  });

  server.Get("/export", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      ExportFilter filter{detail::param(req, "from"), detail::param(req, "to")};
      res.status = 200;
      res.set_content(svc.export_packet(filter), "application/json");
    });
  });

  server.Get(R"(/pages/([^/]+)/(\d+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const PageKey key{req.matches[1], std::stoi(req.matches[2])};
      const PageRecord* page = svc.page(key);
      if (!page) throw Error(ErrorCode::kNotFound, "no page " + key.str());
      json items = json::array();
      for (const auto& it : svc.items_for_page(key)) items.push_back(to_json(it));
      send_json(res, 200, {{"page", *page}, {"items", items}});
    });
  });
}

}  // namespace review
}  // namespace covenant
