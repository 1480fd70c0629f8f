#pragma once

// Remote inference server speaking the JSON wire contract:
//   POST <path>  {"prompt": "..."}  ->  {"w_yes": f, "w_no": f, "quote": "..."}

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "covenant/error.hpp"
#include "covenant/nndetect.hpp"

namespace covenant {
namespace nn {

class HttpBackend final : public ModelBackend {
 public:
  HttpBackend(std::string host, int port, std::string path = "/v1/judge", int timeout_seconds = 60)
      : host_(std::move(host)), port_(port), path_(std::move(path)), timeout_seconds_(timeout_seconds) {}

  ModelJudgment judge(const InferenceRequest& request) const override {
    // httplib clients are not safe to share across threads; one per call.
    httplib::Client client(host_, port_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    const nlohmann::json body = {{"prompt", request.prompt}};
    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::kBackendUnavailable, "inference request failed: " + httplib::to_string(res.error()));
    }
    if (res->status >= 500 || res->status == 429) {
      throw Error(ErrorCode::kBackendUnavailable, "inference server returned " + std::to_string(res->status));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::kBackendMalformedResponse, "inference server returned " + std::to_string(res->status));
    }
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
      throw Error(ErrorCode::kBackendMalformedResponse, "response is not a JSON object");
    }
    return judgment_from_json(parsed);
  }

 private:
  std::string host_;
  int port_;
  std::string path_;
  int timeout_seconds_;
};

}  // namespace nn
}  // namespace covenant
