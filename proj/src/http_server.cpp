/* Copyright 2026 The Wildscan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Eigen (via service.hpp) must come first: httplib pulls in <resolv.h>,
// whose _res macro collides with Eigen parameter names.
#include "wildscan/service.hpp"

#include <httplib.h>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  ordered_json body;
  body["error"] = message;
  send_json(res, status, body);
}

// Maps library errors onto HTTP status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const DecodeError& e) {
    send_error(res, 400, e.what());
  } catch (const NotFoundError& e) {
    send_error(res, 404, e.what());
  } catch (const ConflictError& e) {
    send_error(res, 409, e.what());
  } catch (const UnavailableError& e) {
    send_error(res, 503, e.what());
  } catch (const ValidationError& e) {
    send_error(res, e.field() == "payload" ? 413 : 400, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

std::string media_type(const httplib::Request& req) {
  std::string type = req.get_header_value("Content-Type");
  if (const auto semi = type.find(';'); semi != std::string::npos) type.resize(semi);
  while (!type.empty() && type.back() == ' ') type.pop_back();
  return type;
}

}  // namespace

struct HttpServer::Impl {
  InferenceService& service;
  httplib::Server server;

  explicit Impl(InferenceService& s) : service(s) {
    server.set_payload_max_length(service.config().max_payload_bytes);
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });

    server.Post("/v1/predict", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string type = media_type(req);
      if (type != "image/jpeg" && type != "image/png") {
        send_error(res, 415, "content type must be image/jpeg or image/png");
        return;
      }
      guarded(res, [&] {
        const auto* bytes = reinterpret_cast<const std::uint8_t*>(req.body.data());
        const auto response = service.predict({bytes, req.body.size()});
        send_json(res, 200, prediction_to_json(response, service.config().class_names));
      });
    });

    server.Post("/v1/feedback", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        json body;
        try {
          body = json::parse(req.body);
        } catch (const json::exception& e) {
          throw ValidationError("body", std::nullopt, e.what());
        }
        if (!body.is_object()) throw ValidationError("body", std::nullopt, "expected an object");
        const FeedbackRecord parsed = feedback_from_json(body);
        const FeedbackRecord stored =
            service.submit_feedback(parsed.request_id, parsed.verdict, parsed.asserted_class);
        send_json(res, 201, feedback_to_json(stored));
      });
    });

    server.Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, stats_to_json(service.stats())); });
    });

    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      const auto version = service.model_version();
      ordered_json body;
      body["status"] = version ? "ok" : "no_model";
      body["model_version"] = version ? ordered_json(*version) : ordered_json(nullptr);
      send_json(res, 200, body);
    });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const std::string message = res.status == 413   ? "payload too large"
                                  : res.status == 404 ? "not found"
                                                      : "request failed";
      send_error(res, res.status, message);
    });
  }
};

HttpServer::HttpServer(InferenceService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int HttpServer::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool HttpServer::serve() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace wildscan
