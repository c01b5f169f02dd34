#include "memagent/http_api.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "memagent/text.hpp"

namespace memagent {
namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view error, std::string_view detail,
                std::string_view hint) {
  send_json(res, status, {{"error", error}, {"detail", detail}, {"hint", hint}});
}

CaptionRecord caption_from_json(const json& j) {
  CaptionRecord r;
  r.video_id = j.at("video_id").get<std::string>();
  r.frame_index = j.at("frame_index").get<std::uint64_t>();
  r.timestamp_s = j.value("timestamp_s", static_cast<double>(r.frame_index) / kDefaultSampleRateHz);
  r.text = j.at("text").get<std::string>();
  r.encoder_id = j.value("encoder_id", std::string("http"));
  return r;
}

}  // namespace

HttpApi::HttpApi(MemoryService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;

  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); });

  srv.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, stats_to_json(service_.stats()));
  });

  srv.Post("/ask", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (!body.is_object()) {
      return send_error(res, 400, "bad_request", "request body is not a JSON object",
                        "send {\"question\": \"...\", \"k\": 4}");
    }
    MemoryQuery query;
    query.k = 0;
    try {
      query.question = body.value("question", std::string());
      if (body.contains("k") && !body["k"].is_null()) {
        if (!body["k"].is_number_integer() || body["k"].get<long long>() < 1) {
          return send_error(res, 400, "validation_error", "k must be a positive integer", "omit k to use the default");
        }
        query.k = body["k"].get<std::size_t>();
      }
      if (body.contains("video_id") && !body["video_id"].is_null()) {
        query.filter.video_id = body["video_id"].get<std::string>();
      }
    } catch (const json::exception& e) {
      return send_error(res, 400, "bad_request", e.what(), "question and video_id must be strings");
    }
    if (trim(query.question).empty()) {
      return send_error(res, 400, "validation_error", "question must be non-empty", "type a question");
    }
    try {
      send_json(res, 200, answer_to_json(service_.ask(query)));
    } catch (const ArgumentError& e) {
      send_error(res, 400, "validation_error", e.what(), "check the request fields");
    } catch (const ProviderError& e) {
      send_error(res, 502, "provider_error", e.what(), "the embedding provider failed; retry later");
    }
  });

  srv.Post("/ingest/captions", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("captions") || !body["captions"].is_array()) {
      return send_error(res, 400, "bad_request", "body must be {\"captions\": [...]}",
                        "each caption needs video_id, frame_index and text");
    }
    std::vector<CaptionRecord> captions;
    try {
      for (const auto& c : body["captions"]) captions.push_back(caption_from_json(c));
    } catch (const json::exception& e) {
      return send_error(res, 400, "bad_request", e.what(), "each caption needs video_id, frame_index and text");
    }
    const bool flush = body.value("flush", true);
    try {
      send_json(res, 200, summary_to_json(service_.ingest_captions(captions, flush)));
    } catch (const ArgumentError& e) {
      send_error(res, 400, "validation_error", e.what(), "captions must be non-empty and newer than stored ones");
    } catch (const Error& e) {
      send_error(res, 500, "ingest_failed", e.what(), "see server log");
    }
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string detail = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      detail = e.what();
    } catch (...) {
    }
    send_error(res, 500, "internal_error", detail, "see server log");
  });

  const auto& static_dir = service_.config().server.static_dir;
  if (!static_dir.empty()) {
    if (!srv.set_mount_point("/", static_dir.string())) {
      spdlog::warn("console directory {} not found; static serving disabled", static_dir.string());
    }
  }
}

HttpApi::~HttpApi() { stop(); }

int HttpApi::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpApi::listen() { server_->listen_after_bind(); }

void HttpApi::wait_until_ready() const { server_->wait_until_ready(); }

void HttpApi::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

}  // namespace memagent
