#pragma once

#include <memory>
#include <string>

#include "memagent/service.hpp"

namespace httplib {
class Server;
}

namespace memagent {

// JSON API over a MemoryService:
//   POST /ingest/captions  {captions:[{video_id, frame_index, timestamp_s?, text}], flush?}
//   POST /ask              {question, k?, video_id?} -> {answer, sources[], provider_id, fallback_used, warning?}
//   GET  /stats, GET /health
// plus static files from server.static_dir. Errors use {error, detail, hint}.
class HttpApi {
 public:
  explicit HttpApi(MemoryService& service);
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port or throws ConfigError.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  // For callers running listen() on another thread.
  void wait_until_ready() const;
  void stop();

 private:
  MemoryService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace memagent
