#include "memagent/http_client.hpp"

#include <openssl/evp.h>

#include <httplib.h>

namespace memagent {
namespace {

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(const std::string& endpoint) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint must be an http:// URL: " + endpoint);
    if (endpoint.compare(0, scheme, "http") != 0) {
      throw ConfigError("only plain http endpoints are supported: " + endpoint);
    }
    const auto slash = endpoint.find('/', scheme + 3);
    base_ = endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : endpoint.substr(slash);
  }

  HttpResponse post_json(const std::string& json_body, std::chrono::milliseconds timeout) override {
    // httplib::Client is not safe to share across threads; one per request.
    httplib::Client client(base_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(path_, json_body, "application/json");
    if (!res) {
      throw ProviderError("POST " + base_ + path_ + ": " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw ProviderError("POST " + base_ + path_ + ": HTTP " + std::to_string(res->status));
    }
    return {res->status, res->body};
  }

  bool reachable(std::chrono::milliseconds timeout) override {
    httplib::Client client(base_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    return static_cast<bool>(client.Get("/health"));
  }

 private:
  std::string base_;
  std::string path_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(const std::string& endpoint) {
  return std::make_shared<HttplibTransport>(endpoint);
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace memagent
