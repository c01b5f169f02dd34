#include "memagent/config.hpp"

#include <cstdlib>
#include <fstream>
#include <initializer_list>

namespace memagent {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::string_view section, std::initializer_list<std::string_view> known) {
  if (!obj.is_object()) throw ConfigError("config section '" + std::string(section) + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config key '" + std::string(section) + "." + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& dst) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) dst = it->get<T>();
}

void read_path(const json& obj, const char* key, std::filesystem::path& dst) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) dst = it->get<std::string>();
}

EmbeddingKind embedding_kind(const std::string& s) {
  if (s == "hashed_bow") return EmbeddingKind::hashed_bow;
  if (s == "external") return EmbeddingKind::external;
  throw ConfigError("embedding.kind must be hashed_bow or external, got " + s);
}

CaptionProviderKind caption_kind(const std::string& s) {
  if (s == "deterministic_stub") return CaptionProviderKind::deterministic_stub;
  if (s == "scripted") return CaptionProviderKind::scripted;
  if (s == "external_service") return CaptionProviderKind::external_service;
  throw ConfigError("caption.kind must be deterministic_stub, scripted or external_service, got " + s);
}

ChatKind chat_kind(const std::string& s) {
  if (s == "none") return ChatKind::none;
  if (s == "external") return ChatKind::external;
  throw ConfigError("chat.kind must be none or external, got " + s);
}

std::string to_string(EmbeddingKind k) { return k == EmbeddingKind::external ? "external" : "hashed_bow"; }
std::string to_string(ChatKind k) { return k == ChatKind::external ? "external" : "none"; }
std::string to_string(CaptionProviderKind k) {
  switch (k) {
    case CaptionProviderKind::external_service: return "external_service";
    case CaptionProviderKind::scripted: return "scripted";
    case CaptionProviderKind::deterministic_stub: break;
  }
  return "deterministic_stub";
}

bool parse_bool(const std::string& name, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off" || v.empty()) return false;
  throw ConfigError(name + " must be a boolean, got '" + v + "'");
}

std::size_t parse_size(const std::string& name, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError(name + " must be a non-negative integer, got '" + v + "'");
  }
}

}  // namespace

bool AppConfig::uses_external_provider() const {
  return embedding.kind == EmbeddingKind::external || chat.kind == ChatKind::external ||
         caption.kind == CaptionProviderKind::external_service;
}

void AppConfig::validate() const {
  if (offline && uses_external_provider()) {
    throw ConfigError("offline mode cannot be combined with external providers");
  }
  chunker.validate();
  caption.validate();
  if (embedding.kind == EmbeddingKind::hashed_bow && embedding.dim == 0) throw ConfigError("embedding.dim must be > 0");
  if (embedding.kind == EmbeddingKind::external && embedding.endpoint.empty()) {
    throw ConfigError("external embedding provider requires an endpoint");
  }
  if (embedding.batch_size == 0) throw ConfigError("embedding.batch_size must be > 0");
  if (embedding.timeout_ms <= 0 || chat.timeout_ms <= 0) throw ConfigError("timeouts must be > 0");
  if (embedding.max_retries < 0 || chat.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (chat.kind == ChatKind::external && chat.endpoint.empty()) throw ConfigError("external chat requires an endpoint");
  if (retrieval.k == 0) throw ConfigError("retrieval.k must be >= 1");
  if (!(pipeline.rate_hz > 0)) throw ConfigError("pipeline.rate_hz must be > 0");
  if (!(pipeline.source_fps > 0)) throw ConfigError("pipeline.source_fps must be > 0");
  if (pipeline.workers == 0) throw ConfigError("pipeline.workers must be >= 1");
  if (server.port < 0 || server.port > 65535) throw ConfigError("server.port out of range");
}

AppConfig AppConfig::from_json(const json& j) {
  AppConfig c;
  try {
    reject_unknown_keys(j, "",
                        {"store_path", "offline", "embedding", "caption", "chat", "retrieval", "chunker", "pipeline",
                         "server"});
    read_path(j, "store_path", c.store_path);
    read(j, "offline", c.offline);
    if (j.contains("embedding")) {
      const auto& e = j["embedding"];
      reject_unknown_keys(e, "embedding",
                          {"kind", "dim", "seed", "endpoint", "batch_size", "timeout_ms", "max_retries"});
      if (e.contains("kind")) c.embedding.kind = embedding_kind(e["kind"].get<std::string>());
      // An external service announces its own dimension unless one is pinned.
      if (c.embedding.kind == EmbeddingKind::external) c.embedding.dim = 0;
      read(e, "dim", c.embedding.dim);
      read(e, "seed", c.embedding.seed);
      read(e, "endpoint", c.embedding.endpoint);
      read(e, "batch_size", c.embedding.batch_size);
      read(e, "timeout_ms", c.embedding.timeout_ms);
      read(e, "max_retries", c.embedding.max_retries);
    }
    if (j.contains("caption")) {
      const auto& e = j["caption"];
      reject_unknown_keys(e, "caption",
                          {"kind", "endpoint", "descriptor_prompt", "timeout_ms", "max_retries", "seed", "script_path"});
      if (e.contains("kind")) c.caption.kind = caption_kind(e["kind"].get<std::string>());
      read(e, "endpoint", c.caption.endpoint);
      read(e, "descriptor_prompt", c.caption.descriptor_prompt);
      read(e, "timeout_ms", c.caption.timeout_ms);
      read(e, "max_retries", c.caption.max_retries);
      read(e, "seed", c.caption.seed);
      read_path(e, "script_path", c.caption.script_path);
    }
    if (j.contains("chat")) {
      const auto& e = j["chat"];
      reject_unknown_keys(e, "chat", {"kind", "endpoint", "max_tokens", "temperature", "timeout_ms", "max_retries"});
      if (e.contains("kind")) c.chat.kind = chat_kind(e["kind"].get<std::string>());
      read(e, "endpoint", c.chat.endpoint);
      read(e, "max_tokens", c.chat.max_tokens);
      read(e, "temperature", c.chat.temperature);
      read(e, "timeout_ms", c.chat.timeout_ms);
      read(e, "max_retries", c.chat.max_retries);
    }
    if (j.contains("retrieval")) {
      const auto& e = j["retrieval"];
      reject_unknown_keys(e, "retrieval", {"k", "context_budget_tokens", "prompt_template"});
      read(e, "k", c.retrieval.k);
      read(e, "context_budget_tokens", c.retrieval.context_budget_tokens);
      read(e, "prompt_template", c.retrieval.prompt_template);
    }
    if (j.contains("chunker")) {
      const auto& e = j["chunker"];
      reject_unknown_keys(e, "chunker", {"chunk_size_tokens", "overlap_tokens", "min_chars"});
      read(e, "chunk_size_tokens", c.chunker.chunk_size_tokens);
      read(e, "overlap_tokens", c.chunker.overlap_tokens);
      read(e, "min_chars", c.chunker.min_chars);
    }
    if (j.contains("pipeline")) {
      const auto& e = j["pipeline"];
      reject_unknown_keys(e, "pipeline", {"rate_hz", "source_fps", "workers"});
      read(e, "rate_hz", c.pipeline.rate_hz);
      read(e, "source_fps", c.pipeline.source_fps);
      read(e, "workers", c.pipeline.workers);
    }
    if (j.contains("server")) {
      const auto& e = j["server"];
      reject_unknown_keys(e, "server", {"host", "port", "static_dir"});
      read(e, "host", c.server.host);
      read(e, "port", c.server.port);
      read_path(e, "static_dir", c.server.static_dir);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

json AppConfig::to_json() const {
  return {{"store_path", store_path.string()},
          {"offline", offline},
          {"embedding",
           {{"kind", to_string(embedding.kind)},
            {"dim", embedding.dim},
            {"seed", embedding.seed},
            {"endpoint", embedding.endpoint},
            {"batch_size", embedding.batch_size},
            {"timeout_ms", embedding.timeout_ms},
            {"max_retries", embedding.max_retries}}},
          {"caption",
           {{"kind", to_string(caption.kind)},
            {"endpoint", caption.endpoint},
            {"descriptor_prompt", caption.descriptor_prompt},
            {"timeout_ms", caption.timeout_ms},
            {"max_retries", caption.max_retries},
            {"seed", caption.seed},
            {"script_path", caption.script_path.string()}}},
          {"chat",
           {{"kind", to_string(chat.kind)},
            {"endpoint", chat.endpoint},
            {"max_tokens", chat.max_tokens},
            {"temperature", chat.temperature},
            {"timeout_ms", chat.timeout_ms},
            {"max_retries", chat.max_retries}}},
          {"retrieval",
           {{"k", retrieval.k},
            {"context_budget_tokens", retrieval.context_budget_tokens},
            {"prompt_template", retrieval.prompt_template}}},
          {"chunker",
           {{"chunk_size_tokens", chunker.chunk_size_tokens},
            {"overlap_tokens", chunker.overlap_tokens},
            {"min_chars", chunker.min_chars}}},
          {"pipeline",
           {{"rate_hz", pipeline.rate_hz}, {"source_fps", pipeline.source_fps}, {"workers", pipeline.workers}}},
          {"server", {{"host", server.host}, {"port", server.port}, {"static_dir", server.static_dir.string()}}}};
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

void apply_env_overrides(AppConfig& c, const EnvLookup& env) {
  auto get = [&](std::string_view suffix) { return env(std::string(kEnvPrefix) + std::string(suffix)); };
  if (auto v = get("STORE_PATH")) c.store_path = *v;
  if (auto v = get("OFFLINE")) c.offline = parse_bool("MEMAGENT_OFFLINE", *v);
  if (auto v = get("SERVER_HOST")) c.server.host = *v;
  if (auto v = get("SERVER_PORT")) c.server.port = static_cast<int>(parse_size("MEMAGENT_SERVER_PORT", *v));
  if (auto v = get("STATIC_DIR")) c.server.static_dir = *v;
  if (auto v = get("RETRIEVAL_K")) c.retrieval.k = parse_size("MEMAGENT_RETRIEVAL_K", *v);
  if (auto v = get("CONTEXT_BUDGET")) c.retrieval.context_budget_tokens = parse_size("MEMAGENT_CONTEXT_BUDGET", *v);
  if (auto v = get("WORKERS")) c.pipeline.workers = parse_size("MEMAGENT_WORKERS", *v);
  if (auto v = get("EMBEDDING_ENDPOINT")) {
    c.embedding.endpoint = *v;
    if (c.embedding.kind != EmbeddingKind::external) c.embedding.dim = 0;
    c.embedding.kind = EmbeddingKind::external;
  }
  if (auto v = get("CAPTION_ENDPOINT")) {
    c.caption.endpoint = *v;
    c.caption.kind = CaptionProviderKind::external_service;
  }
  if (auto v = get("CHAT_ENDPOINT")) {
    c.chat.endpoint = *v;
    c.chat.kind = ChatKind::external;
  }
}

AppConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env) {
  AppConfig config;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + path->string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path->string());
    config = AppConfig::from_json(j);
  }
  apply_env_overrides(config, env);
  return config;
}

}  // namespace memagent
