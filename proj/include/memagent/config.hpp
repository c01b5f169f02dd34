#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "memagent/capture.hpp"
#include "memagent/chunker.hpp"
#include "memagent/qa_agent.hpp"

namespace memagent {

enum class EmbeddingKind { hashed_bow, external };

struct EmbeddingConfig {
  EmbeddingKind kind = EmbeddingKind::hashed_bow;
  std::size_t dim = 256;  // hashed_bow dimension; for external, the expected dimension (0 = learn it)
  std::uint64_t seed = 0;
  std::string endpoint;
  std::size_t batch_size = 64;
  int timeout_ms = 30000;
  int max_retries = 2;
};

enum class ChatKind { none, external };

struct ChatConfig {
  ChatKind kind = ChatKind::none;
  std::string endpoint;
  int max_tokens = 256;
  double temperature = 0.0;
  int timeout_ms = 60000;
  int max_retries = 1;
};

struct RetrievalConfig {
  std::size_t k = kDefaultTopK;
  std::size_t context_budget_tokens = kDefaultContextBudgetTokens;
  std::string prompt_template{kDefaultPromptTemplate};
};

struct PipelineConfig {
  double rate_hz = kDefaultSampleRateHz;
  double source_fps = 30.0;
  std::size_t workers = 4;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path static_dir;  // console bundle; not served when empty
};

// Loaded from JSON (all keys optional), then MEMAGENT_* environment
// variables, then command-line flags. Offline mode forbids every external
// provider.
struct AppConfig {
  std::filesystem::path store_path = "memory.store";  // empty = in-memory only
  bool offline = false;
  EmbeddingConfig embedding;
  CaptionProviderConfig caption;
  ChatConfig chat;
  RetrievalConfig retrieval;
  ChunkerConfig chunker;
  PipelineConfig pipeline;
  ServerConfig server;

  // Throws ConfigError.
  void validate() const;
  bool uses_external_provider() const;

  static AppConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

inline constexpr std::string_view kEnvPrefix = "MEMAGENT_";

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
EnvLookup process_env();

// Recognized: MEMAGENT_STORE_PATH, MEMAGENT_OFFLINE, MEMAGENT_SERVER_HOST,
// MEMAGENT_SERVER_PORT, MEMAGENT_STATIC_DIR, MEMAGENT_RETRIEVAL_K,
// MEMAGENT_CONTEXT_BUDGET, MEMAGENT_WORKERS, MEMAGENT_EMBEDDING_ENDPOINT,
// MEMAGENT_CAPTION_ENDPOINT, MEMAGENT_CHAT_ENDPOINT. An endpoint variable also
// switches that provider to its external kind.
void apply_env_overrides(AppConfig& config, const EnvLookup& env);

// Reads `path` when given (ConfigError if unreadable or malformed), then applies env.
AppConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env = process_env());

}  // namespace memagent
