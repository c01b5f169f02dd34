#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "memagent/embedding.hpp"
#include "memagent/http_client.hpp"
#include "memagent/vector_store.hpp"

namespace memagent {

inline constexpr std::size_t kDefaultTopK = 4;
inline constexpr std::size_t kDefaultContextBudgetTokens = 4096;
inline constexpr std::string_view kNoMemoryAnswer = "no memory available";
inline constexpr std::string_view kNoContextSentinel = "(no observations were retrieved for this question)";
inline constexpr std::string_view kDefaultPromptTemplate =
    "You are a memory assistant. Using only the following first-person observations, answer the question "
    "concisely.\n{context}\nQuestion: {question}\nAnswer:";

inline constexpr std::string_view kExtractiveProviderId = "extractive";
inline constexpr std::string_view kFallbackProviderId = "extractive-fallback";

struct MemoryQuery {
  std::string question;
  std::size_t k = kDefaultTopK;
  MetadataFilter filter;

  // Throws ArgumentError on an empty question or k == 0.
  void validate() const;
};

struct RetrievedContext {
  std::vector<QueryHit> hits;  // score descending
  std::size_t total_context_tokens = 0;
};

struct AnswerSource {
  std::string video_id;
  double t_start_s = 0.0;
  double t_end_s = 0.0;
  std::int64_t chunk_id = 0;
  double score = 0.0;

  friend bool operator==(const AnswerSource&, const AnswerSource&) = default;
};

struct Answer {
  std::string text;
  std::vector<AnswerSource> sources;
  std::string provider_id;
  bool fallback_used = false;
  std::string warning;  // set when the chat provider failed
};

// Generative answer provider. Implementations must be callable concurrently.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string id() const = 0;
};

struct ChatSettings {
  int max_tokens = 256;
  double temperature = 0.0;
};

// POST {prompt, max_tokens, temperature} -> {text}.
class ExternalChatProvider final : public ChatProvider {
 public:
  ExternalChatProvider(std::shared_ptr<HttpTransport> transport, ChatSettings settings,
                       std::chrono::milliseconds timeout, RetryPolicy retry, std::string label = "external");
  std::string complete(const std::string& prompt) override;
  std::string id() const override { return "chat:" + label_; }
  bool reachable() const;

 private:
  std::shared_ptr<HttpTransport> transport_;
  ChatSettings settings_;
  std::chrono::milliseconds timeout_;
  RetryPolicy retry_;
  std::string label_;
};

struct AnswerOptions {
  std::string prompt_template{kDefaultPromptTemplate};
  std::size_t context_budget_tokens = kDefaultContextBudgetTokens;
};

// hits = store.query(embed(question), k, filter); no re-ranking.
RetrievedContext retrieve(const MemoryQuery& query, const VectorStore& store, EmbeddingProvider& embedder);

// Drops the lowest-scoring hits until the token total fits. Chunks are never cut.
RetrievedContext fit_to_budget(RetrievedContext context, std::size_t budget_tokens);

// "[video {id} @ {t_start}s–{t_end}s]" with two decimals.
std::string timestamp_marker(const ChunkMetadata& metadata);

// Substitutes {context} and {question} in `prompt_template`.
std::string build_prompt(const RetrievedContext& context, std::string_view question,
                         std::string_view prompt_template = kDefaultPromptTemplate);

// Sentence of the top-ranked hit with the largest overlap of non-stopword
// question tokens; ties go to the earliest sentence. Empty context gives "".
std::string extractive_answer(const RetrievedContext& context, std::string_view question);

// Retrieves, fits the context budget, then answers with `chat` when given,
// falling back to the extractive answer when it fails or is absent.
Answer answer(const MemoryQuery& query, const VectorStore& store, EmbeddingProvider& embedder,
              ChatProvider* chat = nullptr, const AnswerOptions& options = {});

}  // namespace memagent
