#include "memagent/qa_agent.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "memagent/text.hpp"

namespace memagent {
namespace {

using nlohmann::json;

std::set<std::string> content_words(std::string_view text) {
  std::set<std::string> out;
  for (auto& w : normalized_words(text)) {
    if (!is_stopword(w)) out.insert(std::move(w));
  }
  return out;
}

}  // namespace

void MemoryQuery::validate() const {
  if (trim(question).empty()) throw ArgumentError("question must be non-empty");
  if (k == 0) throw ArgumentError("k must be >= 1");
}

ExternalChatProvider::ExternalChatProvider(std::shared_ptr<HttpTransport> transport, ChatSettings settings,
                                           std::chrono::milliseconds timeout, RetryPolicy retry, std::string label)
    : transport_(std::move(transport)), settings_(settings), timeout_(timeout), retry_(retry), label_(std::move(label)) {}

std::string ExternalChatProvider::complete(const std::string& prompt) {
  const auto payload =
      json{{"prompt", prompt}, {"max_tokens", settings_.max_tokens}, {"temperature", settings_.temperature}}.dump();
  return with_retry(retry_, "chat request", [&] {
    const auto res = transport_->post_json(payload, timeout_);
    const json body = json::parse(res.body, nullptr, false);
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
      throw ProviderError("chat response lacks a \"text\" string");
    }
    auto text = body["text"].get<std::string>();
    if (trim(text).empty()) throw ProviderError("chat provider returned an empty answer");
    return text;
  });
}

bool ExternalChatProvider::reachable() const { return transport_->reachable(timeout_); }

RetrievedContext retrieve(const MemoryQuery& query, const VectorStore& store, EmbeddingProvider& embedder) {
  query.validate();
  RetrievedContext ctx;
  if (store.size() == 0) return ctx;
  ctx.hits = store.query(embed(query.question, embedder), query.k, query.filter);
  for (const auto& h : ctx.hits) ctx.total_context_tokens += h.chunk.token_count;
  return ctx;
}

RetrievedContext fit_to_budget(RetrievedContext context, std::size_t budget_tokens) {
  while (!context.hits.empty() && context.total_context_tokens > budget_tokens) {
    context.total_context_tokens -= context.hits.back().chunk.token_count;
    context.hits.pop_back();
  }
  return context;
}

std::string timestamp_marker(const ChunkMetadata& metadata) {
  return fmt::format("[video {} @ {:.2f}s–{:.2f}s]", metadata.video_id, metadata.t_start_s, metadata.t_end_s);
}

std::string build_prompt(const RetrievedContext& context, std::string_view question,
                         std::string_view prompt_template) {
  std::string blocks;
  if (context.hits.empty()) {
    blocks = kNoContextSentinel;
  } else {
    for (std::size_t i = 0; i < context.hits.size(); ++i) {
      if (i > 0) blocks += '\n';
      blocks += timestamp_marker(context.hits[i].chunk.metadata);
      blocks += ' ';
      blocks += context.hits[i].chunk.text;
    }
  }
  std::string prompt;
  std::size_t pos = 0;
  while (pos < prompt_template.size()) {
    if (prompt_template.compare(pos, 9, "{context}") == 0) {
      prompt += blocks;
      pos += 9;
    } else if (prompt_template.compare(pos, 10, "{question}") == 0) {
      prompt += question;
      pos += 10;
    } else {
      prompt += prompt_template[pos++];
    }
  }
  return prompt;
}

std::string extractive_answer(const RetrievedContext& context, std::string_view question) {
  if (context.hits.empty()) return {};
  const auto q = content_words(question);
  const auto sentences = split_sentences(context.hits.front().chunk.text);
  std::size_t best = 0;
  std::size_t best_overlap = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    std::size_t overlap = 0;
    for (const auto& w : content_words(sentences[i])) overlap += q.count(w);
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = i;
    }
  }
  return sentences.empty() ? trim(context.hits.front().chunk.text) : sentences[best];
}

Answer answer(const MemoryQuery& query, const VectorStore& store, EmbeddingProvider& embedder, ChatProvider* chat,
              const AnswerOptions& options) {
  const auto ctx = fit_to_budget(retrieve(query, store, embedder), options.context_budget_tokens);
  Answer out;
  if (ctx.hits.empty()) {
    out.text = kNoMemoryAnswer;
    out.provider_id = chat ? chat->id() : std::string(kExtractiveProviderId);
    return out;
  }
  for (const auto& h : ctx.hits) {
    out.sources.push_back(
        {h.chunk.metadata.video_id, h.chunk.metadata.t_start_s, h.chunk.metadata.t_end_s, h.chunk_id, h.score});
  }
  if (chat) {
    try {
      out.text = chat->complete(build_prompt(ctx, query.question, options.prompt_template));
      out.provider_id = chat->id();
      return out;
    } catch (const ProviderError& e) {
      spdlog::warn("chat provider failed, using extractive answer: {}", e.what());
      out.warning = std::string("chat provider failed: ") + e.what();
      out.fallback_used = true;
    }
  }
  out.text = extractive_answer(ctx, query.question);
  out.provider_id = out.fallback_used ? kFallbackProviderId : kExtractiveProviderId;
  return out;
}

}  // namespace memagent
