#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "memagent/capture.hpp"
#include "memagent/config.hpp"
#include "memagent/qa_agent.hpp"
#include "memagent/vector_store.hpp"

namespace memagent {

struct IngestSummary {
  std::size_t frames = 0;
  std::size_t captions = 0;
  std::size_t chunks = 0;
  std::vector<FrameFailure> failures;
  PipelineStatus status = PipelineStatus::ok;
};

struct MemoryStats {
  std::size_t chunk_count = 0;
  std::vector<std::string> video_ids;
  std::uint64_t total_caption_tokens = 0;
  std::uint64_t store_file_bytes = 0;
  bool ingest_in_progress = false;
};

// Chunks, embeds and upserts captions into `store` in one batch. Returns the
// number of chunks written. Used for throwaway per-video memories.
std::size_t ingest_into_store(VectorStore& store, EmbeddingProvider& embedder, std::span<const CaptionRecord> captions,
                              const ChunkerConfig& chunker);

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& config);
std::unique_ptr<ChatProvider> make_chat_provider(const ChatConfig& config);

enum class SourceKind { caption_fixture, frame_manifest, frame_directory, empty };
// Looks at the first record: {"text"} means caption fixture, {"path"} frame manifest.
SourceKind detect_source_kind(const std::filesystem::path& source);

// One memory (store file) with its providers. Queries run concurrently;
// ingestion is serialized and persists the store when store_path is set.
class MemoryService {
 public:
  struct Options {
    bool check_providers = true;  // probe external endpoints at startup
  };

  explicit MemoryService(AppConfig config) : MemoryService(std::move(config), Options{}) {}
  MemoryService(AppConfig config, Options options);

  IngestSummary ingest_captions(std::span<const CaptionRecord> captions, bool flush = true);
  IngestSummary ingest_frames(std::span<const Frame> frames);
  IngestSummary ingest_source(const std::filesystem::path& source);

  // query.k == 0 selects the configured default.
  Answer ask(MemoryQuery query) const;
  MemoryStats stats() const;

  const VectorStore& store() const { return *store_; }
  const AppConfig& config() const { return config_; }
  EmbeddingProvider& embedder() const { return *embedder_; }
  ChatProvider* chat() const { return chat_.get(); }
  AnswerOptions answer_options() const;

 private:
  IngestSummary ingest_locked(std::span<const CaptionRecord> captions, bool flush);
  void save_locked() const;

  AppConfig config_;
  std::unique_ptr<VectorStore> store_;
  std::unique_ptr<EmbeddingProvider> embedder_;
  std::unique_ptr<ChatProvider> chat_;
  std::unique_ptr<CaptionProvider> captioner_;
  std::mutex ingest_mutex_;
  std::atomic<bool> ingest_in_progress_{false};
  std::map<std::string, StreamingChunker> chunkers_;
};

nlohmann::json answer_to_json(const Answer& answer);
nlohmann::json stats_to_json(const MemoryStats& stats);
nlohmann::json summary_to_json(const IngestSummary& summary);

// Human-readable answer block shared by `ask` and the REPL.
std::string render_answer(const Answer& answer);

}  // namespace memagent
