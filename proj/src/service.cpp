#include "memagent/service.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "memagent/text.hpp"

namespace memagent {

using nlohmann::json;

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& config) {
  if (config.kind == EmbeddingKind::hashed_bow) return std::make_unique<HashedBowEmbedder>(config.dim, config.seed);
  ExternalEmbeddingConfig ext;
  ext.endpoint = config.endpoint;
  ext.batch_size = config.batch_size;
  ext.timeout_ms = config.timeout_ms;
  ext.max_retries = config.max_retries;
  if (config.dim > 0) ext.expected_dim = config.dim;
  RetryPolicy retry;
  retry.max_retries = config.max_retries;
  return std::make_unique<ExternalEmbeddingProvider>(make_http_transport(config.endpoint), ext, retry);
}

std::unique_ptr<ChatProvider> make_chat_provider(const ChatConfig& config) {
  if (config.kind == ChatKind::none) return nullptr;
  RetryPolicy retry;
  retry.max_retries = config.max_retries;
  return std::make_unique<ExternalChatProvider>(make_http_transport(config.endpoint),
                                                ChatSettings{config.max_tokens, config.temperature},
                                                std::chrono::milliseconds(config.timeout_ms), retry, config.endpoint);
}

std::size_t ingest_into_store(VectorStore& store, EmbeddingProvider& embedder, std::span<const CaptionRecord> captions,
                              const ChunkerConfig& chunker) {
  auto chunks = chunk_stream(captions, chunker, store.next_chunk_id());
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  auto vectors = embedder.embed_batch(texts);
  if (vectors.size() != chunks.size()) throw ProviderError("embedding provider returned the wrong number of vectors");
  for (std::size_t i = 0; i < chunks.size(); ++i) store.upsert({std::move(chunks[i]), std::move(vectors[i])});
  return chunks.size();
}

SourceKind detect_source_kind(const std::filesystem::path& source) {
  std::error_code ec;
  if (std::filesystem::is_directory(source, ec)) return SourceKind::frame_directory;
  std::ifstream in(source);
  if (!in) throw SourceError("cannot open ingest source " + source.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_object() && j.contains("text")) return SourceKind::caption_fixture;
    if (j.is_object() && j.contains("path")) return SourceKind::frame_manifest;
    throw FormatError("ingest source is neither a caption fixture nor a frame manifest", line_no);
  }
  return SourceKind::empty;
}

MemoryService::MemoryService(AppConfig config, Options options) : config_(std::move(config)) {
  config_.validate();
  embedder_ = make_embedding_provider(config_.embedding);
  chat_ = make_chat_provider(config_.chat);
  captioner_ = make_caption_provider(config_.caption);

  if (options.check_providers && !config_.offline) {
    if (auto* ext = dynamic_cast<ExternalEmbeddingProvider*>(embedder_.get()); ext && !ext->reachable()) {
      throw ConfigError("embedding provider unreachable at " + config_.embedding.endpoint);
    }
    if (auto* ext = dynamic_cast<ExternalChatProvider*>(chat_.get()); ext && !ext->reachable()) {
      throw ConfigError("chat provider unreachable at " + config_.chat.endpoint);
    }
    if (auto* ext = dynamic_cast<ExternalCaptionProvider*>(captioner_.get()); ext && !ext->reachable()) {
      throw ConfigError("caption provider unreachable at " + config_.caption.endpoint);
    }
  }

  std::error_code ec;
  if (!config_.store_path.empty() && std::filesystem::exists(config_.store_path, ec)) {
    store_ = std::make_unique<VectorStore>(VectorStore::load(config_.store_path));
    if (store_->dim() != embedder_->dim()) {
      throw ConfigError(fmt::format("store {} has dimension {} but the embedding provider produces {}",
                                    config_.store_path.string(), store_->dim(), embedder_->dim()));
    }
  } else {
    store_ = std::make_unique<VectorStore>(embedder_->dim());
  }
}

AnswerOptions MemoryService::answer_options() const {
  return {config_.retrieval.prompt_template, config_.retrieval.context_budget_tokens};
}

IngestSummary MemoryService::ingest_captions(std::span<const CaptionRecord> captions, bool flush) {
  std::lock_guard lock(ingest_mutex_);
  ingest_in_progress_ = true;
  struct Reset {
    std::atomic<bool>& flag;
    ~Reset() { flag = false; }
  } reset{ingest_in_progress_};
  return ingest_locked(captions, flush);
}

IngestSummary MemoryService::ingest_frames(std::span<const Frame> frames) {
  std::lock_guard lock(ingest_mutex_);
  ingest_in_progress_ = true;
  struct Reset {
    std::atomic<bool>& flag;
    ~Reset() { flag = false; }
  } reset{ingest_in_progress_};
  auto encoded = run_encoding_pipeline(frames, *captioner_, config_.pipeline.workers, config_.caption.descriptor_prompt);
  auto summary = ingest_locked(encoded.records, /*flush=*/true);
  summary.frames = frames.size();
  summary.failures = std::move(encoded.failures);
  summary.status = encoded.status;
  return summary;
}

IngestSummary MemoryService::ingest_source(const std::filesystem::path& source) {
  switch (detect_source_kind(source)) {
    case SourceKind::caption_fixture: {
      const auto captions = load_caption_fixture(source);
      return ingest_captions(captions);
    }
    case SourceKind::frame_manifest:
    case SourceKind::frame_directory: {
      const auto frames = sample_frames(source, config_.pipeline.rate_hz, config_.pipeline.source_fps);
      return ingest_frames(frames);
    }
    case SourceKind::empty:
      break;
  }
  return ingest_captions({});
}

IngestSummary MemoryService::ingest_locked(std::span<const CaptionRecord> captions, bool flush) {
  std::vector<CaptionRecord> ordered(captions.begin(), captions.end());
  std::stable_sort(ordered.begin(), ordered.end());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (trim(ordered[i].text).empty()) throw ArgumentError("caption text must be non-empty");
    if (i > 0 && ordered[i].video_id == ordered[i - 1].video_id &&
        ordered[i].frame_index == ordered[i - 1].frame_index) {
      throw ArgumentError("duplicate caption for frame " + std::to_string(ordered[i].frame_index));
    }
    if (auto it = chunkers_.find(ordered[i].video_id);
        it != chunkers_.end() && static_cast<std::int64_t>(ordered[i].frame_index) <= it->second.last_frame_index()) {
      throw ArgumentError("caption for " + ordered[i].video_id + " frame " + std::to_string(ordered[i].frame_index) +
                          " is not newer than what this memory already holds");
    }
  }

  // New chunkers continue the chunk numbering and token offsets already in the store.
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> resume;
  for (const auto& c : ordered) {
    if (chunkers_.count(c.video_id) || resume.count(c.video_id)) continue;
    resume[c.video_id] = {0, 0};
  }
  if (!resume.empty()) {
    for (const auto& chunk : store_->chunks()) {
      auto it = resume.find(chunk.metadata.video_id);
      if (it == resume.end()) continue;
      it->second.first = std::max(it->second.first, chunk.metadata.chunk_index + 1);
      it->second.second = std::max(it->second.second, chunk.metadata.token_offset + chunk.token_count);
    }
    for (const auto& [video, start] : resume) {
      chunkers_.emplace(video, StreamingChunker(video, config_.chunker, start.first, start.second));
    }
  }

  std::vector<Chunk> fresh;
  std::set<std::string> touched;
  for (const auto& c : ordered) {
    auto emitted = chunkers_.at(c.video_id).append(c);
    std::move(emitted.begin(), emitted.end(), std::back_inserter(fresh));
    touched.insert(c.video_id);
  }
  if (flush) {
    for (const auto& video : touched) {
      auto tail = chunkers_.at(video).flush();
      std::move(tail.begin(), tail.end(), std::back_inserter(fresh));
    }
  }

  std::vector<std::string> texts;
  texts.reserve(fresh.size());
  for (const auto& c : fresh) texts.push_back(c.text);
  auto vectors = embedder_->embed_batch(texts);
  if (vectors.size() != fresh.size()) throw ProviderError("embedding provider returned the wrong number of vectors");
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    fresh[i].chunk_id = store_->next_chunk_id();
    store_->upsert({std::move(fresh[i]), std::move(vectors[i])});
  }
  save_locked();

  IngestSummary summary;
  summary.frames = ordered.size();
  summary.captions = ordered.size();
  summary.chunks = fresh.size();
  spdlog::info("ingested {} captions into {} new chunks", summary.captions, summary.chunks);
  return summary;
}

void MemoryService::save_locked() const {
  if (!config_.store_path.empty()) store_->persist(config_.store_path);
}

Answer MemoryService::ask(MemoryQuery query) const {
  if (query.k == 0) query.k = config_.retrieval.k;
  return answer(query, *store_, *embedder_, chat_.get(), answer_options());
}

MemoryStats MemoryService::stats() const {
  MemoryStats s;
  s.ingest_in_progress = ingest_in_progress_;
  std::map<std::string, std::uint64_t> tokens;
  const auto chunks = store_->chunks();
  s.chunk_count = chunks.size();
  for (const auto& c : chunks) {
    auto& t = tokens[c.metadata.video_id];
    t = std::max<std::uint64_t>(t, c.metadata.token_offset + c.token_count);
  }
  for (const auto& [video, count] : tokens) {
    s.video_ids.push_back(video);
    s.total_caption_tokens += count;
  }
  std::error_code ec;
  if (!config_.store_path.empty()) {
    const auto bytes = std::filesystem::file_size(config_.store_path, ec);
    if (!ec) s.store_file_bytes = bytes;
  }
  return s;
}

json answer_to_json(const Answer& a) {
  json sources = json::array();
  for (const auto& s : a.sources) {
    sources.push_back({{"video_id", s.video_id},
                       {"t_start_s", s.t_start_s},
                       {"t_end_s", s.t_end_s},
                       {"chunk_id", s.chunk_id},
                       {"score", s.score}});
  }
  json out = {{"answer", a.text},
              {"sources", std::move(sources)},
              {"provider_id", a.provider_id},
              {"fallback_used", a.fallback_used}};
  if (!a.warning.empty()) out["warning"] = a.warning;
  return out;
}

json stats_to_json(const MemoryStats& s) {
  return {{"chunk_count", s.chunk_count},
          {"video_ids", s.video_ids},
          {"total_caption_tokens", s.total_caption_tokens},
          {"store_file_bytes", s.store_file_bytes},
          {"ingest_in_progress", s.ingest_in_progress}};
}

json summary_to_json(const IngestSummary& s) {
  json failures = json::array();
  for (const auto& f : s.failures) {
    failures.push_back({{"video_id", f.video_id}, {"frame_index", f.frame_index}, {"message", f.message}});
  }
  return {{"frames", s.frames},
          {"captions", s.captions},
          {"chunks", s.chunks},
          {"failures", std::move(failures)},
          {"status", s.status == PipelineStatus::ok ? "ok" : "degraded"}};
}

std::string render_answer(const Answer& a) {
  std::string out = a.text + "\n";
  if (!a.warning.empty()) out += "warning: " + a.warning + "\n";
  if (a.sources.empty()) {
    out += "sources: none\n";
    return out;
  }
  out += "sources:\n";
  for (const auto& s : a.sources) {
    out += fmt::format("  - video {} @ {:.2f}s–{:.2f}s (chunk {}, score {:.4f})\n", s.video_id, s.t_start_s,
                       s.t_end_s, s.chunk_id, s.score);
  }
  return out;
}

}  // namespace memagent
