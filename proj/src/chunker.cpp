#include "memagent/chunker.hpp"

#include <algorithm>

#include "memagent/errors.hpp"
#include "memagent/text.hpp"

namespace memagent {

void ChunkerConfig::validate() const {
  if (chunk_size_tokens == 0) throw ConfigError("chunk_size_tokens must be positive");
  if (overlap_tokens >= chunk_size_tokens) throw ConfigError("overlap_tokens must be smaller than chunk_size_tokens");
}

std::size_t window_count(std::size_t n_tokens, const ChunkerConfig& cfg) {
  if (n_tokens == 0) return 0;
  if (n_tokens <= cfg.chunk_size_tokens) return 1;
  const std::size_t s = cfg.stride();
  return (n_tokens - cfg.chunk_size_tokens + s - 1) / s + 1;
}

StreamingChunker::StreamingChunker(std::string video_id, ChunkerConfig cfg, std::uint64_t first_chunk_index,
                                   std::uint64_t first_token_offset)
    : video_id_(std::move(video_id)),
      cfg_(cfg),
      next_chunk_index_(first_chunk_index),
      base_(first_token_offset),
      next_start_(first_token_offset),
      covered_end_(first_token_offset) {
  cfg_.validate();
}

std::vector<Chunk> StreamingChunker::append(const CaptionRecord& caption) {
  if (caption.video_id != video_id_) throw ArgumentError("caption belongs to another video: " + caption.video_id);
  if (static_cast<std::int64_t>(caption.frame_index) <= last_frame_) {
    throw ArgumentError("captions must arrive in increasing frame_index order");
  }
  last_frame_ = static_cast<std::int64_t>(caption.frame_index);
  for (auto& tok : tokenize(caption.text)) {
    tokens_.push_back(std::move(tok));
    sources_.push_back({caption.frame_index, caption.timestamp_s});
  }
  std::vector<Chunk> out;
  while (total_tokens() >= next_start_ + cfg_.chunk_size_tokens) {
    emit(next_start_, next_start_ + cfg_.chunk_size_tokens, out);
    next_start_ += cfg_.stride();
  }
  compact();
  return out;
}

std::vector<Chunk> StreamingChunker::flush() {
  std::vector<Chunk> out;
  const std::uint64_t total = total_tokens();
  if (total > covered_end_ || (!emitted_any_ && total > next_start_)) {
    const std::uint64_t start = next_start_;
    emit(start, total, out);
    // Later captions open a new window that overlaps the tail of this one.
    const std::uint64_t overlap_start = total > cfg_.overlap_tokens ? total - cfg_.overlap_tokens : 0;
    next_start_ = std::max(start + 1, overlap_start);
    compact();
  }
  return out;
}

void StreamingChunker::emit(std::uint64_t begin, std::uint64_t end, std::vector<Chunk>& out) {
  const std::size_t b = begin - base_;
  const std::size_t e = end - base_;
  covered_end_ = end;
  emitted_any_ = true;
  const std::uint64_t index = next_chunk_index_++;
  Chunk chunk;
  chunk.text = join_tokens(tokens_, b, e);
  if (char_count(chunk.text) < cfg_.min_chars) return;
  chunk.token_count = e - b;
  chunk.metadata.video_id = video_id_;
  chunk.metadata.chunk_index = index;
  chunk.metadata.token_offset = begin;
  chunk.metadata.first_frame = sources_[b].frame_index;
  chunk.metadata.last_frame = sources_[e - 1].frame_index;
  chunk.metadata.t_start_s = sources_[b].timestamp_s;
  chunk.metadata.t_end_s = sources_[e - 1].timestamp_s;
  out.push_back(std::move(chunk));
}

void StreamingChunker::compact() {
  const std::uint64_t keep_from = std::min(next_start_, total_tokens());
  if (keep_from <= base_) return;
  const auto drop = static_cast<std::ptrdiff_t>(keep_from - base_);
  tokens_.erase(tokens_.begin(), tokens_.begin() + drop);
  sources_.erase(sources_.begin(), sources_.begin() + drop);
  base_ = keep_from;
}

std::vector<Chunk> chunk_stream(std::span<const CaptionRecord> captions, const ChunkerConfig& cfg,
                                std::int64_t first_chunk_id) {
  cfg.validate();
  std::vector<StreamingChunker> chunkers;
  std::vector<std::vector<Chunk>> per_video;
  for (const auto& caption : captions) {
    auto it = std::find_if(chunkers.begin(), chunkers.end(),
                           [&](const auto& c) { return c.video_id() == caption.video_id; });
    if (it == chunkers.end()) {
      chunkers.emplace_back(caption.video_id, cfg);
      per_video.emplace_back();
      it = std::prev(chunkers.end());
    }
    auto emitted = it->append(caption);
    auto& dst = per_video[static_cast<std::size_t>(it - chunkers.begin())];
    std::move(emitted.begin(), emitted.end(), std::back_inserter(dst));
  }
  std::vector<Chunk> chunks;
  std::int64_t next_id = first_chunk_id;
  for (std::size_t v = 0; v < chunkers.size(); ++v) {
    auto tail = chunkers[v].flush();
    std::move(tail.begin(), tail.end(), std::back_inserter(per_video[v]));
    for (auto& c : per_video[v]) {
      c.chunk_id = next_id++;
      chunks.push_back(std::move(c));
    }
  }
  return chunks;
}

}  // namespace memagent
