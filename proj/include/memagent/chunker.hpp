#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memagent/capture.hpp"

namespace memagent {

struct ChunkMetadata {
  std::string video_id;
  double t_start_s = 0.0;
  double t_end_s = 0.0;
  std::uint64_t chunk_index = 0;  // window ordinal within the video's caption history
  std::uint64_t first_frame = 0;
  std::uint64_t last_frame = 0;
  std::uint64_t token_offset = 0;  // position of the first token in the video's token stream

  friend bool operator==(const ChunkMetadata&, const ChunkMetadata&) = default;
};

struct Chunk {
  std::int64_t chunk_id = -1;
  std::string text;
  std::size_t token_count = 0;
  ChunkMetadata metadata;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct ChunkerConfig {
  std::size_t chunk_size_tokens = 1024;
  std::size_t overlap_tokens = 256;
  std::size_t min_chars = 5;

  std::size_t stride() const { return chunk_size_tokens - overlap_tokens; }
  // Throws ConfigError unless 0 <= overlap < chunk_size.
  void validate() const;
};

// Number of windows over an n-token stream before the min_chars filter:
// 0 for n == 0, 1 for n <= chunk_size, else ceil((n - chunk_size) / stride) + 1.
std::size_t window_count(std::size_t n_tokens, const ChunkerConfig& cfg);

// Incremental chunker over one video's cumulative caption history. Full
// windows are emitted as soon as they are available; flush() emits the
// trailing partial window. Emitted chunks are final and carry chunk_id -1
// (the store assigns ids).
class StreamingChunker {
 public:
  explicit StreamingChunker(std::string video_id, ChunkerConfig cfg = {}, std::uint64_t first_chunk_index = 0,
                            std::uint64_t first_token_offset = 0);

  std::vector<Chunk> append(const CaptionRecord& caption);
  std::vector<Chunk> flush();

  const std::string& video_id() const { return video_id_; }
  std::uint64_t total_tokens() const { return base_ + tokens_.size(); }
  std::int64_t last_frame_index() const { return last_frame_; }

 private:
  struct TokenSource {
    std::uint64_t frame_index;
    double timestamp_s;
  };

  void emit(std::uint64_t begin, std::uint64_t end, std::vector<Chunk>& out);
  void compact();

  std::string video_id_;
  ChunkerConfig cfg_;
  std::uint64_t next_chunk_index_;
  std::uint64_t base_;        // absolute index of tokens_[0]
  std::uint64_t next_start_;  // absolute start of the next window
  std::uint64_t covered_end_;  // absolute end of the last emitted window
  bool emitted_any_ = false;
  std::vector<std::string> tokens_;
  std::vector<TokenSource> sources_;
  std::int64_t last_frame_ = -1;
};

// Batch chunking of an ordered caption sequence. Videos are chunked
// independently, in order of first appearance; chunk ids are assigned
// sequentially from `first_chunk_id`.
std::vector<Chunk> chunk_stream(std::span<const CaptionRecord> captions, const ChunkerConfig& cfg = {},
                                std::int64_t first_chunk_id = 0);

}  // namespace memagent
