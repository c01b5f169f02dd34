#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "memagent/chunker.hpp"
#include "memagent/embedding.hpp"

namespace memagent {

struct StoredItem {
  Chunk chunk;
  EmbeddingVector vector;
};

// Conjunction of optional constraints on chunk metadata.
struct MetadataFilter {
  std::optional<std::string> video_id;
  std::optional<double> t_min_s;  // keep chunks ending at or after this time
  std::optional<double> t_max_s;  // keep chunks starting at or before this time

  bool matches(const ChunkMetadata& m) const;
  bool empty() const { return !video_id && !t_min_s && !t_max_s; }
};

struct QueryHit {
  std::int64_t chunk_id = 0;
  double score = 0.0;
  Chunk chunk;
};

inline constexpr std::uint32_t kStoreFormatVersion = 1;

// Exact cosine top-k index over contiguous float rows.
// Readers (query, snapshot accessors) run concurrently; writers are serialized.
class VectorStore {
 public:
  explicit VectorStore(std::size_t dim);
  VectorStore(VectorStore&& other) noexcept;
  VectorStore& operator=(VectorStore&& other) noexcept;
  VectorStore(const VectorStore&) = delete;
  VectorStore& operator=(const VectorStore&) = delete;

  std::size_t dim() const { return dim_; }
  std::size_t size() const;

  // Inserts or replaces by chunk.chunk_id; a negative id is replaced by
  // next_chunk_id(). Returns the id. Throws ArgumentError on dimension mismatch.
  std::int64_t upsert(StoredItem item);

  // Sorted by score descending, ties by ascending chunk_id.
  std::vector<QueryHit> query(const EmbeddingVector& vector, std::size_t k, const MetadataFilter& filter = {}) const;

  std::int64_t next_chunk_id() const;
  std::optional<Chunk> get(std::int64_t chunk_id) const;
  std::optional<EmbeddingVector> vector(std::int64_t chunk_id) const;
  // Snapshot of all chunks ordered by chunk_id.
  std::vector<Chunk> chunks() const;

  // Writes a version-1 store file atomically (temp file + rename).
  void persist(const std::filesystem::path& path) const;
  // Throws FormatError on a corrupt, truncated, or version-mismatched file;
  // nothing is returned in that case.
  static VectorStore load(const std::filesystem::path& path);

 private:
  std::size_t dim_;
  mutable std::shared_mutex mutex_;
  std::vector<float> rows_;  // size() * dim_ floats
  std::vector<Chunk> chunks_;
  std::unordered_map<std::int64_t, std::size_t> row_of_;
  std::int64_t next_id_ = 0;
};

}  // namespace memagent
