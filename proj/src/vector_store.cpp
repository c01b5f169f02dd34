#include "memagent/vector_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "jsonl.hpp"

namespace memagent {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "MEMAGENT-VSTORE";

json metadata_to_json(const ChunkMetadata& m) {
  return {{"video_id", m.video_id},     {"t_start_s", m.t_start_s},
          {"t_end_s", m.t_end_s},       {"chunk_index", m.chunk_index},
          {"frame_span", {m.first_frame, m.last_frame}}, {"token_offset", m.token_offset}};
}

ChunkMetadata metadata_from_json(const json& j) {
  ChunkMetadata m;
  m.video_id = j.at("video_id").get<std::string>();
  m.t_start_s = j.at("t_start_s").get<double>();
  m.t_end_s = j.at("t_end_s").get<double>();
  m.chunk_index = j.at("chunk_index").get<std::uint64_t>();
  const auto& span = j.at("frame_span");
  if (!span.is_array() || span.size() != 2) throw FormatError("frame_span must be [first, last]");
  m.first_frame = span[0].get<std::uint64_t>();
  m.last_frame = span[1].get<std::uint64_t>();
  m.token_offset = j.value("token_offset", std::uint64_t{0});
  return m;
}

}  // namespace

bool MetadataFilter::matches(const ChunkMetadata& m) const {
  if (video_id && m.video_id != *video_id) return false;
  if (t_min_s && m.t_end_s < *t_min_s) return false;
  if (t_max_s && m.t_start_s > *t_max_s) return false;
  return true;
}

VectorStore::VectorStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ArgumentError("store dimension must be positive");
}

VectorStore::VectorStore(VectorStore&& other) noexcept : dim_(other.dim_) {
  std::unique_lock lock(other.mutex_);
  rows_ = std::move(other.rows_);
  chunks_ = std::move(other.chunks_);
  row_of_ = std::move(other.row_of_);
  next_id_ = other.next_id_;
}

VectorStore& VectorStore::operator=(VectorStore&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    dim_ = other.dim_;
    rows_ = std::move(other.rows_);
    chunks_ = std::move(other.chunks_);
    row_of_ = std::move(other.row_of_);
    next_id_ = other.next_id_;
  }
  return *this;
}

std::size_t VectorStore::size() const {
  std::shared_lock lock(mutex_);
  return chunks_.size();
}

std::int64_t VectorStore::upsert(StoredItem item) {
  if (item.vector.dim() != dim_) {
    throw ArgumentError("vector dimension " + std::to_string(item.vector.dim()) + " does not match store dimension " +
                        std::to_string(dim_));
  }
  std::unique_lock lock(mutex_);
  if (item.chunk.chunk_id < 0) item.chunk.chunk_id = next_id_;
  const std::int64_t id = item.chunk.chunk_id;
  const auto values = item.vector.values();
  if (auto it = row_of_.find(id); it != row_of_.end()) {
    std::copy(values.begin(), values.end(), rows_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    chunks_[it->second] = std::move(item.chunk);
  } else {
    row_of_.emplace(id, chunks_.size());
    rows_.insert(rows_.end(), values.begin(), values.end());
    chunks_.push_back(std::move(item.chunk));
  }
  next_id_ = std::max(next_id_, id + 1);
  return id;
}

std::vector<QueryHit> VectorStore::query(const EmbeddingVector& vector, std::size_t k,
                                         const MetadataFilter& filter) const {
  if (k == 0) throw ArgumentError("k must be >= 1");
  if (vector.dim() != dim_) {
    throw ArgumentError("query dimension " + std::to_string(vector.dim()) + " does not match store dimension " +
                        std::to_string(dim_));
  }
  std::shared_lock lock(mutex_);
  struct Candidate {
    double score;
    std::int64_t id;
    std::size_t row;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(chunks_.size());
  const auto q = vector.values();
  const bool filtered = !filter.empty();
  for (std::size_t row = 0; row < chunks_.size(); ++row) {
    if (filtered && !filter.matches(chunks_[row].metadata)) continue;
    const double s = dot(q, std::span<const float>(rows_.data() + row * dim_, dim_));
    candidates.push_back({std::clamp(s, -1.0, 1.0), chunks_[row].chunk_id, row});
  }
  const auto better = [](const Candidate& a, const Candidate& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  };
  const std::size_t n = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n), candidates.end(),
                    better);
  std::vector<QueryHit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    hits.push_back({candidates[i].id, candidates[i].score, chunks_[candidates[i].row]});
  }
  return hits;
}

std::int64_t VectorStore::next_chunk_id() const {
  std::shared_lock lock(mutex_);
  return next_id_;
}

std::optional<Chunk> VectorStore::get(std::int64_t chunk_id) const {
  std::shared_lock lock(mutex_);
  auto it = row_of_.find(chunk_id);
  if (it == row_of_.end()) return std::nullopt;
  return chunks_[it->second];
}

std::optional<EmbeddingVector> VectorStore::vector(std::int64_t chunk_id) const {
  std::shared_lock lock(mutex_);
  auto it = row_of_.find(chunk_id);
  if (it == row_of_.end()) return std::nullopt;
  const auto begin = rows_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_);
  return EmbeddingVector::from_unit(std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(dim_)));
}

std::vector<Chunk> VectorStore::chunks() const {
  std::vector<Chunk> out;
  {
    std::shared_lock lock(mutex_);
    out = chunks_;
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.chunk_id < b.chunk_id; });
  return out;
}

void VectorStore::persist(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw SourceError("cannot write " + tmp.string());
    std::shared_lock lock(mutex_);
    const json header = {{"format_version", kStoreFormatVersion}, {"dim", dim_}, {"count", chunks_.size()}};
    out << kMagic << ' ' << header.dump() << '\n';
    // Rows are written in chunk_id order so identical stores give identical files.
    std::vector<std::size_t> order(chunks_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return chunks_[a].chunk_id < chunks_[b].chunk_id; });
    for (std::size_t row : order) {
      const auto& c = chunks_[row];
      const auto begin = rows_.begin() + static_cast<std::ptrdiff_t>(row * dim_);
      const json rec = {{"chunk_id", c.chunk_id},
                        {"text", c.text},
                        {"token_count", c.token_count},
                        {"metadata", metadata_to_json(c.metadata)},
                        {"vector", std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(dim_))}};
      out << rec.dump() << '\n';
    }
    out.flush();
    if (!out) throw SourceError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw SourceError("cannot replace " + path.string() + ": " + ec.message());
}

VectorStore VectorStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceError("cannot open store file " + path.string());

  std::string header_line;
  if (!std::getline(in, header_line)) throw FormatError("empty store file", 1);
  if (header_line.compare(0, kMagic.size(), kMagic) != 0) throw FormatError("not a memagent store file", 1);
  const json header = json::parse(header_line.substr(kMagic.size()), nullptr, false);
  if (!header.is_object() || !header.contains("format_version") || !header.contains("dim") ||
      !header.contains("count")) {
    throw FormatError("malformed store header", 1);
  }
  if (!header["format_version"].is_number_unsigned() || header["format_version"].get<std::uint32_t>() != kStoreFormatVersion) {
    throw FormatError("unsupported store format version " + header["format_version"].dump(), 1);
  }
  if (!header["dim"].is_number_unsigned() || !header["count"].is_number_unsigned()) {
    throw FormatError("malformed store header", 1);
  }
  const auto dim = header["dim"].get<std::size_t>();
  const auto count = header["count"].get<std::size_t>();
  if (dim == 0) throw FormatError("store dimension must be positive", 1);

  VectorStore store(dim);
  std::size_t seen = 0;
  detail::for_each_json_line(
      in,
      [&](const json& j, std::size_t line) {
        Chunk chunk;
        chunk.chunk_id = detail::require(j, "chunk_id", line).get<std::int64_t>();
        chunk.text = detail::require(j, "text", line).get<std::string>();
        chunk.token_count = detail::require(j, "token_count", line).get<std::size_t>();
        try {
          chunk.metadata = metadata_from_json(detail::require(j, "metadata", line));
        } catch (const FormatError& e) {
          throw FormatError(e.what(), line);
        }
        auto values = detail::require(j, "vector", line).get<std::vector<float>>();
        if (values.size() != dim) throw FormatError("vector length does not match store dimension", line);
        if (chunk.chunk_id < 0) throw FormatError("negative chunk_id", line);
        if (store.row_of_.count(chunk.chunk_id)) throw FormatError("duplicate chunk_id", line);
        std::optional<EmbeddingVector> vec;
        try {
          vec = EmbeddingVector::from_unit(std::move(values));
        } catch (const ArgumentError& e) {
          throw FormatError(e.what(), line);
        }
        store.upsert({std::move(chunk), std::move(*vec)});
        ++seen;
      },
      2);
  if (seen != count) {
    throw FormatError("store file is truncated or padded: header promises " + std::to_string(count) +
                      " records, found " + std::to_string(seen));
  }
  return store;
}

}  // namespace memagent
