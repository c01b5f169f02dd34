#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memagent/http_client.hpp"

namespace memagent {

// Fixed-dimension unit vector. Every instance has L2 norm 1 +- 1e-6 and finite values.
class EmbeddingVector {
 public:
  // Scales `values` to unit length. Throws ArgumentError on zero norm or non-finite input.
  static EmbeddingVector normalized(std::vector<float> values);
  // Accepts values that are already unit length (within 1e-6) without rescaling.
  static EmbeddingVector from_unit(std::vector<float> values);

  std::size_t dim() const { return values_.size(); }
  std::span<const float> values() const { return values_; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  explicit EmbeddingVector(std::vector<float> v) : values_(std::move(v)) {}
  std::vector<float> values_;
};

double dot(std::span<const float> a, std::span<const float> b);
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return dot(a.values(), b.values()); }

// Text -> vector. Implementations must be callable concurrently.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() = 0;
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
  virtual std::string id() const = 0;
};

// Feature-hashed bag of words over normalized, non-stopword tokens with
// sublinear term frequency (1 + ln tf). Offline and deterministic.
class HashedBowEmbedder final : public EmbeddingProvider {
 public:
  explicit HashedBowEmbedder(std::size_t dim = 256, std::uint64_t seed = 0);

  std::size_t dim() override { return dim_; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;
  std::string id() const override;

  // Bucket that `word` (already normalized) hashes into.
  std::size_t bucket(std::string_view word) const;

 private:
  EmbeddingVector embed_one(std::string_view text) const;

  std::size_t dim_;
  std::uint64_t seed_;
};

struct ExternalEmbeddingConfig {
  std::string endpoint;
  std::size_t batch_size = 64;  // capped at 64
  int timeout_ms = 30000;
  int max_retries = 2;
  std::optional<std::size_t> expected_dim;  // learned from the first response when unset
};

// POST {texts:[...]} -> {vectors:[[...]], dim}. Batches of at most 64 texts.
class ExternalEmbeddingProvider final : public EmbeddingProvider {
 public:
  ExternalEmbeddingProvider(std::shared_ptr<HttpTransport> transport, ExternalEmbeddingConfig config,
                            RetryPolicy retry = {});

  // Probes the service when the dimension is not yet known.
  std::size_t dim() override;
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;
  std::string id() const override { return "external:" + config_.endpoint; }
  bool reachable() const;

 private:
  std::vector<EmbeddingVector> request(std::span<const std::string> texts);

  std::shared_ptr<HttpTransport> transport_;
  ExternalEmbeddingConfig config_;
  RetryPolicy retry_;
  std::atomic<std::size_t> dim_{0};
};

// Throws ArgumentError on empty (or whitespace-only) text.
EmbeddingVector embed(std::string_view text, EmbeddingProvider& provider);

}  // namespace memagent
