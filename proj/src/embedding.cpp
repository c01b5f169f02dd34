#include "memagent/embedding.hpp"

#include <cmath>
#include <map>

#include <json.hpp>

#include "memagent/hashing.hpp"
#include "memagent/text.hpp"

namespace memagent {

using nlohmann::json;

EmbeddingVector EmbeddingVector::normalized(std::vector<float> values) {
  double sq = 0.0;
  for (float v : values) {
    if (!std::isfinite(v)) throw ArgumentError("embedding contains a non-finite value");
    sq += static_cast<double>(v) * v;
  }
  if (values.empty() || !(sq > 0.0)) throw ArgumentError("cannot normalize a zero-length embedding");
  const double inv = 1.0 / std::sqrt(sq);
  for (float& v : values) v = static_cast<float>(v * inv);
  return EmbeddingVector(std::move(values));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> values) {
  double sq = 0.0;
  for (float v : values) {
    if (!std::isfinite(v)) throw ArgumentError("embedding contains a non-finite value");
    sq += static_cast<double>(v) * v;
  }
  if (values.empty() || std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
    throw ArgumentError("embedding is not unit length");
  }
  return EmbeddingVector(std::move(values));
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ArgumentError("dimension mismatch");
  // Four independent accumulators keep the FP add chain short.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  const std::size_t n = a.size();
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * b[i];
    s1 += static_cast<double>(a[i + 1]) * b[i + 1];
    s2 += static_cast<double>(a[i + 2]) * b[i + 2];
    s3 += static_cast<double>(a[i + 3]) * b[i + 3];
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
  return (s0 + s1) + (s2 + s3);
}

HashedBowEmbedder::HashedBowEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw ArgumentError("embedding dimension must be positive");
}

std::string HashedBowEmbedder::id() const {
  return "hashed-bow:" + std::to_string(dim_) + ":" + std::to_string(seed_);
}

std::size_t HashedBowEmbedder::bucket(std::string_view word) const { return fnv1a64(word, seed_) % dim_; }

EmbeddingVector HashedBowEmbedder::embed_one(std::string_view text) const {
  auto words = normalized_words(text);
  std::vector<std::string> features;
  for (auto& w : words) {
    if (!is_stopword(w)) features.push_back(w);
  }
  if (features.empty()) features = std::move(words);
  if (features.empty()) features = tokenize(text);
  if (features.empty()) throw ArgumentError("cannot embed empty text");

  std::map<std::string, int> tf;
  for (const auto& f : features) ++tf[f];
  std::vector<float> values(dim_, 0.0f);
  for (const auto& [word, count] : tf) {
    values[bucket(word)] += static_cast<float>(1.0 + std::log(static_cast<double>(count)));
  }
  return EmbeddingVector::normalized(std::move(values));
}

std::vector<EmbeddingVector> HashedBowEmbedder::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

ExternalEmbeddingProvider::ExternalEmbeddingProvider(std::shared_ptr<HttpTransport> transport,
                                                     ExternalEmbeddingConfig config, RetryPolicy retry)
    : transport_(std::move(transport)), config_(std::move(config)), retry_(retry) {
  if (config_.batch_size == 0) throw ConfigError("embedding batch_size must be positive");
  config_.batch_size = std::min<std::size_t>(config_.batch_size, 64);
  if (config_.expected_dim) dim_ = *config_.expected_dim;
}

std::size_t ExternalEmbeddingProvider::dim() {
  if (dim_ == 0) {
    const std::string probe = "dimension probe";
    request(std::span<const std::string>(&probe, 1));
  }
  return dim_;
}

bool ExternalEmbeddingProvider::reachable() const {
  return transport_->reachable(std::chrono::milliseconds(config_.timeout_ms));
}

std::vector<EmbeddingVector> ExternalEmbeddingProvider::request(std::span<const std::string> texts) {
  const auto payload = json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}}.dump();
  return with_retry(retry_, "embedding request", [&] {
    const auto res = transport_->post_json(payload, std::chrono::milliseconds(config_.timeout_ms));
    const json body = json::parse(res.body, nullptr, false);
    if (!body.is_object() || !body.contains("vectors") || !body["vectors"].is_array()) {
      throw ProviderError("embedding response lacks a \"vectors\" array");
    }
    const auto& vectors = body["vectors"];
    if (vectors.size() != texts.size()) throw ProviderError("embedding response has the wrong number of vectors");
    std::size_t announced = body.contains("dim") && body["dim"].is_number_unsigned() ? body["dim"].get<std::size_t>() : 0;
    std::vector<EmbeddingVector> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) {
      std::vector<float> values;
      try {
        values = v.get<std::vector<float>>();
      } catch (const json::exception&) {
        throw ProviderError("embedding vector is not an array of numbers");
      }
      if (announced == 0) announced = values.size();
      if (values.size() != announced) throw ProviderError("embedding vector length disagrees with announced dim");
      try {
        out.push_back(EmbeddingVector::normalized(std::move(values)));
      } catch (const ArgumentError& e) {
        throw ProviderError(std::string("bad embedding from service: ") + e.what());
      }
    }
    std::size_t expected = 0;
    if (!dim_.compare_exchange_strong(expected, announced) && expected != announced) {
      throw ProviderError("embedding service changed dimension from " + std::to_string(expected) + " to " +
                          std::to_string(announced));
    }
    return out;
  });
}

std::vector<EmbeddingVector> ExternalEmbeddingProvider::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); i += config_.batch_size) {
    auto part = request(texts.subspan(i, std::min(config_.batch_size, texts.size() - i)));
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

EmbeddingVector embed(std::string_view text, EmbeddingProvider& provider) {
  if (trim(text).empty()) throw ArgumentError("cannot embed empty text");
  const std::string owned(text);
  auto vectors = provider.embed_batch(std::span<const std::string>(&owned, 1));
  if (vectors.size() != 1) throw ProviderError("embedding provider returned no vector");
  return std::move(vectors.front());
}

}  // namespace memagent
