#include <doctest.h>

#include <cmath>
#include <set>

#include <json.hpp>

#include "memagent/embedding.hpp"
#include "memagent/text.hpp"

using namespace memagent;

namespace {

double norm(const EmbeddingVector& v) {
  double s = 0;
  for (float x : v.values()) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

class CannedTransport final : public HttpTransport {
 public:
  explicit CannedTransport(std::function<std::string(const nlohmann::json&)> fn) : fn_(std::move(fn)) {}
  HttpResponse post_json(const std::string& body, std::chrono::milliseconds) override {
    ++calls;
    return {200, fn_(nlohmann::json::parse(body))};
  }
  bool reachable(std::chrono::milliseconds) override { return true; }
  int calls = 0;

 private:
  std::function<std::string(const nlohmann::json&)> fn_;
};

// Echoes one vector per text: e_{len % dim}.
std::string basis_vectors(const nlohmann::json& req, std::size_t dim) {
  nlohmann::json vectors = nlohmann::json::array();
  for (const auto& t : req["texts"]) {
    std::vector<float> v(dim, 0.0f);
    v[t.get<std::string>().size() % dim] = 1.0f;
    vectors.push_back(v);
  }
  return nlohmann::json{{"vectors", vectors}, {"dim", dim}}.dump();
}

}  // namespace

TEST_CASE("EmbeddingVector invariants") {
  const auto v = EmbeddingVector::normalized({3.0f, 4.0f});
  CHECK(v.dim() == 2);
  CHECK(v.values()[0] == doctest::Approx(0.6));
  CHECK(norm(v) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK_THROWS_AS(EmbeddingVector::normalized({0.0f, 0.0f}), ArgumentError);
  CHECK_THROWS_AS(EmbeddingVector::normalized({}), ArgumentError);
  CHECK_THROWS_AS(EmbeddingVector::normalized({NAN, 1.0f}), ArgumentError);
  CHECK_NOTHROW(EmbeddingVector::from_unit({1.0f, 0.0f}));
  CHECK_THROWS_AS(EmbeddingVector::from_unit({1.0f, 1.0f}), ArgumentError);
}

TEST_CASE("dot and cosine") {
  const auto a = EmbeddingVector::from_unit({1.0f, 0.0f});
  const auto b = EmbeddingVector::from_unit({0.0f, 1.0f});
  CHECK(cosine(a, a) == 1.0);
  CHECK(cosine(a, b) == 0.0);
  std::vector<float> x(13), y(13);
  double expected = 0;
  for (int i = 0; i < 13; ++i) {
    x[i] = 0.5f * i;
    y[i] = 1.0f - 0.25f * i;
    expected += static_cast<double>(x[i]) * y[i];
  }
  CHECK(dot(x, y) == doctest::Approx(expected));
}

TEST_CASE("hashed bag of words is deterministic and unit length") {
  HashedBowEmbedder embedder;
  CHECK(embedder.dim() == 256);
  CHECK(embedder.id() == "hashed-bow:256:0");
  const auto a = embed("A person places a red mug on the wooden table.", embedder);
  const auto b = embed("A person places a red mug on the wooden table.", embedder);
  CHECK(a == b);
  CHECK(a.dim() == 256);
  CHECK(norm(a) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("identical normalized text gives identical vectors") {
  HashedBowEmbedder embedder;
  CHECK(embed("Where is the RED mug?", embedder) == embed("where is the red mug", embedder));
}

TEST_CASE("disjoint vocabularies are orthogonal when buckets do not collide") {
  HashedBowEmbedder embedder;
  const std::string left = "fridge opened carton poured";
  const std::string right = "umbrella hallway staircase bicycle";
  std::set<std::size_t> lb, rb;
  for (const auto& w : normalized_words(left)) lb.insert(embedder.bucket(w));
  for (const auto& w : normalized_words(right)) rb.insert(embedder.bucket(w));
  for (auto x : lb) REQUIRE(rb.count(x) == 0);  // the construction's precondition
  CHECK(cosine(embed(left, embedder), embed(right, embedder)) == 0.0);
}

TEST_CASE("stopword-only text still embeds") {
  HashedBowEmbedder embedder;
  const auto v = embed("where is it", embedder);
  CHECK(norm(v) == doctest::Approx(1.0).epsilon(1e-6));
  const auto p = embed("?!", embedder);  // falls back to raw tokens
  CHECK(norm(p) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("empty text is an argument error") {
  HashedBowEmbedder embedder;
  CHECK_THROWS_AS(embed("", embedder), ArgumentError);
  CHECK_THROWS_AS(embed("  \n", embedder), ArgumentError);
}

TEST_CASE("seed changes the hashing") {
  HashedBowEmbedder a(256, 0), b(256, 1);
  CHECK(embed("red mug table", a) != embed("red mug table", b));
}

TEST_CASE("external embedder batches and learns its dimension") {
  auto transport = std::make_shared<CannedTransport>([](const nlohmann::json& req) {
    CHECK(req["texts"].size() <= 64);
    return basis_vectors(req, 8);
  });
  ExternalEmbeddingConfig cfg;
  cfg.endpoint = "fake";
  ExternalEmbeddingProvider provider(transport, cfg);
  std::vector<std::string> texts;
  for (int i = 0; i < 130; ++i) texts.push_back(std::string(static_cast<std::size_t>(i % 8 + 1), 'x'));
  const auto vectors = provider.embed_batch(texts);
  REQUIRE(vectors.size() == 130);
  CHECK(transport->calls == 3);
  CHECK(provider.dim() == 8);
  CHECK(vectors[0].values()[1] == 1.0f);
  CHECK(vectors[129].values()[2] == 1.0f);
}

TEST_CASE("external embedder rejects a changing dimension") {
  std::size_t dim = 4;
  auto transport = std::make_shared<CannedTransport>([&](const nlohmann::json& req) { return basis_vectors(req, dim); });
  ExternalEmbeddingConfig cfg;
  cfg.endpoint = "fake";
  ExternalEmbeddingProvider provider(transport, cfg, RetryPolicy{0});
  CHECK(embed("abc", provider).dim() == 4);
  dim = 6;
  CHECK_THROWS_AS(embed("abc", provider), ProviderError);
}

TEST_CASE("external embedder rejects malformed responses") {
  auto transport = std::make_shared<CannedTransport>([](const nlohmann::json&) { return std::string("{\"nope\":1}"); });
  ExternalEmbeddingConfig cfg;
  cfg.endpoint = "fake";
  cfg.expected_dim = 4;
  ExternalEmbeddingProvider provider(transport, cfg, RetryPolicy{0});
  CHECK_THROWS_AS(embed("abc", provider), ProviderError);
}
