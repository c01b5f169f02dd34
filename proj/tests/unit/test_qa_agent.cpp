#include <doctest.h>

#include "memagent/capture.hpp"
#include "memagent/qa_agent.hpp"
#include "memagent/service.hpp"
#include "memagent/text.hpp"
#include "test_support.hpp"

using namespace memagent;

namespace {

class ScriptedChat final : public ChatProvider {
 public:
  explicit ScriptedChat(bool up) : up_(up) {}
  std::string complete(const std::string& prompt) override {
    last_prompt = prompt;
    if (!up_) throw ProviderError("connection refused");
    return "It is on the table.";
  }
  std::string id() const override { return "chat:scripted"; }
  std::string last_prompt;

 private:
  bool up_;
};

Chunk chunk(std::string text, const std::string& video, double t0, double t1) {
  Chunk c;
  c.text = std::move(text);
  c.token_count = tokenize(c.text).size();
  c.metadata.video_id = video;
  c.metadata.t_start_s = t0;
  c.metadata.t_end_s = t1;
  return c;
}

VectorStore kitchen_store(HashedBowEmbedder& embedder) {
  VectorStore store(embedder.dim());
  const auto captions = load_caption_fixture(memagent::testing::data_path("fixtures/kitchen_captions.jsonl"));
  ingest_into_store(store, embedder, captions, {});
  return store;
}

}  // namespace

TEST_CASE("a chunk identical to the question ranks first with score 1") {
  HashedBowEmbedder embedder;
  VectorStore store(embedder.dim());
  const std::string q = "Where did I leave the car keys?";
  for (const auto* text : {"I open the fridge.", "Where did I leave the car keys?", "The dog sleeps."}) {
    store.upsert({chunk(text, "a", 0, 1), embed(text, embedder)});
  }
  MemoryQuery query;
  query.question = q;
  const auto ctx = retrieve(query, store, embedder);
  REQUIRE_FALSE(ctx.hits.empty());
  CHECK(ctx.hits[0].chunk.text == q);
  CHECK(ctx.hits[0].score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(ctx.hits.size() == 3);
}

TEST_CASE("empty store retrieves nothing") {
  HashedBowEmbedder embedder;
  VectorStore store(embedder.dim());
  MemoryQuery query;
  query.question = "anything?";
  const auto ctx = retrieve(query, store, embedder);
  CHECK(ctx.hits.empty());
  CHECK(ctx.total_context_tokens == 0);
  const auto a = answer(query, store, embedder);
  CHECK(a.text == "no memory available");
  CHECK(a.sources.empty());
}

TEST_CASE("query validation") {
  HashedBowEmbedder embedder;
  VectorStore store(embedder.dim());
  MemoryQuery query;
  query.question = "  ";
  CHECK_THROWS_AS(retrieve(query, store, embedder), ArgumentError);
  query.question = "ok?";
  query.k = 0;
  CHECK_THROWS_AS(retrieve(query, store, embedder), ArgumentError);
}

TEST_CASE("kitchen fixture: the red mug chunk ranks first") {
  HashedBowEmbedder embedder;
  const auto store = kitchen_store(embedder);
  MemoryQuery query;
  query.question = "Where is the red mug?";
  const auto ctx = retrieve(query, store, embedder);
  REQUIRE_FALSE(ctx.hits.empty());
  CHECK(ctx.hits[0].chunk.text.find("red mug") != std::string::npos);
}

TEST_CASE("kitchen fixture: extractive answer is the planted sentence") {
  HashedBowEmbedder embedder;
  const auto store = kitchen_store(embedder);
  MemoryQuery query;
  query.question = "Where is the red mug?";
  const auto a = answer(query, store, embedder);
  CHECK(a.text == "A person places a red mug on the wooden table.");
  CHECK(a.provider_id == "extractive");
  CHECK_FALSE(a.fallback_used);
  CHECK(a.warning.empty());
  CHECK(a.sources.size() == 4);
  CHECK(a.sources[0].video_id == "kitchen");
  CHECK(a.sources[0].t_start_s <= 25 / 4.0);
  CHECK(a.sources[0].t_end_s >= 25 / 4.0);
}

TEST_CASE("chat provider answers when up and falls back when down") {
  HashedBowEmbedder embedder;
  const auto store = kitchen_store(embedder);
  MemoryQuery query;
  query.question = "Where is the red mug?";
  query.k = 2;

  ScriptedChat up(true);
  const auto a = answer(query, store, embedder, &up);
  CHECK(a.text == "It is on the table.");
  CHECK(a.provider_id == "chat:scripted");
  CHECK(up.last_prompt.find("red mug") != std::string::npos);
  CHECK(up.last_prompt.find("Question: Where is the red mug?") != std::string::npos);

  ScriptedChat down(false);
  const auto b = answer(query, store, embedder, &down);
  CHECK(b.text == "A person places a red mug on the wooden table.");
  CHECK(b.provider_id == "extractive-fallback");
  CHECK(b.fallback_used);
  CHECK(b.warning.find("connection refused") != std::string::npos);
  CHECK(b.sources.size() == 2);
}

TEST_CASE("empty context prompt carries the sentinel") {
  const auto p = build_prompt({}, "Where is my phone?");
  CHECK(p.find("(no observations were retrieved for this question)") != std::string::npos);
  CHECK(p.find("Question: Where is my phone?") != std::string::npos);
}

TEST_CASE("two hits appear in score order before the question") {
  RetrievedContext ctx;
  ctx.hits.push_back({1, 0.9, chunk("I open the fridge.", "a", 0, 1)});
  ctx.hits.push_back({2, 0.4, chunk("I close the door.", "a", 2, 3)});
  const auto p = build_prompt(ctx, "What did I open?");
  const auto first = p.find("I open the fridge.");
  const auto second = p.find("I close the door.");
  const auto question = p.find("What did I open?");
  REQUIRE(first != std::string::npos);
  REQUIRE(second != std::string::npos);
  CHECK(first < second);
  CHECK(second < question);
}

TEST_CASE("placeholders inside substituted text are not expanded") {
  RetrievedContext ctx;
  ctx.hits.push_back({1, 0.9, chunk("literal {question} text", "a", 0, 1)});
  const auto p = build_prompt(ctx, "q {context}", "{context}|{question}");
  CHECK(p == "[video a @ 0.00s–1.00s] literal {question} text|q {context}");
}

TEST_CASE("one-hit prompt matches the golden file") {
  RetrievedContext ctx;
  ctx.hits.push_back({0, 0.8123, chunk("A person places a red mug on the wooden table. I walk to the sink.", "kitchen",
                                       6.25, 12.5)});
  const auto golden = memagent::testing::read_file(memagent::testing::data_path("golden/prompt_one_hit.txt"));
  CHECK(build_prompt(ctx, "Where is the red mug?") == golden);
}

TEST_CASE("timestamp marker") {
  ChunkMetadata m;
  m.video_id = "v7";
  m.t_start_s = 1.005;
  m.t_end_s = 61.5;
  CHECK(timestamp_marker(m) == "[video v7 @ 1.00s–61.50s]");
}

TEST_CASE("budget drops the lowest-scoring hits whole") {
  RetrievedContext ctx;
  ctx.hits.push_back({1, 0.9, chunk("a b c d", "a", 0, 1)});
  ctx.hits.push_back({2, 0.5, chunk("e f g", "a", 0, 1)});
  ctx.hits.push_back({3, 0.1, chunk("h i", "a", 0, 1)});
  ctx.total_context_tokens = 9;
  const auto fitted = fit_to_budget(ctx, 7);
  REQUIRE(fitted.hits.size() == 2);
  CHECK(fitted.total_context_tokens == 7);
  CHECK(fit_to_budget(ctx, 9).hits.size() == 3);
  CHECK(fit_to_budget(ctx, 3).hits.empty());
}

TEST_CASE("extractive answer ties go to the earliest sentence") {
  RetrievedContext ctx;
  ctx.hits.push_back({1, 0.9, chunk("The mug is blue. The mug is red. Nothing here.", "a", 0, 1)});
  CHECK(extractive_answer(ctx, "Which mug?") == "The mug is blue.");
  CHECK(extractive_answer(ctx, "Is the red mug here?") == "The mug is red.");
  CHECK(extractive_answer(ctx, "zebra?") == "The mug is blue.");
  CHECK(extractive_answer({}, "zebra?").empty());
}
