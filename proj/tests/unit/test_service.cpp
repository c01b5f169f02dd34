#include <doctest.h>

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "memagent/http_api.hpp"
#include "memagent/service.hpp"
#include "memagent/text.hpp"
#include "test_support.hpp"

using namespace memagent;
using memagent::testing::data_path;
using memagent::testing::TempDir;
using nlohmann::json;

namespace {

AppConfig offline_config(const std::filesystem::path& store) {
  AppConfig c;
  c.offline = true;
  c.store_path = store;
  return c;
}

std::vector<CaptionRecord> kitchen() { return load_caption_fixture(data_path("fixtures/kitchen_captions.jsonl")); }

std::size_t fixture_tokens() {
  std::size_t n = 0;
  for (const auto& c : kitchen()) n += tokenize(c.text).size();
  return n;
}

MemoryQuery question(const std::string& q, std::size_t k = 0) {
  MemoryQuery m;
  m.question = q;
  m.k = k;
  return m;
}

// Runs an HttpApi on an ephemeral port for the lifetime of the object.
class RunningApi {
 public:
  explicit RunningApi(MemoryService& service) : api_(service) {
    port_ = api_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { api_.listen(); });
    api_.wait_until_ready();
  }
  ~RunningApi() {
    api_.stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  HttpApi api_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("ingesting the 480-caption fixture") {
  TempDir tmp;
  MemoryService service(offline_config(tmp / "m.store"));
  CHECK(service.stats().chunk_count == 0);
  const auto summary = service.ingest_source(data_path("fixtures/kitchen_captions.jsonl"));
  CHECK(summary.captions == 480);
  CHECK(summary.chunks == window_count(fixture_tokens(), {}));
  CHECK(summary.failures.empty());
  const auto stats = service.stats();
  CHECK(stats.chunk_count == summary.chunks);
  CHECK(stats.video_ids == std::vector<std::string>{"kitchen"});
  CHECK(stats.total_caption_tokens == fixture_tokens());
  CHECK(stats.store_file_bytes > 0);
  CHECK_FALSE(stats.ingest_in_progress);
}

TEST_CASE("asking the kitchen memory") {
  TempDir tmp;
  MemoryService service(offline_config(tmp / "m.store"));
  service.ingest_captions(kitchen());
  const auto a = service.ask(question("Where is the red mug?"));
  CHECK(a.text.find("table") != std::string::npos);
  CHECK_FALSE(a.sources.empty());
  CHECK(service.ask(question("Where is the red mug?", 1)).sources.size() <= 1);
  CHECK_THROWS_AS(service.ask(question("   ")), ArgumentError);
  // A reopened memory answers the same way.
  MemoryService reopened(offline_config(tmp / "m.store"));
  CHECK(render_answer(reopened.ask(question("Where is the red mug?"))) == render_answer(a));
}

TEST_CASE("incremental ingestion equals one-shot ingestion") {
  TempDir tmp;
  const auto all = kitchen();
  MemoryService once(offline_config(tmp / "a.store"));
  once.ingest_captions(all);
  MemoryService parts(offline_config(tmp / "b.store"));
  const std::span<const CaptionRecord> span(all);
  parts.ingest_captions(span.subspan(0, 100), /*flush=*/false);
  parts.ingest_captions(span.subspan(100, 250), /*flush=*/false);
  parts.ingest_captions(span.subspan(350));
  const auto a = once.store().chunks();
  const auto b = parts.store().chunks();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK_THROWS_AS(parts.ingest_captions(span.subspan(10, 1)), ArgumentError);
}

TEST_CASE("appending to a persisted memory continues the history") {
  TempDir tmp;
  const auto all = kitchen();
  const std::span<const CaptionRecord> span(all);
  {
    MemoryService first(offline_config(tmp / "m.store"));
    first.ingest_captions(span.subspan(0, 200));
  }
  MemoryService second(offline_config(tmp / "m.store"));
  const auto before = second.stats().chunk_count;
  second.ingest_captions(span.subspan(200));
  const auto chunks = second.store().chunks();
  CHECK(chunks.size() > before);
  for (std::size_t i = 1; i < chunks.size(); ++i) {
    CHECK(chunks[i].metadata.chunk_index == chunks[i - 1].metadata.chunk_index + 1);
    CHECK(chunks[i].chunk_id == chunks[i - 1].chunk_id + 1);
  }
  CHECK(second.stats().total_caption_tokens == fixture_tokens());
}

TEST_CASE("frame sources go through the stub captioner") {
  TempDir tmp;
  std::filesystem::create_directories(tmp / "clip");
  for (int i = 0; i < 60; ++i) memagent::testing::write_file(tmp / "clip" / ("f" + std::to_string(100 + i) + ".png"), "x");
  MemoryService service(offline_config(tmp / "m.store"));
  const auto summary = service.ingest_source(tmp / "clip");
  CHECK(summary.frames == 8);  // 2 s at 30 fps, sampled at 4 Hz
  CHECK(summary.captions == 8);
  CHECK(summary.chunks == 1);
  CHECK(service.stats().video_ids == std::vector<std::string>{"clip"});
}

TEST_CASE("empty manifest gives an empty summary") {
  TempDir tmp;
  memagent::testing::write_file(tmp / "empty.jsonl", "\n");
  MemoryService service(offline_config(tmp / "m.store"));
  const auto s = service.ingest_source(tmp / "empty.jsonl");
  CHECK(s.frames == 0);
  CHECK(s.captions == 0);
  CHECK(s.chunks == 0);
  CHECK(s.failures.empty());
}

TEST_CASE("unreachable external providers fail at startup") {
  AppConfig c;
  c.store_path.clear();
  c.chat.kind = ChatKind::external;
  c.chat.endpoint = "http://127.0.0.1:1/chat";
  c.chat.timeout_ms = 200;
  CHECK_THROWS_AS(MemoryService{c}, ConfigError);
  c.offline = true;
  CHECK_THROWS_AS(MemoryService{c}, ConfigError);  // mode exclusivity
}

TEST_CASE("a store with another dimension is rejected") {
  TempDir tmp;
  VectorStore(8).persist(tmp / "m.store");
  CHECK_THROWS_AS(MemoryService(offline_config(tmp / "m.store")), ConfigError);
}

TEST_CASE("http api") {
  TempDir tmp;
  std::filesystem::create_directories(tmp / "console");
  memagent::testing::write_file(tmp / "console" / "index.html", "<!doctype html><title>console</title>");
  auto config = offline_config(tmp / "m.store");
  config.server.static_dir = tmp / "console";
  MemoryService service(config);
  RunningApi api(service);
  auto cli = api.client();

  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");

  auto stats = cli.Get("/stats");
  REQUIRE(stats);
  CHECK(json::parse(stats->body)["chunk_count"] == 0);

  json captions = json::array();
  for (const auto& c : kitchen()) {
    captions.push_back({{"video_id", c.video_id}, {"frame_index", c.frame_index}, {"timestamp_s", c.timestamp_s},
                        {"text", c.text}});
  }
  auto ingest = cli.Post("/ingest/captions", json{{"captions", captions}}.dump(), "application/json");
  REQUIRE(ingest);
  CHECK(ingest->status == 200);
  const auto summary = json::parse(ingest->body);
  stats = cli.Get("/stats");
  CHECK(json::parse(stats->body)["chunk_count"] == summary["chunks"]);

  auto ask = cli.Post("/ask", R"({"question":"Where is the red mug?"})", "application/json");
  REQUIRE(ask);
  CHECK(ask->status == 200);
  const auto body = json::parse(ask->body);
  CHECK(body["answer"].get<std::string>().find("table") != std::string::npos);
  CHECK(body["sources"].size() >= 1);
  CHECK(body["sources"][0].contains("t_start_s"));
  CHECK(body["provider_id"] == "extractive");
  CHECK(body == answer_to_json(service.ask(question("Where is the red mug?"))));

  auto one = cli.Post("/ask", R"({"question":"Where is the red mug?","k":1})", "application/json");
  CHECK(json::parse(one->body)["sources"].size() <= 1);

  for (const char* bad : {R"({"question":"  "})", R"({"question":"x","k":0})", R"({"question":"x","k":"2"})",
                          "not json", R"({"question":7})"}) {
    auto res = cli.Post("/ask", bad, "application/json");
    REQUIRE(res);
    CAPTURE(bad);
    CHECK(res->status == 400);
    const auto err = json::parse(res->body);
    CHECK(err.contains("error"));
    CHECK(err.contains("detail"));
    CHECK(err.contains("hint"));
  }

  auto index = cli.Get("/index.html");
  REQUIRE(index);
  CHECK(index->status == 200);
  CHECK(index->body.find("console") != std::string::npos);
}
