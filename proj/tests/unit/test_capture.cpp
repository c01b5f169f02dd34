#include <doctest.h>

#include <atomic>
#include <mutex>
#include <set>

#include <json.hpp>

#include "memagent/capture.hpp"
#include "test_support.hpp"

using namespace memagent;
using memagent::testing::TempDir;

namespace {

// Transport double: answers with a canned body or fails the first `failures` calls.
class FakeTransport final : public HttpTransport {
 public:
  explicit FakeTransport(std::string body, int failures = 0) : body_(std::move(body)), failures_(failures) {}
  HttpResponse post_json(const std::string& json_body, std::chrono::milliseconds) override {
    last_request = json_body;
    if (calls++ < failures_) throw ProviderError("connection refused");
    return {200, body_};
  }
  bool reachable(std::chrono::milliseconds) override { return true; }
  std::string last_request;
  std::atomic<int> calls{0};

 private:
  std::string body_;
  int failures_;
};

RetryPolicy fast_retry(int n) {
  RetryPolicy r;
  r.max_retries = n;
  r.initial_backoff = std::chrono::milliseconds(1);
  return r;
}

std::vector<Frame> stub_frames(std::size_t n, const std::string& video = "v") {
  std::vector<Frame> frames;
  for (std::size_t i = 0; i < n; ++i) {
    Frame f;
    f.video_id = video;
    f.frame_index = i;
    f.timestamp_s = static_cast<double>(i) / kDefaultSampleRateHz;
    f.bytes = "jpeg";
    frames.push_back(f);
  }
  return frames;
}

// Stub that fails on a fixed set of frame indices.
class FaultyProvider final : public CaptionProvider {
 public:
  explicit FaultyProvider(std::set<std::uint64_t> bad) : bad_(std::move(bad)) {}
  std::string describe(const Frame& f, std::string_view prompt) override {
    if (bad_.count(f.frame_index)) throw ProviderError("injected failure");
    return inner_.describe(f, prompt);
  }
  std::string id() const override { return "faulty"; }

 private:
  std::set<std::uint64_t> bad_;
  StubCaptionProvider inner_{7};
};

void make_frame_dir(const std::filesystem::path& dir, int n) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d.jpg", i);
    memagent::testing::write_file(dir / name, "x");
  }
}

}  // namespace

TEST_CASE("sampled_frame_count") {
  CHECK(sampled_frame_count(10.0, 4.0) == 40);
  CHECK(sampled_frame_count(1.0, 1.0) == 1);
  CHECK(sampled_frame_count(0.0, 4.0) == 0);
  CHECK(sampled_frame_count(120.0, 4.0) == 480);
  CHECK_THROWS_AS(sampled_frame_count(1.0, 0.0), ArgumentError);
  CHECK_THROWS_AS(sampled_frame_count(1.0, -2.0), ArgumentError);
}

TEST_CASE("default sample rate is four frames per second") { CHECK(kDefaultSampleRateHz == 4.0); }

TEST_CASE("sample_frames over a 10 s frame directory at 4 Hz") {
  TempDir tmp;
  make_frame_dir(tmp / "clip", 300);  // 10 s at 30 fps
  const auto frames = sample_frames(tmp / "clip", 4.0, 30.0);
  REQUIRE(frames.size() == 40);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(frames[i].frame_index == i);
    CHECK(frames[i].timestamp_s == doctest::Approx(0.25 * static_cast<double>(i)));
    CHECK(frames[i].video_id == "clip");
  }
  CHECK(frames.back().timestamp_s == doctest::Approx(9.75));
  // Latest source frame at or before t: 9.75 s * 30 fps = source frame 292.
  CHECK(frames.back().path.filename() == "frame_00292.jpg");
}

TEST_CASE("sample_frames over a 1 s source at 1 Hz gives one frame at 0") {
  TempDir tmp;
  make_frame_dir(tmp / "one", 30);
  const auto frames = sample_frames(tmp / "one", 1.0, 30.0);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].timestamp_s == 0.0);
}

TEST_CASE("sample_frames reads a manifest with several videos") {
  TempDir tmp;
  std::string manifest;
  for (int i = 0; i < 20; ++i) {  // video a: 2 s at 10 fps
    manifest += nlohmann::json{{"video_id", "a"}, {"frame_index", i}, {"timestamp_s", i / 10.0},
                               {"path", "a_" + std::to_string(i) + ".jpg"}}.dump() + "\n";
  }
  manifest += "\n";
  for (int i = 0; i < 4; ++i) {  // video b: 2 s at 2 fps
    manifest += nlohmann::json{{"video_id", "b"}, {"frame_index", i}, {"timestamp_s", i / 2.0},
                               {"path", "b.jpg"}}.dump() + "\n";
  }
  memagent::testing::write_file(tmp / "m.jsonl", manifest);
  const auto frames = sample_frames(tmp / "m.jsonl", 4.0);
  REQUIRE(frames.size() == 16);
  CHECK(frames[0].video_id == "a");
  CHECK(frames[8].video_id == "b");
  CHECK(frames[8].frame_index == 0);
  CHECK(frames[1].path == tmp / "a_2.jpg");  // t=0.25 -> source frame at 0.2
  CHECK(frames[9].path == tmp / "b.jpg");
}

TEST_CASE("sample_frames errors") {
  TempDir tmp;
  CHECK_THROWS_AS(sample_frames(tmp / "missing"), SourceError);
  memagent::testing::write_file(tmp / "bad.jsonl", "{\"video_id\":\"a\"}\n");
  CHECK_THROWS_AS(sample_frames(tmp / "bad.jsonl"), FormatError);
  memagent::testing::write_file(tmp / "garbage.jsonl", "{\"video_id\":\"a\",\n");
  try {
    sample_frames(tmp / "garbage.jsonl");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line() == 1);
  }
  CHECK_THROWS_AS(sample_frames(tmp.path(), 0.0), ArgumentError);
  memagent::testing::write_file(tmp / "empty.jsonl", "");
  CHECK(sample_frames(tmp / "empty.jsonl").empty());
}

TEST_CASE("stub captions are deterministic") {
  StubCaptionProvider stub(7);
  Frame f;
  f.video_id = "a";
  f.frame_index = 3;
  const auto first = encode_frame(f, stub);
  const auto second = encode_frame(f, stub);
  CHECK(first.text == second.text);
  CHECK(first.encoder_id == "stub:7");
  CHECK_FALSE(first.text.empty());
  f.frame_index = 4;
  StubCaptionProvider other_seed(8);
  CHECK(encode_frame(f, stub).text != encode_frame(f, other_seed).text);
}

TEST_CASE("scripted provider replays a caption fixture") {
  const auto fixture = memagent::testing::data_path("fixtures/kitchen_captions.jsonl");
  auto scripted = ScriptedCaptionProvider::from_file(fixture);
  // Read line idx=3 directly from the file as the oracle.
  std::ifstream in(fixture);
  std::string line;
  std::string expected;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["frame_index"] == 3) expected = j["text"];
  }
  REQUIRE_FALSE(expected.empty());
  Frame f;
  f.video_id = "kitchen";
  f.frame_index = 3;
  CHECK(encode_frame(f, scripted).text == expected);
  f.frame_index = 9999;
  CHECK_THROWS_AS(encode_frame(f, scripted), ProviderError);
}

TEST_CASE("external provider: request shape, retries, empty caption") {
  Frame f;
  f.video_id = "a";
  f.frame_index = 5;
  f.bytes = "Man";

  auto ok = std::make_shared<FakeTransport>(R"({"caption":"I open the fridge."})", 1);
  ExternalCaptionProvider provider(ok, std::chrono::milliseconds(100), fast_retry(2));
  CHECK(encode_frame(f, provider, "Describe this image in detail.").text == "I open the fridge.");
  CHECK(ok->calls == 2);
  const auto sent = nlohmann::json::parse(ok->last_request);
  CHECK(sent["image_b64"] == "TWFu");
  CHECK(sent["prompt"] == "Describe this image in detail.");

  auto empty = std::make_shared<FakeTransport>(R"({"caption":""})");
  ExternalCaptionProvider empty_provider(empty, std::chrono::milliseconds(100), fast_retry(0));
  try {
    encode_frame(f, empty_provider);
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    REQUIRE(e.frame());
    CHECK(e.frame()->video_id == "a");
    CHECK(e.frame()->frame_index == 5);
  }

  auto down = std::make_shared<FakeTransport>("{}", 100);
  ExternalCaptionProvider down_provider(down, std::chrono::milliseconds(100), fast_retry(2));
  CHECK_THROWS_AS(encode_frame(f, down_provider), ProviderError);
  CHECK(down->calls == 3);
}

TEST_CASE("pipeline output does not depend on worker count") {
  const auto frames = stub_frames(100);
  StubCaptionProvider stub(7);
  const auto one = run_encoding_pipeline(frames, stub, 1);
  const auto eight = run_encoding_pipeline(frames, stub, 8);
  CHECK(one.records.size() == 100);
  CHECK(one.records == eight.records);
  CHECK(one.status == PipelineStatus::ok);
}

TEST_CASE("pipeline skips and reports failed frames") {
  auto frames = stub_frames(100);
  std::reverse(frames.begin(), frames.end());  // input order must not matter
  FaultyProvider faulty({4, 50, 97});
  const auto result = run_encoding_pipeline(frames, faulty, 4);
  CHECK(result.records.size() == 97);
  REQUIRE(result.failures.size() == 3);
  CHECK(result.failures[0].frame_index == 4);
  CHECK(result.failures[1].frame_index == 50);
  CHECK(result.failures[2].frame_index == 97);
  CHECK(result.status == PipelineStatus::ok);
  CHECK(std::is_sorted(result.records.begin(), result.records.end()));

  FaultyProvider mostly_broken({0, 1, 2, 3, 4, 5});
  CHECK(run_encoding_pipeline(stub_frames(100), mostly_broken, 2).status == PipelineStatus::degraded);
}

TEST_CASE("pipeline edge cases") {
  StubCaptionProvider stub;
  const auto empty = run_encoding_pipeline({}, stub, 3);
  CHECK(empty.records.empty());
  CHECK(empty.failures.empty());
  const auto frames = stub_frames(3);
  CHECK_THROWS_AS(run_encoding_pipeline(frames, stub, 0), ArgumentError);
  auto dup = stub_frames(3);
  dup.push_back(dup[1]);
  CHECK_THROWS_AS(run_encoding_pipeline(dup, stub, 2), ArgumentError);
}

TEST_CASE("caption fixture round trip") {
  TempDir tmp;
  std::vector<CaptionRecord> records{{"b", 0, 0.0, "second video", "stub:1"},
                                     {"a", 1, 0.25, "caf\xC3\xA9 \"quoted\"", "stub:1"},
                                     {"a", 0, 0.0, "first", "stub:1"}};
  write_caption_fixture(tmp / "c.jsonl", records);
  const auto loaded = load_caption_fixture(tmp / "c.jsonl");
  std::sort(records.begin(), records.end());
  CHECK(loaded == records);

  memagent::testing::write_file(tmp / "dup.jsonl",
                                "{\"video_id\":\"a\",\"frame_index\":0,\"text\":\"x\"}\n"
                                "{\"video_id\":\"a\",\"frame_index\":0,\"text\":\"y\"}\n");
  CHECK_THROWS_AS(load_caption_fixture(tmp / "dup.jsonl"), FormatError);
  memagent::testing::write_file(tmp / "notext.jsonl", "{\"video_id\":\"a\",\"frame_index\":0}\n");
  CHECK_THROWS_AS(load_caption_fixture(tmp / "notext.jsonl"), FormatError);
}

TEST_CASE("provider config validation") {
  CaptionProviderConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.descriptor_prompt == "Describe this image in detail.");
  cfg.kind = CaptionProviderKind::external_service;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.endpoint = "http://127.0.0.1:1/caption";
  CHECK_NOTHROW(cfg.validate());
  cfg.timeout_ms = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("base64") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("M") == "TQ==");
  CHECK(base64_encode("Ma") == "TWE=");
  CHECK(base64_encode("Man") == "TWFu");
}
