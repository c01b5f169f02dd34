#include "memagent/capture.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <atomic>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "jsonl.hpp"
#include "memagent/hashing.hpp"
#include "memagent/text.hpp"

namespace memagent {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 12> kStubActions = {
    "is holding", "picks up", "looks at", "walks past", "reaches for", "sets down",
    "is cleaning", "opens",   "closes",   "is using",   "points at",   "moves"};
constexpr std::array<std::string_view, 10> kStubColors = {
    "white", "black", "grey", "green", "yellow", "brown", "orange", "purple", "silver", "pink"};
constexpr std::array<std::string_view, 14> kStubObjects = {
    "bowl",  "towel", "notebook", "bottle", "plate",  "chair",   "lamp",
    "phone", "bag",   "laptop",   "basket", "pillow", "cabinet", "box"};
constexpr std::array<std::string_view, 10> kStubPlaces = {
    "counter", "shelf", "sofa", "desk", "sink", "window", "floor", "doorway", "bed", "stove"};

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& words, std::uint64_t& state) {
  return words[splitmix64(state) % N];
}

bool is_image_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp" || ext == ".ppm" || ext == ".webp";
}

struct SourceFrame {
  double timestamp_s = 0.0;
  std::filesystem::path path;
};

struct SourceVideo {
  std::string video_id;
  std::vector<SourceFrame> frames;  // sorted by timestamp
  double interval_s = 0.0;          // native spacing between source frames
};

// Picks the latest source frame at or before each sample time.
void resample(const SourceVideo& video, double rate_hz, std::vector<Frame>& out) {
  if (video.frames.empty()) return;
  const double duration = video.frames.back().timestamp_s + video.interval_s;
  const std::size_t count = sampled_frame_count(duration, rate_hz);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / rate_hz;
    while (cursor + 1 < video.frames.size() && video.frames[cursor + 1].timestamp_s <= t + 1e-9) ++cursor;
    Frame f;
    f.video_id = video.video_id;
    f.frame_index = i;
    f.timestamp_s = t;
    f.path = video.frames[cursor].path;
    out.push_back(std::move(f));
  }
}

std::vector<SourceVideo> read_manifest(const std::filesystem::path& manifest, double source_fps) {
  std::vector<SourceVideo> videos;
  const auto base = manifest.parent_path();
  detail::for_each_json_line(manifest, [&](const json& j, std::size_t line) {
    const auto video_id = detail::require(j, "video_id", line).get<std::string>();
    const double ts = detail::require(j, "timestamp_s", line).get<double>();
    std::filesystem::path p = detail::require(j, "path", line).get<std::string>();
    if (!std::isfinite(ts) || ts < 0) throw FormatError("timestamp_s must be a non-negative number", line);
    if (p.is_relative()) p = base / p;
    auto it = std::find_if(videos.begin(), videos.end(), [&](const auto& v) { return v.video_id == video_id; });
    if (it == videos.end()) {
      videos.push_back({video_id, {}, 0.0});
      it = std::prev(videos.end());
    }
    it->frames.push_back({ts, std::move(p)});
  });
  for (auto& v : videos) {
    std::stable_sort(v.frames.begin(), v.frames.end(),
                     [](const auto& a, const auto& b) { return a.timestamp_s < b.timestamp_s; });
    // Native spacing is the median gap between listed frames.
    std::vector<double> gaps;
    for (std::size_t i = 1; i < v.frames.size(); ++i) {
      gaps.push_back(v.frames[i].timestamp_s - v.frames[i - 1].timestamp_s);
    }
    if (gaps.empty()) {
      v.interval_s = 1.0 / source_fps;
    } else {
      std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
      v.interval_s = gaps[gaps.size() / 2];
    }
  }
  return videos;
}

SourceVideo read_directory(const std::filesystem::path& dir, double source_fps) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (std::filesystem::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file() && is_image_file(it->path())) files.push_back(it->path());
  }
  if (ec) throw SourceError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  SourceVideo video;
  video.video_id = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  video.interval_s = 1.0 / source_fps;
  video.frames.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    video.frames.push_back({static_cast<double>(i) / source_fps, files[i]});
  }
  return video;
}

}  // namespace

std::string Frame::read_payload() const {
  if (!bytes.empty()) return bytes;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceError("cannot read frame payload " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void CaptionProviderConfig::validate() const {
  if (timeout_ms <= 0) throw ConfigError("caption provider timeout_ms must be > 0");
  if (max_retries < 0) throw ConfigError("caption provider max_retries must be >= 0");
  if (kind == CaptionProviderKind::external_service && endpoint.empty()) {
    throw ConfigError("external caption provider requires an endpoint");
  }
  if (kind == CaptionProviderKind::scripted && script_path.empty()) {
    throw ConfigError("scripted caption provider requires script_path");
  }
}

std::string StubCaptionProvider::describe(const Frame& frame, std::string_view /*prompt*/) {
  std::uint64_t state = fnv1a64(frame.video_id, seed_) ^ (frame.frame_index * 0x9E3779B97F4A7C15ULL);
  const auto action = pick(kStubActions, state);
  const auto color = pick(kStubColors, state);
  const auto object = pick(kStubObjects, state);
  const auto place = pick(kStubPlaces, state);
  std::string text = "A person ";
  text.append(action).append(" a ").append(color).append(" ").append(object);
  text.append(" near the ").append(place).append(".");
  return text;
}

ScriptedCaptionProvider ScriptedCaptionProvider::from_file(const std::filesystem::path& fixture) {
  std::map<std::pair<std::string, std::uint64_t>, std::string> script;
  for (auto& rec : load_caption_fixture(fixture)) {
    script.emplace(std::make_pair(std::move(rec.video_id), rec.frame_index), std::move(rec.text));
  }
  return ScriptedCaptionProvider(std::move(script));
}

std::string ScriptedCaptionProvider::describe(const Frame& frame, std::string_view /*prompt*/) {
  auto it = script_.find({frame.video_id, frame.frame_index});
  if (it == script_.end()) throw ProviderError("no scripted caption for frame");
  return it->second;
}

ExternalCaptionProvider::ExternalCaptionProvider(std::shared_ptr<HttpTransport> transport,
                                                 std::chrono::milliseconds timeout, RetryPolicy retry,
                                                 std::string endpoint_label)
    : transport_(std::move(transport)), timeout_(timeout), retry_(retry), label_(std::move(endpoint_label)) {}

std::string ExternalCaptionProvider::describe(const Frame& frame, std::string_view prompt) {
  const json body = {{"image_b64", base64_encode(frame.read_payload())}, {"prompt", std::string(prompt)}};
  const auto payload = body.dump();
  return with_retry(retry_, "caption request", [&] {
    const auto res = transport_->post_json(payload, timeout_);
    json parsed = json::parse(res.body, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_object() || !parsed.contains("caption") || !parsed["caption"].is_string()) {
      throw ProviderError("caption response lacks a \"caption\" string");
    }
    auto caption = parsed["caption"].get<std::string>();
    if (caption.empty()) throw ProviderError("caption provider returned an empty caption");
    return caption;
  });
}

bool ExternalCaptionProvider::reachable() const { return transport_->reachable(timeout_); }

std::unique_ptr<CaptionProvider> make_caption_provider(const CaptionProviderConfig& config) {
  config.validate();
  switch (config.kind) {
    case CaptionProviderKind::deterministic_stub:
      return std::make_unique<StubCaptionProvider>(config.seed);
    case CaptionProviderKind::scripted:
      return std::make_unique<ScriptedCaptionProvider>(ScriptedCaptionProvider::from_file(config.script_path));
    case CaptionProviderKind::external_service: {
      RetryPolicy retry;
      retry.max_retries = config.max_retries;
      return std::make_unique<ExternalCaptionProvider>(make_http_transport(config.endpoint),
                                                       std::chrono::milliseconds(config.timeout_ms), retry,
                                                       config.endpoint);
    }
  }
  throw ConfigError("unknown caption provider kind");
}

std::size_t sampled_frame_count(double duration_s, double rate_hz) {
  if (!(rate_hz > 0) || !std::isfinite(rate_hz)) throw ArgumentError("rate_hz must be positive");
  if (!(duration_s > 0)) return 0;
  // The epsilon absorbs durations rebuilt from frame spacing (299/30 + 1/30 < 10.0).
  return static_cast<std::size_t>(std::floor(duration_s * rate_hz + 1e-9));
}

std::vector<Frame> sample_frames(const std::filesystem::path& source, double rate_hz, double source_fps) {
  if (!(rate_hz > 0) || !std::isfinite(rate_hz)) throw ArgumentError("rate_hz must be positive");
  if (!(source_fps > 0) || !std::isfinite(source_fps)) throw ArgumentError("source_fps must be positive");
  std::error_code ec;
  const auto status = std::filesystem::status(source, ec);
  if (ec || !std::filesystem::exists(status)) throw SourceError("video source not readable: " + source.string());

  std::vector<Frame> frames;
  if (std::filesystem::is_directory(status)) {
    resample(read_directory(source, source_fps), rate_hz, frames);
  } else {
    for (const auto& video : read_manifest(source, source_fps)) resample(video, rate_hz, frames);
  }
  return frames;
}

CaptionRecord encode_frame(const Frame& frame, CaptionProvider& provider, std::string_view prompt) {
  FrameRef ref{frame.video_id, frame.frame_index};
  std::string text;
  try {
    text = provider.describe(frame, prompt);
  } catch (const ProviderError& e) {
    throw ProviderError(e.what(), ref);
  } catch (const SourceError& e) {
    throw ProviderError(e.what(), ref);
  }
  if (trim(text).empty()) throw ProviderError("caption provider returned an empty caption", ref);
  return {frame.video_id, frame.frame_index, frame.timestamp_s, std::move(text), provider.id()};
}

EncodingResult run_encoding_pipeline(std::span<const Frame> frames, CaptionProvider& provider,
                                     std::size_t worker_count, std::string_view prompt) {
  if (worker_count == 0) throw ArgumentError("worker_count must be >= 1");
  {
    std::vector<std::pair<std::string_view, std::uint64_t>> keys;
    keys.reserve(frames.size());
    for (const auto& f : frames) keys.emplace_back(f.video_id, f.frame_index);
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end()) {
      throw ArgumentError("duplicate (video_id, frame_index) in pipeline input");
    }
  }

  std::vector<std::optional<CaptionRecord>> slots(frames.size());
  std::vector<std::string> errors(frames.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < frames.size(); i = next.fetch_add(1)) {
      try {
        slots[i] = encode_frame(frames[i], provider, prompt);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  {
    const std::size_t n = std::min(worker_count, frames.size());
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (std::size_t w = 0; w < n; ++w) workers.emplace_back(work);
  }

  EncodingResult result;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (slots[i]) {
      result.records.push_back(std::move(*slots[i]));
    } else {
      spdlog::warn("skipping frame {}#{}: {}", frames[i].video_id, frames[i].frame_index, errors[i]);
      result.failures.push_back({frames[i].video_id, frames[i].frame_index, std::move(errors[i])});
    }
  }
  std::sort(result.records.begin(), result.records.end());
  std::sort(result.failures.begin(), result.failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.video_id, a.frame_index) < std::tie(b.video_id, b.frame_index);
  });
  if (!frames.empty() &&
      static_cast<double>(result.records.size()) < kPipelineHealthyRatio * static_cast<double>(frames.size())) {
    result.status = PipelineStatus::degraded;
  }
  return result;
}

std::vector<CaptionRecord> load_caption_fixture(const std::filesystem::path& path) {
  std::vector<CaptionRecord> records;
  detail::for_each_json_line(path, [&](const json& j, std::size_t line) {
    CaptionRecord r;
    r.video_id = detail::require(j, "video_id", line).get<std::string>();
    const auto idx = detail::require(j, "frame_index", line);
    if (!idx.is_number_integer() || idx.get<long long>() < 0) {
      throw FormatError("frame_index must be a non-negative integer", line);
    }
    r.frame_index = idx.get<std::uint64_t>();
    r.timestamp_s = j.value("timestamp_s", static_cast<double>(r.frame_index) / kDefaultSampleRateHz);
    r.text = detail::require(j, "text", line).get<std::string>();
    if (trim(r.text).empty()) throw FormatError("caption text must be non-empty", line);
    r.encoder_id = j.value("encoder_id", std::string("fixture"));
    records.push_back(std::move(r));
  });
  std::stable_sort(records.begin(), records.end());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].video_id == records[i - 1].video_id && records[i].frame_index == records[i - 1].frame_index) {
      throw FormatError("duplicate caption for " + records[i].video_id + "#" +
                        std::to_string(records[i].frame_index));
    }
  }
  return records;
}

void write_caption_fixture(const std::filesystem::path& path, std::span<const CaptionRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw SourceError("cannot write " + path.string());
  for (const auto& r : records) {
    out << json{{"video_id", r.video_id},
                {"frame_index", r.frame_index},
                {"timestamp_s", r.timestamp_s},
                {"text", r.text},
                {"encoder_id", r.encoder_id}}
               .dump()
        << '\n';
  }
}

}  // namespace memagent
