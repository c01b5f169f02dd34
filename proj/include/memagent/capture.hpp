#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "memagent/http_client.hpp"

namespace memagent {

inline constexpr double kDefaultSampleRateHz = 4.0;
inline constexpr std::string_view kDefaultDescriptorPrompt = "Describe this image in detail.";

struct Frame {
  std::string video_id;
  std::uint64_t frame_index = 0;
  double timestamp_s = 0.0;  // frame_index / sample rate
  std::filesystem::path path;
  std::string bytes;  // inline payload; when empty the payload is read from `path`

  std::string read_payload() const;
};

// One frame's language encoding.
struct CaptionRecord {
  std::string video_id;
  std::uint64_t frame_index = 0;
  double timestamp_s = 0.0;
  std::string text;
  std::string encoder_id;

  friend bool operator<(const CaptionRecord& a, const CaptionRecord& b) {
    return std::tie(a.video_id, a.frame_index) < std::tie(b.video_id, b.frame_index);
  }
  friend bool operator==(const CaptionRecord&, const CaptionRecord&) = default;
};

enum class CaptionProviderKind { external_service, deterministic_stub, scripted };

struct CaptionProviderConfig {
  CaptionProviderKind kind = CaptionProviderKind::deterministic_stub;
  std::string endpoint;  // external_service only
  std::string descriptor_prompt{kDefaultDescriptorPrompt};
  int timeout_ms = 30000;
  int max_retries = 2;
  std::uint64_t seed = 0;           // deterministic_stub
  std::filesystem::path script_path;  // scripted

  // Throws ConfigError.
  void validate() const;
};

// Frame -> text. Implementations must be callable from several workers at once.
class CaptionProvider {
 public:
  virtual ~CaptionProvider() = default;
  virtual std::string describe(const Frame& frame, std::string_view prompt) = 0;
  virtual std::string id() const = 0;
};

// Template caption that is a pure function of (video_id, frame_index, seed).
class StubCaptionProvider final : public CaptionProvider {
 public:
  explicit StubCaptionProvider(std::uint64_t seed = 0) : seed_(seed) {}
  std::string describe(const Frame& frame, std::string_view prompt) override;
  std::string id() const override { return "stub:" + std::to_string(seed_); }

 private:
  std::uint64_t seed_;
};

// Replays captions from a caption fixture; unknown frames raise ProviderError.
class ScriptedCaptionProvider final : public CaptionProvider {
 public:
  explicit ScriptedCaptionProvider(std::map<std::pair<std::string, std::uint64_t>, std::string> script)
      : script_(std::move(script)) {}
  static ScriptedCaptionProvider from_file(const std::filesystem::path& fixture);

  std::string describe(const Frame& frame, std::string_view prompt) override;
  std::string id() const override { return "scripted"; }

 private:
  std::map<std::pair<std::string, std::uint64_t>, std::string> script_;
};

// POST {image_b64, prompt} -> {caption}, with timeout and exponential-backoff retry.
class ExternalCaptionProvider final : public CaptionProvider {
 public:
  ExternalCaptionProvider(std::shared_ptr<HttpTransport> transport, std::chrono::milliseconds timeout,
                          RetryPolicy retry, std::string endpoint_label = "external");
  std::string describe(const Frame& frame, std::string_view prompt) override;
  std::string id() const override { return "external:" + label_; }
  bool reachable() const;

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::chrono::milliseconds timeout_;
  RetryPolicy retry_;
  std::string label_;
};

std::unique_ptr<CaptionProvider> make_caption_provider(const CaptionProviderConfig& config);

// floor(duration_s * rate_hz)
std::size_t sampled_frame_count(double duration_s, double rate_hz);

// `source` is a directory of pre-extracted images (sorted by file name, spaced
// at `source_fps`) or a JSON-lines frame manifest. Frames are resampled to
// `rate_hz`; frame_index restarts at 0 for every video in the source.
std::vector<Frame> sample_frames(const std::filesystem::path& source, double rate_hz = kDefaultSampleRateHz,
                                 double source_fps = 30.0);

// Throws ProviderError carrying the frame identity; empty captions count as errors.
CaptionRecord encode_frame(const Frame& frame, CaptionProvider& provider,
                           std::string_view prompt = kDefaultDescriptorPrompt);

struct FrameFailure {
  std::string video_id;
  std::uint64_t frame_index = 0;
  std::string message;
};

enum class PipelineStatus { ok, degraded };

struct EncodingResult {
  std::vector<CaptionRecord> records;
  std::vector<FrameFailure> failures;
  PipelineStatus status = PipelineStatus::ok;
};

// Fraction of frames that must encode for the run to count as healthy.
inline constexpr double kPipelineHealthyRatio = 0.95;

// At most `worker_count` provider calls are in flight. Failed frames are
// skipped and reported; output is ordered by (video_id, frame_index).
EncodingResult run_encoding_pipeline(std::span<const Frame> frames, CaptionProvider& provider,
                                     std::size_t worker_count,
                                     std::string_view prompt = kDefaultDescriptorPrompt);

// Caption fixture: JSON lines {"video_id","frame_index","timestamp_s"?,"text","encoder_id"?}.
std::vector<CaptionRecord> load_caption_fixture(const std::filesystem::path& path);
void write_caption_fixture(const std::filesystem::path& path, std::span<const CaptionRecord> records);

}  // namespace memagent
