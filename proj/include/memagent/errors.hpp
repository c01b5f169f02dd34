#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace memagent {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated a precondition (empty text, dimension mismatch, k < 1...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A frame source could not be read.
class SourceError : public Error {
 public:
  using Error::Error;
};

// An on-disk file (store, dataset, manifest) is malformed or has the wrong version.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::optional<std::size_t> line = std::nullopt)
      : Error(line ? what + " (line " + std::to_string(*line) + ")" : what), line_(line) {}

  std::optional<std::size_t> line() const { return line_; }

 private:
  std::optional<std::size_t> line_;
};

// Invalid or inconsistent configuration, including unreachable providers at startup.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct FrameRef {
  std::string video_id;
  std::uint64_t frame_index = 0;
};

// An external or scripted provider failed. Carries the frame identity when the
// failure happened while encoding a frame.
class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what, std::optional<FrameRef> frame = std::nullopt)
      : Error(what), frame_(std::move(frame)) {}

  const std::optional<FrameRef>& frame() const { return frame_; }

 private:
  std::optional<FrameRef> frame_;
};

}  // namespace memagent
