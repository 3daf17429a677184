// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "speedfit/recognizer.hpp"

// Recognizer adapter wire protocol, version 1. Newline-delimited JSON over
// the adapter's stdin/stdout:
//   adapter -> {"v":1,"op":"hello","supports_posteriors":bool,"max_concurrent":int}
//   client  -> {"v":1,"id":s,"op":"recognize","sample_rate":16000,
//               "pcm16le_b64":s,"want_posteriors":bool}
//   adapter -> {"v":1,"id":s,"transcript":s,"alphabet":[s...],"frame_hop_ms":x,
//               "log_posteriors":[[x...]...]|null,"error":s|null}
// Responses are matched to requests by id and may arrive out of order.

namespace speedfit {

inline constexpr int kProtocolVersion = 1;

class RecognizerError : public std::runtime_error {
 public:
  enum class Kind { Timeout, Malformed, VersionMismatch, Crash, Spawn, Adapter };

  RecognizerError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }
  /// Timeouts and adapter crashes may succeed when retried against a fresh adapter.
  bool retriable() const { return kind_ == Kind::Timeout || kind_ == Kind::Crash; }

 private:
  Kind kind_;
};

std::string to_string(RecognizerError::Kind kind);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on characters outside the base64 alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Little-endian signed 16-bit PCM, base64 encoded.
std::string encode_pcm16_base64(const AudioBuffer& buffer);
AudioBuffer decode_pcm16_base64(std::string_view text, int sample_rate);

nlohmann::json make_recognize_request(const std::string& id, const AudioBuffer& buffer, bool want_posteriors);
/// Parses one response object. Throws RecognizerError (Malformed,
/// VersionMismatch or Adapter).
RecognitionResult parse_recognize_response(const nlohmann::json& response);

struct RemoteOptions {
  std::chrono::milliseconds timeout{30000};
  bool want_posteriors = true;
};

/// Client for an adapter process started with /bin/sh -c <command>.
/// Requests beyond the adapter's max_concurrent block until a slot frees.
class RemoteRecognizer final : public Recognizer {
 public:
  explicit RemoteRecognizer(const std::string& command, RemoteOptions opts = {});
  ~RemoteRecognizer() override;

  RemoteRecognizer(const RemoteRecognizer&) = delete;
  RemoteRecognizer& operator=(const RemoteRecognizer&) = delete;

  RecognitionResult recognize(const AudioBuffer& buffer) override;
  RecognizerCapabilities capabilities() const override { return caps_; }
  /// Alphabet reported by the most recent response (empty before the first).
  std::vector<std::string> alphabet() const override;

  int pid() const { return pid_; }

 private:
  void reader_loop();
  void shutdown();
  void write_line(const std::string& line);

  RemoteOptions opts_;
  RecognizerCapabilities caps_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;

  std::thread reader_;
  std::atomic<bool> stop_{false};
  mutable std::mutex mu_;
  std::mutex write_mu_;
  std::map<std::string, std::promise<nlohmann::json>> pending_;
  std::promise<nlohmann::json> hello_;
  bool got_hello_ = false;
  bool dead_ = false;
  std::string dead_reason_;
  RecognizerError::Kind dead_kind_ = RecognizerError::Kind::Crash;
  std::uint64_t next_id_ = 0;
  std::vector<std::string> alphabet_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace speedfit
