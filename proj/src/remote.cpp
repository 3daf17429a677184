// SPDX-License-Identifier: Apache-2.0
#include "speedfit/remote.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>

namespace speedfit {

std::string to_string(RecognizerError::Kind kind) {
  switch (kind) {
    case RecognizerError::Kind::Timeout: return "timeout";
    case RecognizerError::Kind::Malformed: return "malformed_response";
    case RecognizerError::Kind::VersionMismatch: return "version_mismatch";
    case RecognizerError::Kind::Crash: return "adapter_crash";
    case RecognizerError::Kind::Spawn: return "spawn_failure";
    case RecognizerError::Kind::Adapter: return "adapter_error";
  }
  return "unknown";
}

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(kB64[(v >> 6) & 63]);
    out.push_back(kB64[v & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(kB64[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) throw std::invalid_argument("misplaced base64 padding");
        vals[k] = 0;
        ++pad;
      } else {
        if (pad > 0) throw std::invalid_argument("misplaced base64 padding");
        vals[k] = b64_value(c);
        if (vals[k] < 0) throw std::invalid_argument("invalid base64 character");
      }
    }
    const std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

std::string encode_pcm16_base64(const AudioBuffer& buffer) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(buffer.size() * 2);
  for (float s : buffer.samples) {
    const auto v = static_cast<std::uint16_t>(to_pcm16(s));
    bytes.push_back(static_cast<std::uint8_t>(v & 0xFF));
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  return base64_encode(bytes);
}

AudioBuffer decode_pcm16_base64(std::string_view text, int sample_rate) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 2 != 0) throw std::invalid_argument("PCM payload has an odd byte count");
  AudioBuffer out;
  out.sample_rate_hz = sample_rate;
  out.samples.resize(bytes.size() / 2);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const auto v = static_cast<std::int16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    out.samples[i] = from_pcm16(v);
  }
  return out;
}

nlohmann::json make_recognize_request(const std::string& id, const AudioBuffer& buffer, bool want_posteriors) {
  return {{"v", kProtocolVersion},
          {"id", id},
          {"op", "recognize"},
          {"sample_rate", buffer.sample_rate_hz},
          {"pcm16le_b64", encode_pcm16_base64(buffer)},
          {"want_posteriors", want_posteriors}};
}

RecognitionResult parse_recognize_response(const nlohmann::json& r) {
  using Kind = RecognizerError::Kind;
  if (!r.is_object()) throw RecognizerError(Kind::Malformed, "response is not a JSON object");
  if (!r.contains("v") || !r["v"].is_number_integer()) throw RecognizerError(Kind::Malformed, "response missing \"v\"");
  if (r["v"].get<int>() != kProtocolVersion) {
    throw RecognizerError(Kind::VersionMismatch, "adapter speaks protocol v" + r["v"].dump());
  }
  if (r.contains("error") && !r["error"].is_null()) {
    throw RecognizerError(Kind::Adapter, "adapter error: " + r["error"].dump());
  }
  for (const char* field : {"id", "transcript", "alphabet", "frame_hop_ms"}) {
    if (!r.contains(field)) throw RecognizerError(Kind::Malformed, std::string("response missing \"") + field + "\"");
  }
  if (!r["transcript"].is_string() || !r["alphabet"].is_array() || !r["frame_hop_ms"].is_number()) {
    throw RecognizerError(Kind::Malformed, "response field has the wrong type");
  }

  RecognitionResult out;
  try {
    out.transcript = r["transcript"].get<std::string>();
    out.alphabet = r["alphabet"].get<std::vector<std::string>>();
    if (r.contains("log_posteriors") && !r["log_posteriors"].is_null()) {
      auto post = posteriorgram_from_json(r["alphabet"], r["frame_hop_ms"].get<double>(), r["log_posteriors"]);
      post.validate(1e-3);
      out.alphabet = post.alphabet;
      out.posteriorgram = std::move(post);
    }
  } catch (const RecognizerError&) {
    throw;
  } catch (const std::exception& e) {
    throw RecognizerError(Kind::Malformed, std::string("bad response payload: ") + e.what());
  }
  return out;
}

RemoteRecognizer::RemoteRecognizer(const std::string& command, RemoteOptions opts) : opts_(opts) {
  using Kind = RecognizerError::Kind;
  // A dead adapter must surface as an error from write(), not kill us.
  ::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw RecognizerError(Kind::Spawn, "pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw RecognizerError(Kind::Spawn, "pipe failed");
  }
  pid_ = ::fork();
  if (pid_ < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw RecognizerError(Kind::Spawn, "fork failed");
  }
  if (pid_ == 0) {
    ::setpgid(0, 0);
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  auto hello_future = hello_.get_future();
  reader_ = std::thread([this] { reader_loop(); });

  nlohmann::json hello;
  try {
    if (hello_future.wait_for(opts_.timeout) != std::future_status::ready) {
      throw RecognizerError(Kind::Timeout, "adapter sent no handshake within timeout");
    }
    hello = hello_future.get();
  } catch (const RecognizerError& e) {
    const auto kind = e.kind() == Kind::Crash ? Kind::Spawn : e.kind();
    const std::string what = std::string("adapter failed to start: ") + e.what();
    shutdown();
    throw RecognizerError(kind, what);
  }
  auto fail = [this](Kind kind, const std::string& why) {
    shutdown();
    throw RecognizerError(kind, why);
  };
  if (!hello.is_object() || hello.value("op", "") != "hello") fail(Kind::Malformed, "first adapter line is not a hello");
  if (!hello.contains("v") || hello["v"] != kProtocolVersion) fail(Kind::VersionMismatch, "adapter handshake version " + hello.value("v", nlohmann::json()).dump());
  caps_.supports_posteriors = hello.value("supports_posteriors", false);
  caps_.max_concurrent = std::max(1, hello.value("max_concurrent", 1));
  slots_ = std::make_unique<std::counting_semaphore<>>(caps_.max_concurrent);
}

RemoteRecognizer::~RemoteRecognizer() { shutdown(); }

void RemoteRecognizer::shutdown() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    bool reaped = false;
    for (int i = 0; i < 100 && !reaped; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) reaped = true;
      else std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!reaped) {
      ::kill(-pid_, SIGKILL);
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }
  stop_ = true;
  if (reader_.joinable()) reader_.join();
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
}

std::vector<std::string> RemoteRecognizer::alphabet() const {
  std::lock_guard lock(mu_);
  return alphabet_;
}

void RemoteRecognizer::reader_loop() {
  using Kind = RecognizerError::Kind;
  std::string buf;
  std::array<char, 65536> chunk{};
  while (!stop_) {
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 100);
    if (ready < 0 && errno == EINTR) continue;
    if (ready == 0) continue;
    const ssize_t n = ::read(from_child_, chunk.data(), chunk.size());
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buf.append(chunk.data(), static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buf.find('\n')) != std::string::npos) {
      const std::string line = buf.substr(0, nl);
      buf.erase(0, nl + 1);
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      std::lock_guard lock(mu_);
      if (!got_hello_) {
        got_hello_ = true;
        hello_.set_value(std::move(j));
        continue;
      }
      if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_string()) {
        // Cannot correlate: everyone waiting is affected.
        for (auto& [id, promise] : pending_) {
          promise.set_exception(std::make_exception_ptr(
              RecognizerError(Kind::Malformed, "unparseable adapter line: " + line.substr(0, 80))));
        }
        pending_.clear();
        continue;
      }
      auto it = pending_.find(j["id"].get<std::string>());
      if (it == pending_.end()) continue;  // late reply to a timed-out request
      it->second.set_value(std::move(j));
      pending_.erase(it);
    }
  }
  std::lock_guard lock(mu_);
  dead_ = true;
  dead_reason_ = "adapter exited or closed its output";
  if (!got_hello_) {
    got_hello_ = true;
    hello_.set_exception(std::make_exception_ptr(RecognizerError(Kind::Crash, dead_reason_)));
  }
  for (auto& [id, promise] : pending_) {
    promise.set_exception(std::make_exception_ptr(RecognizerError(Kind::Crash, dead_reason_)));
  }
  pending_.clear();
}

void RemoteRecognizer::write_line(const std::string& line) {
  std::lock_guard lock(write_mu_);
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const ssize_t n = ::write(to_child_, p, left);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw RecognizerError(RecognizerError::Kind::Crash, "adapter input closed");
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

RecognitionResult RemoteRecognizer::recognize(const AudioBuffer& buffer) {
  using Kind = RecognizerError::Kind;
  if (buffer.sample_rate_hz != kCanonicalRate) {
    throw std::invalid_argument("remote recognizer expects 16 kHz audio");
  }
  slots_->acquire();
  struct Release {
    std::counting_semaphore<>* s;
    ~Release() { s->release(); }
  } release{slots_.get()};

  std::string id;
  std::future<nlohmann::json> reply;
  {
    std::lock_guard lock(mu_);
    if (dead_) throw RecognizerError(Kind::Crash, dead_reason_);
    id = "r" + std::to_string(next_id_++);
    reply = pending_[id].get_future();
  }
  const bool want = opts_.want_posteriors && caps_.supports_posteriors;
  try {
    write_line(make_recognize_request(id, buffer, want).dump() + "\n");
  } catch (...) {
    std::lock_guard lock(mu_);
    pending_.erase(id);
    throw;
  }

  if (reply.wait_for(opts_.timeout) != std::future_status::ready) {
    std::lock_guard lock(mu_);
    pending_.erase(id);
    throw RecognizerError(Kind::Timeout, "adapter did not answer request " + id + " within timeout");
  }
  const nlohmann::json response = reply.get();
  auto result = parse_recognize_response(response);
  if (response["id"] != id) throw RecognizerError(Kind::Malformed, "response id mismatch");
  {
    std::lock_guard lock(mu_);
    alphabet_ = result.alphabet;
  }
  return result;
}

std::shared_ptr<Recognizer> make_recognizer(const std::string& selector, const ToneTable& table) {
  if (selector == "mock") return std::make_shared<MockRecognizer>(table);
  const std::string prefix = "adapter:";
  if (selector.rfind(prefix, 0) == 0 && selector.size() > prefix.size()) {
    return std::make_shared<RemoteRecognizer>(selector.substr(prefix.size()));
  }
  throw std::invalid_argument("recognizer must be \"mock\" or \"adapter:<command>\", got \"" + selector + "\"");
}

}  // namespace speedfit
