// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace speedfit {

/// Sample rate every pipeline stage after ingest works at.
inline constexpr int kCanonicalRate = 16000;

/// Mono PCM audio. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalRate;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
  std::span<const float> view() const { return samples; }
};

class WavError : public std::runtime_error {
 public:
  enum class Kind { MissingFile, UnsupportedFormat, Truncated, Malformed, Unwritable };

  WavError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Reads RIFF/WAVE with PCM 16-bit or IEEE float 32-bit payload (plain or
/// WAVE_FORMAT_EXTENSIBLE). Multi-channel input is downmixed by channel mean.
/// The file's native sample rate is kept.
AudioBuffer read_wav(const std::filesystem::path& path);

struct WriteReport {
  std::size_t frames = 0;
  std::size_t clipped = 0;  // samples outside [-1, 1] (or non-finite) that were clamped
};

/// Writes 16-bit PCM little-endian mono.
WriteReport write_wav(const AudioBuffer& buffer, const std::filesystem::path& path);

/// Serializes a whole WAV file into memory, same format as write_wav.
std::vector<std::uint8_t> encode_wav(const AudioBuffer& buffer, WriteReport* report = nullptr);

/// Float sample -> int16 with round-to-nearest and clamping. `clipped` is
/// incremented when the input lies outside [-1, 1].
std::int16_t to_pcm16(float sample, std::size_t* clipped = nullptr);
inline float from_pcm16(std::int16_t v) { return static_cast<float>(v) / 32768.0f; }

/// Polyphase windowed-sinc resampler (Kaiser window, 16 taps per phase).
/// Output length is round(in_len * target / source). Identical rates return a copy.
AudioBuffer resample(const AudioBuffer& buffer, int target_hz);

/// Canonical ingest form: 16 kHz, every sample finite and clamped to [-1, 1].
AudioBuffer normalize(const AudioBuffer& buffer);

}  // namespace speedfit
