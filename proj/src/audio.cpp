// SPDX-License-Identifier: Apache-2.0
#include "speedfit/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

namespace speedfit {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

std::int16_t to_pcm16(float sample, std::size_t* clipped) {
  if (!std::isfinite(sample)) {
    if (clipped) ++*clipped;
    return 0;
  }
  if (sample > 1.0f || sample < -1.0f) {
    if (clipped) ++*clipped;
  }
  const double scaled = std::nearbyint(static_cast<double>(sample) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw WavError(WavError::Kind::MissingFile, "no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavError::Kind::MissingFile, "cannot open: " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());

  if (bytes.size() < 12) throw WavError(WavError::Kind::Truncated, "file shorter than RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw WavError(WavError::Kind::Malformed, "not a RIFF/WAVE file: " + path.string());
  }

  FmtChunk fmt;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t len = le32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      throw WavError(WavError::Kind::Truncated,
                     "chunk '" + std::string(reinterpret_cast<const char*>(hdr), 4) +
                         "' runs past end of file");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (len < 16) throw WavError(WavError::Kind::Malformed, "fmt chunk too short");
      const std::uint8_t* p = bytes.data() + body;
      fmt.format = le16(p);
      fmt.channels = le16(p + 2);
      fmt.rate = le32(p + 4);
      fmt.bits = le16(p + 14);
      if (fmt.format == kFormatExtensible) {
        if (len < 40) throw WavError(WavError::Kind::Malformed, "extensible fmt chunk too short");
        // First two bytes of the subformat GUID carry the base format tag.
        fmt.format = le16(p + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }

  if (!have_fmt) throw WavError(WavError::Kind::Malformed, "missing fmt chunk");
  if (data == nullptr) throw WavError(WavError::Kind::Truncated, "missing data chunk");
  if (fmt.channels == 0 || fmt.rate == 0) {
    throw WavError(WavError::Kind::Malformed, "fmt chunk has zero channels or rate");
  }
  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool f32 = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !f32) {
    throw WavError(WavError::Kind::UnsupportedFormat,
                   "unsupported codec/bit depth: format " + std::to_string(fmt.format) + ", " +
                       std::to_string(fmt.bits) + " bits");
  }

  const std::size_t sample_bytes = fmt.bits / 8;
  const std::size_t frame_bytes = sample_bytes * fmt.channels;
  if (data_len % frame_bytes != 0) {
    throw WavError(WavError::Kind::Truncated, "data chunk ends mid-frame");
  }
  const std::size_t frames = data_len / frame_bytes;

  AudioBuffer out;
  out.sample_rate_hz = static_cast<int>(fmt.rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt.channels; ++c) {
      const std::uint8_t* p = data + i * frame_bytes + c * sample_bytes;
      if (pcm16) {
        acc += static_cast<double>(static_cast<std::int16_t>(le16(p))) / 32768.0;
      } else {
        const std::uint32_t raw = le32(p);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        acc += v;
      }
    }
    out.samples[i] = static_cast<float>(acc / fmt.channels);
  }
  return out;
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buffer, WriteReport* report) {
  const std::uint32_t data_len = static_cast<std::uint32_t>(buffer.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(buffer.sample_rate_hz));
  put32(out, static_cast<std::uint32_t>(buffer.sample_rate_hz) * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_len);

  std::size_t clipped = 0;
  for (float s : buffer.samples) put16(out, static_cast<std::uint16_t>(to_pcm16(s, &clipped)));
  if (report) {
    report->frames = buffer.size();
    report->clipped = clipped;
  }
  return out;
}

WriteReport write_wav(const AudioBuffer& buffer, const std::filesystem::path& path) {
  WriteReport report;
  const auto bytes = encode_wav(buffer, &report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WavError(WavError::Kind::Unwritable, "cannot write: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WavError(WavError::Kind::Unwritable, "write failed: " + path.string());
  return report;
}

namespace {

constexpr int kTapsPerPhase = 16;
constexpr int kHalfTaps = kTapsPerPhase / 2;
constexpr double kKaiserBeta = 6.0;
constexpr std::int64_t kMaxTabulatedPhases = 4096;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

// Taps for output positions that fall `frac` input samples after the base
// index; tap k multiplies input[base + k - kHalfTaps + 1].
std::array<double, kTapsPerPhase> phase_taps(double frac, double cutoff) {
  static const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
  std::array<double, kTapsPerPhase> taps{};
  double sum = 0.0;
  for (int k = 0; k < kTapsPerPhase; ++k) {
    const double d = static_cast<double>(k - kHalfTaps + 1) - frac;
    const double r = d / kHalfTaps;
    const double w = std::abs(r) >= 1.0
                         ? 0.0
                         : std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
    taps[k] = cutoff * sinc(cutoff * d) * w;
    sum += taps[k];
  }
  if (sum != 0.0) {
    for (double& t : taps) t /= sum;
  }
  return taps;
}

}  // namespace

AudioBuffer resample(const AudioBuffer& buffer, int target_hz) {
  if (target_hz < 4000) throw std::invalid_argument("resample target must be >= 4000 Hz");
  if (buffer.sample_rate_hz <= 0) throw std::invalid_argument("source sample rate must be positive");
  if (target_hz == buffer.sample_rate_hz) return buffer;

  const std::int64_t g = std::gcd<std::int64_t>(target_hz, buffer.sample_rate_hz);
  const std::int64_t up = target_hz / g;
  const std::int64_t down = buffer.sample_rate_hz / g;
  const std::int64_t in_len = static_cast<std::int64_t>(buffer.size());
  const std::int64_t out_len = (in_len * up + down / 2) / down;
  const double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));

  std::vector<std::array<double, kTapsPerPhase>> table;
  if (up <= kMaxTabulatedPhases) {
    table.reserve(static_cast<std::size_t>(up));
    for (std::int64_t p = 0; p < up; ++p) {
      table.push_back(phase_taps(static_cast<double>(p) / static_cast<double>(up), cutoff));
    }
  }

  AudioBuffer out;
  out.sample_rate_hz = target_hz;
  out.samples.resize(static_cast<std::size_t>(out_len));
  const auto& in = buffer.samples;
  for (std::int64_t n = 0; n < out_len; ++n) {
    const std::int64_t t = n * down;
    const std::int64_t base = t / up;
    const std::int64_t phase = t % up;
    const auto taps = table.empty()
                          ? phase_taps(static_cast<double>(phase) / static_cast<double>(up), cutoff)
                          : table[static_cast<std::size_t>(phase)];
    double acc = 0.0;
    for (int k = 0; k < kTapsPerPhase; ++k) {
      const std::int64_t idx = base + k - kHalfTaps + 1;
      if (idx < 0 || idx >= in_len) continue;
      acc += taps[k] * in[static_cast<std::size_t>(idx)];
    }
    out.samples[static_cast<std::size_t>(n)] = static_cast<float>(acc);
  }
  return out;
}

AudioBuffer normalize(const AudioBuffer& buffer) {
  AudioBuffer out = resample(buffer, kCanonicalRate);
  for (float& s : out.samples) {
    s = std::isfinite(s) ? std::clamp(s, -1.0f, 1.0f) : 0.0f;
  }
  return out;
}

}  // namespace speedfit
