// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "speedfit/audio.hpp"
#include "speedfit/segmenter.hpp"

namespace speedfit {

inline constexpr double kMinStretchRate = 0.25;
inline constexpr double kMaxStretchRate = 8.0;

/// WSOLA parameters. Defaults: 25 ms Hann windows, half-window hop,
/// +-10 ms similarity search, 5 ms equal-power joins.
struct StretchConfig {
  double window_ms = 25.0;
  double hop_fraction = 0.5;
  double seek_ms = 10.0;
  double crossfade_ms = 5.0;

  void validate() const;
};

struct StretchResult {
  AudioBuffer audio;
  bool fallback = false;  // input shorter than one window; plain resampling used
};

/// Pitch-preserving time-scale modification. Output length is exactly
/// round(in_len / rate); rate 1.0 returns the input unchanged.
StretchResult stretch(const AudioBuffer& buffer, double rate, const StretchConfig& cfg = {});

/// Varispeed: reads the input `rate` times faster by linear interpolation, so
/// pitch shifts with tempo. Same length rule as stretch().
AudioBuffer speed_by_resampling(const AudioBuffer& buffer, double rate);

struct ScheduleEntry {
  std::size_t start = 0;
  std::size_t end = 0;
  double rate = 1.0;

  bool operator==(const ScheduleEntry&) const = default;
};

/// Per-segment playback rates; rate r shortens a segment to len / r.
struct SpeedSchedule {
  std::vector<ScheduleEntry> entries;

  std::size_t size() const { return entries.size(); }
  /// Unweighted mean of rates.
  double mean_rate() const;
  /// Mean rate weighted by source duration.
  double weighted_mean_rate() const;
  std::vector<double> rates() const;
  /// Throws std::invalid_argument unless entries tile [0, total) contiguously.
  void validate(std::size_t total) const;

  static SpeedSchedule from_segments(const SegmentMap& segments, const std::vector<double>& rates);
  static SpeedSchedule constant(std::size_t total, double rate);

  bool operator==(const SpeedSchedule&) const = default;
};

nlohmann::json to_json(const SpeedSchedule& schedule);
SpeedSchedule speed_schedule_from_json(const nlohmann::json& j);

struct TimeMapPoint {
  std::size_t out_sample = 0;
  std::size_t in_sample = 0;
};

/// Piecewise-linear output -> source mapping, knots at segment endpoints.
struct TimeMap {
  std::vector<TimeMapPoint> points;

  double source_at(double out_sample) const;
  std::string to_csv() const;
};

struct RenderResult {
  AudioBuffer audio;
  TimeMap time_map;
  std::size_t fallback_segments = 0;
};

/// Renders schedules over one source buffer. Segments are stretched
/// independently and joined with equal-power crossfades; each piece carries a
/// tail of extra source so the crossfade overlaps real continuation rather
/// than silence. Pieces are memoized per (span, rate), which makes repeated
/// evaluation of neighboring schedules cheap. Thread-safe.
class ScheduleRenderer {
 public:
  explicit ScheduleRenderer(AudioBuffer source, StretchConfig cfg = {});

  RenderResult render(const SpeedSchedule& schedule);
  const AudioBuffer& source() const { return source_; }
  const StretchConfig& config() const { return cfg_; }

 private:
  using Key = std::tuple<std::size_t, std::size_t, double>;
  std::shared_ptr<const StretchResult> piece(std::size_t start, std::size_t end, double rate);

  AudioBuffer source_;
  StretchConfig cfg_;
  std::mutex mu_;
  std::map<Key, std::shared_ptr<const StretchResult>> cache_;
};

RenderResult render_schedule(const AudioBuffer& buffer, const SpeedSchedule& schedule,
                             const StretchConfig& cfg = {});

/// Step curve of rate against output (playback) time, CSV "time_s,rate".
std::string rate_curve_csv(const SpeedSchedule& schedule, const TimeMap& time_map, int sample_rate_hz);

}  // namespace speedfit
