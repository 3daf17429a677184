// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "speedfit/audio.hpp"

namespace speedfit {

enum class SegmentLabel { Speech, NonSpeech };

std::string to_string(SegmentLabel label);
SegmentLabel segment_label_from_string(const std::string& s);

/// Contiguous cover of [0, len) by half-open segments.
/// boundaries.size() == labels.size() + 1, boundaries.front() == 0.
struct SegmentMap {
  std::vector<std::size_t> boundaries{0};
  std::vector<SegmentLabel> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t start(std::size_t i) const { return boundaries[i]; }
  std::size_t end(std::size_t i) const { return boundaries[i + 1]; }
  std::size_t length(std::size_t i) const { return end(i) - start(i); }
  std::size_t total_length() const { return boundaries.back(); }

  /// Throws std::invalid_argument when the map is not a contiguous cover.
  void validate() const;
};

nlohmann::json to_json(const SegmentMap& map);
SegmentMap segment_map_from_json(const nlohmann::json& j);

/// Equal-interval grid; every segment is labeled speech. Requires
/// interval_ms >= 10 and a non-empty buffer.
SegmentMap split_equal(const AudioBuffer& buffer, double interval_ms);

struct VadConfig {
  double frame_ms = 20.0;
  double energy_threshold_db = -40.0;
  int hangover_frames = 5;
};

/// Energy VAD: a frame is speech iff its RMS (dBFS) exceeds the threshold;
/// each speech frame extends speech over the next `hangover_frames` frames.
SegmentMap detect_voice(const AudioBuffer& buffer, const VadConfig& cfg = {});

/// Relabels a grid from a VAD map: a grid segment is speech if it overlaps any
/// speech region of `voice`.
SegmentMap label_from_voice(const SegmentMap& grid, const SegmentMap& voice);

/// Sample count for a millisecond duration at `rate_hz`, rounded to nearest.
std::size_t ms_to_samples(double ms, int rate_hz);

}  // namespace speedfit
