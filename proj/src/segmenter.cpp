// SPDX-License-Identifier: Apache-2.0
#include "speedfit/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace speedfit {

std::string to_string(SegmentLabel label) {
  return label == SegmentLabel::Speech ? "speech" : "nonspeech";
}

SegmentLabel segment_label_from_string(const std::string& s) {
  if (s == "speech") return SegmentLabel::Speech;
  if (s == "nonspeech") return SegmentLabel::NonSpeech;
  throw std::invalid_argument("unknown segment label: " + s);
}

void SegmentMap::validate() const {
  if (boundaries.empty() || boundaries.front() != 0) {
    throw std::invalid_argument("segment map must start at sample 0");
  }
  if (boundaries.size() != labels.size() + 1) {
    throw std::invalid_argument("segment map needs one label per segment");
  }
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) {
    if (boundaries[i + 1] <= boundaries[i]) {
      throw std::invalid_argument("segment boundaries must be strictly ascending");
    }
  }
}

nlohmann::json to_json(const SegmentMap& map) {
  nlohmann::json labels = nlohmann::json::array();
  for (auto l : map.labels) labels.push_back(to_string(l));
  return {{"boundaries", map.boundaries}, {"labels", labels}};
}

SegmentMap segment_map_from_json(const nlohmann::json& j) {
  SegmentMap map;
  map.boundaries = j.at("boundaries").get<std::vector<std::size_t>>();
  map.labels.clear();
  for (const auto& l : j.at("labels")) map.labels.push_back(segment_label_from_string(l.get<std::string>()));
  map.validate();
  return map;
}

std::size_t ms_to_samples(double ms, int rate_hz) {
  return static_cast<std::size_t>(std::llround(ms * rate_hz / 1000.0));
}

SegmentMap split_equal(const AudioBuffer& buffer, double interval_ms) {
  if (!(interval_ms >= 10.0)) throw std::invalid_argument("interval_ms must be >= 10");
  if (buffer.empty()) throw std::invalid_argument("cannot segment an empty buffer");
  const std::size_t step = std::max<std::size_t>(1, ms_to_samples(interval_ms, buffer.sample_rate_hz));
  SegmentMap map;
  for (std::size_t b = step; b < buffer.size(); b += step) map.boundaries.push_back(b);
  map.boundaries.push_back(buffer.size());
  map.labels.assign(map.boundaries.size() - 1, SegmentLabel::Speech);
  return map;
}

SegmentMap detect_voice(const AudioBuffer& buffer, const VadConfig& cfg) {
  if (!(cfg.frame_ms >= 5.0)) throw std::invalid_argument("VAD frame_ms must be >= 5");
  SegmentMap map;
  if (buffer.empty()) return map;

  const std::size_t frame = std::max<std::size_t>(1, ms_to_samples(cfg.frame_ms, buffer.sample_rate_hz));
  const std::size_t n = buffer.size();
  const std::size_t frames = (n + frame - 1) / frame;

  std::vector<bool> speech(frames, false);
  int hang = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t b = f * frame;
    const std::size_t e = std::min(n, b + frame);
    double energy = 0.0;
    for (std::size_t i = b; i < e; ++i) energy += static_cast<double>(buffer.samples[i]) * buffer.samples[i];
    const double rms = std::sqrt(energy / static_cast<double>(e - b));
    const double db = rms > 0.0 ? 20.0 * std::log10(rms) : -std::numeric_limits<double>::infinity();
    if (db > cfg.energy_threshold_db) {
      speech[f] = true;
      hang = cfg.hangover_frames;
    } else if (hang > 0) {
      speech[f] = true;
      --hang;
    }
  }

  for (std::size_t f = 0; f < frames; ++f) {
    const auto label = speech[f] ? SegmentLabel::Speech : SegmentLabel::NonSpeech;
    if (f > 0 && map.labels.back() == label) continue;
    if (f > 0) map.boundaries.push_back(f * frame);
    map.labels.push_back(label);
  }
  map.boundaries.push_back(n);
  return map;
}

SegmentMap label_from_voice(const SegmentMap& grid, const SegmentMap& voice) {
  if (grid.total_length() != voice.total_length()) {
    throw std::invalid_argument("grid and voice maps cover different lengths");
  }
  SegmentMap out = grid;
  std::size_t v = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    while (v < voice.size() && voice.end(v) <= grid.start(i)) ++v;
    bool any = false;
    for (std::size_t k = v; k < voice.size() && voice.start(k) < grid.end(i); ++k) {
      if (voice.labels[k] == SegmentLabel::Speech) {
        any = true;
        break;
      }
    }
    out.labels[i] = any ? SegmentLabel::Speech : SegmentLabel::NonSpeech;
  }
  return out;
}

}  // namespace speedfit
