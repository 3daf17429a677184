// SPDX-License-Identifier: Apache-2.0
#include "speedfit/stretch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace speedfit {

void StretchConfig::validate() const {
  if (!(window_ms > 0.0) || !(seek_ms >= 0.0) || !(crossfade_ms >= 0.0)) {
    throw std::invalid_argument("stretch durations must be non-negative and window positive");
  }
  if (!(window_ms > 2.0 * seek_ms)) throw std::invalid_argument("window_ms must exceed 2 * seek_ms");
  if (!(hop_fraction > 0.0 && hop_fraction <= 1.0)) {
    throw std::invalid_argument("hop_fraction must be in (0, 1]");
  }
}

namespace {

void check_rate(double rate) {
  if (!(rate >= kMinStretchRate && rate <= kMaxStretchRate)) {
    std::ostringstream msg;
    msg << "rate " << rate << " outside supported domain [" << kMinStretchRate << ", "
        << kMaxStretchRate << "]";
    throw std::out_of_range(msg.str());
  }
}

std::size_t stretched_length(std::size_t in_len, double rate) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(in_len) / rate));
}

// Hann window sampled at half-integer points: never zero, and copies at a hop
// of N/2 sum to exactly one.
std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::sin(M_PI * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
    w[i] = s * s;
  }
  return w;
}

std::vector<float> wsola(const std::vector<float>& x, double rate, std::size_t out_len,
                         std::size_t window, std::size_t hop, std::size_t seek) {
  const std::size_t in_len = x.size();
  const std::size_t overlap = window > hop ? window - hop : 0;
  const auto w = hann(window);
  const std::ptrdiff_t max_pos = static_cast<std::ptrdiff_t>(in_len - window);

  std::vector<double> acc(out_len + window, 0.0);
  std::vector<double> wsum(out_len + window, 0.0);

  std::ptrdiff_t prev = 0;
  for (std::size_t k = 0; k * hop < out_len; ++k) {
    const auto nominal = static_cast<std::ptrdiff_t>(std::llround(static_cast<double>(k * hop) * rate));
    std::ptrdiff_t pos = std::clamp<std::ptrdiff_t>(nominal, 0, max_pos);
    if (k > 0 && overlap > 0 && seek > 0) {
      const std::ptrdiff_t target = std::clamp<std::ptrdiff_t>(prev + static_cast<std::ptrdiff_t>(hop), 0, max_pos);
      const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(nominal - static_cast<std::ptrdiff_t>(seek), 0, max_pos);
      const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(nominal + static_cast<std::ptrdiff_t>(seek), 0, max_pos);
      const float* ref = x.data() + target;
      auto score = [&](std::ptrdiff_t p) {
        const float* cand = x.data() + p;
        double dot = 0.0;
        double energy = 0.0;
        for (std::size_t j = 0; j < overlap; ++j) {
          dot += static_cast<double>(ref[j]) * cand[j];
          energy += static_cast<double>(cand[j]) * cand[j];
        }
        return energy > 0.0 ? dot / std::sqrt(energy) : 0.0;
      };
      // Ties keep the nominal position so silent stretches do not drift.
      double best = score(pos);
      for (std::ptrdiff_t p = lo; p <= hi; ++p) {
        if (p == pos) continue;
        const double s = score(p);
        if (s > best) {
          best = s;
          pos = p;
        }
      }
    }
    const std::size_t o = k * hop;
    for (std::size_t j = 0; j < window; ++j) {
      acc[o + j] += w[j] * x[static_cast<std::size_t>(pos) + j];
      wsum[o + j] += w[j];
    }
    prev = pos;
  }

  std::vector<float> out(out_len);
  for (std::size_t n = 0; n < out_len; ++n) {
    out[n] = static_cast<float>(wsum[n] > 0.0 ? acc[n] / wsum[n] : 0.0);
  }
  return out;
}

}  // namespace

AudioBuffer speed_by_resampling(const AudioBuffer& buffer, double rate) {
  check_rate(rate);
  AudioBuffer out;
  out.sample_rate_hz = buffer.sample_rate_hz;
  const std::size_t in_len = buffer.size();
  const std::size_t out_len = stretched_length(in_len, rate);
  out.samples.resize(out_len);
  if (out_len == 0 || in_len == 0) return out;
  const double step = out_len > 1 ? static_cast<double>(in_len - 1) / static_cast<double>(out_len - 1) : 0.0;
  for (std::size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) * step;
    const auto i = std::min(static_cast<std::size_t>(t), in_len - 1);
    const double frac = t - static_cast<double>(i);
    const float a = buffer.samples[i];
    const float b = buffer.samples[std::min(i + 1, in_len - 1)];
    out.samples[n] = static_cast<float>(a + (b - a) * frac);
  }
  return out;
}

StretchResult stretch(const AudioBuffer& buffer, double rate, const StretchConfig& cfg) {
  check_rate(rate);
  cfg.validate();
  if (rate == 1.0) return {buffer, false};

  const int sr = buffer.sample_rate_hz;
  const std::size_t window = std::max<std::size_t>(2, ms_to_samples(cfg.window_ms, sr));
  const std::size_t hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window * cfg.hop_fraction)));
  const std::size_t seek = ms_to_samples(cfg.seek_ms, sr);

  if (buffer.size() < window) return {speed_by_resampling(buffer, rate), true};

  StretchResult result;
  result.audio.sample_rate_hz = sr;
  result.audio.samples = wsola(buffer.samples, rate, stretched_length(buffer.size(), rate), window, hop, seek);
  return result;
}

double SpeedSchedule::mean_rate() const {
  if (entries.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : entries) sum += e.rate;
  return sum / static_cast<double>(entries.size());
}

double SpeedSchedule::weighted_mean_rate() const {
  double num = 0.0;
  double den = 0.0;
  for (const auto& e : entries) {
    const double len = static_cast<double>(e.end - e.start);
    num += len * e.rate;
    den += len;
  }
  return den > 0.0 ? num / den : 0.0;
}

std::vector<double> SpeedSchedule::rates() const {
  std::vector<double> r;
  r.reserve(entries.size());
  for (const auto& e : entries) r.push_back(e.rate);
  return r;
}

void SpeedSchedule::validate(std::size_t total) const {
  if (entries.empty()) throw std::invalid_argument("schedule has no entries");
  std::size_t expect = 0;
  for (const auto& e : entries) {
    if (e.start != expect || e.end <= e.start) {
      throw std::invalid_argument("schedule entries must be contiguous and non-empty");
    }
    if (!(e.rate >= 0.0) || !std::isfinite(e.rate)) throw std::invalid_argument("schedule rate must be finite and >= 0");
    expect = e.end;
  }
  if (expect != total) throw std::invalid_argument("schedule does not cover the buffer");
}

SpeedSchedule SpeedSchedule::from_segments(const SegmentMap& segments, const std::vector<double>& rates) {
  if (rates.size() != segments.size()) throw std::invalid_argument("one rate per segment required");
  SpeedSchedule s;
  for (std::size_t i = 0; i < segments.size(); ++i) s.entries.push_back({segments.start(i), segments.end(i), rates[i]});
  return s;
}

SpeedSchedule SpeedSchedule::constant(std::size_t total, double rate) {
  SpeedSchedule s;
  s.entries.push_back({0, total, rate});
  return s;
}

nlohmann::json to_json(const SpeedSchedule& schedule) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : schedule.entries) entries.push_back({{"start", e.start}, {"end", e.end}, {"rate", e.rate}});
  return {{"entries", entries}};
}

SpeedSchedule speed_schedule_from_json(const nlohmann::json& j) {
  SpeedSchedule s;
  for (const auto& e : j.at("entries")) {
    s.entries.push_back({e.at("start").get<std::size_t>(), e.at("end").get<std::size_t>(), e.at("rate").get<double>()});
  }
  return s;
}

double TimeMap::source_at(double out_sample) const {
  if (points.empty()) return 0.0;
  if (out_sample <= static_cast<double>(points.front().out_sample)) return static_cast<double>(points.front().in_sample);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& a = points[i - 1];
    const auto& b = points[i];
    if (out_sample <= static_cast<double>(b.out_sample)) {
      const double span = static_cast<double>(b.out_sample - a.out_sample);
      if (span == 0.0) return static_cast<double>(b.in_sample);
      const double t = (out_sample - static_cast<double>(a.out_sample)) / span;
      return static_cast<double>(a.in_sample) + t * static_cast<double>(b.in_sample - a.in_sample);
    }
  }
  return static_cast<double>(points.back().in_sample);
}

std::string TimeMap::to_csv() const {
  std::ostringstream out;
  out << "out_sample,in_sample\n";
  for (const auto& p : points) out << p.out_sample << ',' << p.in_sample << '\n';
  return out.str();
}

namespace {

// The two sides of a join come from independently stretched pieces whose
// source positions drift apart by up to the seek tolerance, so a plain fade
// would mix out-of-phase copies. The outgoing tail is fixed (it continues the
// previous core); the incoming piece starts a little early in the source and
// its head is trimmed at the offset in [lo, hi] that best correlates with the
// tail, nearest to `nominal` on ties.
std::size_t head_offset(const float* tail, const std::vector<float>& next, std::size_t len, std::size_t lo,
                        std::size_t hi, std::size_t nominal) {
  std::size_t best = nominal;
  double best_score = -std::numeric_limits<double>::infinity();
  const auto dist = [&](std::size_t a) { return a > nominal ? a - nominal : nominal - a; };
  for (std::size_t at = lo; at <= hi; ++at) {
    double dot = 0.0;
    double energy = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      dot += static_cast<double>(tail[k]) * next[at + k];
      energy += static_cast<double>(next[at + k]) * next[at + k];
    }
    const double score = energy > 0.0 ? dot / std::sqrt(energy) : 0.0;
    if (score > best_score || (score == best_score && dist(at) < dist(best))) {
      best_score = score;
      best = at;
    }
  }
  return best;
}

}  // namespace

ScheduleRenderer::ScheduleRenderer(AudioBuffer source, StretchConfig cfg)
    : source_(std::move(source)), cfg_(cfg) {
  cfg_.validate();
}

std::shared_ptr<const StretchResult> ScheduleRenderer::piece(std::size_t start, std::size_t end, double rate) {
  const Key key{start, end, rate};
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  AudioBuffer slice;
  slice.sample_rate_hz = source_.sample_rate_hz;
  slice.samples.assign(source_.samples.begin() + static_cast<std::ptrdiff_t>(start),
                       source_.samples.begin() + static_cast<std::ptrdiff_t>(end));
  auto result = std::make_shared<const StretchResult>(stretch(slice, rate, cfg_));
  std::lock_guard lock(mu_);
  return cache_.emplace(key, std::move(result)).first->second;
}

RenderResult ScheduleRenderer::render(const SpeedSchedule& schedule) {
  const std::size_t total = source_.size();
  schedule.validate(total);
  for (const auto& e : schedule.entries) check_rate(e.rate);

  const int sr = source_.sample_rate_hz;
  const std::size_t fade = ms_to_samples(cfg_.crossfade_ms, sr);
  const std::size_t n = schedule.size();

  std::vector<std::shared_ptr<const StretchResult>> pieces(n);
  std::vector<std::size_t> core(n);
  std::vector<std::size_t> lead(n, 0);  // stretched length of the early-start head
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = schedule.entries[i];
    std::size_t head_start = e.start;
    std::size_t tail_end = e.end;
    if (fade > 0) {
      const auto ext = static_cast<std::size_t>(std::ceil(static_cast<double>(fade) * e.rate)) + 2;
      if (i > 0) head_start = e.start > ext ? e.start - ext : 0;
      if (i + 1 < n) tail_end = std::min(total, e.end + 3 * ext);
    }
    pieces[i] = piece(head_start, tail_end, e.rate);
    const auto& got = pieces[i]->audio;
    core[i] = std::min(got.size(), std::max<std::size_t>(1, stretched_length(e.end - e.start, e.rate)));
    const auto nominal_lead = static_cast<std::size_t>(std::llround(static_cast<double>(e.start - head_start) / e.rate));
    lead[i] = std::min(nominal_lead, got.size() - core[i]);
  }

  RenderResult out;
  out.audio.sample_rate_hz = sr;
  std::size_t out_len = 0;
  for (auto c : core) out_len += c;
  out.audio.samples.assign(out_len, 0.0f);

  std::size_t pos = 0;
  std::size_t incoming = 0;  // crossfade length shared with the previous piece
  std::vector<std::size_t> skip(lead);  // head samples of each piece dropped before its core
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cur = pieces[i]->audio.samples;
    if (pieces[i]->fallback) ++out.fallback_segments;
    out.time_map.points.push_back({pos, schedule.entries[i].start});
    for (std::size_t k = 0; k < core[i]; ++k) {
      float v = cur[skip[i] + k];
      if (k < incoming) {
        const auto& prev = pieces[i - 1]->audio.samples;
        const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(incoming);
        const double fade_out = std::cos(0.5 * M_PI * t);
        const double fade_in = std::sin(0.5 * M_PI * t);
        v = static_cast<float>(fade_out * prev[skip[i - 1] + core[i - 1] + k] + fade_in * cur[skip[i] + k]);
      }
      out.audio.samples[pos + k] = v;
    }
    pos += core[i];
    if (i + 1 < n) {
      const auto& next = pieces[i + 1]->audio.samples;
      const std::size_t tail = skip[i] + core[i];
      const std::size_t c = std::min({fade, core[i], core[i + 1], cur.size() - tail});
      if (c > 0) {
        // The next piece must still hold its core after the trim.
        const std::size_t room = next.size() - core[i + 1];
        const std::size_t nominal = std::min(lead[i + 1], room);
        const std::size_t lo = nominal > fade ? nominal - fade : 0;
        const std::size_t hi = std::min(nominal + fade, room);
        skip[i + 1] = head_offset(cur.data() + tail, next, c, lo, hi, nominal);
      }
      incoming = c;
    }
  }
  out.time_map.points.push_back({out_len, total});
  return out;
}

RenderResult render_schedule(const AudioBuffer& buffer, const SpeedSchedule& schedule, const StretchConfig& cfg) {
  ScheduleRenderer renderer(buffer, cfg);
  return renderer.render(schedule);
}

std::string rate_curve_csv(const SpeedSchedule& schedule, const TimeMap& time_map, int sample_rate_hz) {
  std::ostringstream out;
  out << "time_s,rate\n";
  char line[64];
  for (std::size_t i = 0; i < schedule.size() && i + 1 < time_map.points.size(); ++i) {
    const double t0 = static_cast<double>(time_map.points[i].out_sample) / sample_rate_hz;
    const double t1 = static_cast<double>(time_map.points[i + 1].out_sample) / sample_rate_hz;
    std::snprintf(line, sizeof line, "%.6f,%.6f\n", t0, schedule.entries[i].rate);
    out << line;
    std::snprintf(line, sizeof line, "%.6f,%.6f\n", t1, schedule.entries[i].rate);
    out << line;
  }
  return out.str();
}

}  // namespace speedfit
