// SPDX-License-Identifier: Apache-2.0
#include "speedfit/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "speedfit/segmenter.hpp"

namespace speedfit {

ToneTable default_tone_table() {
  ToneTable table;
  for (int k = 0; k < 8; ++k) table[std::string(1, static_cast<char>('a' + k))] = 500.0 + 400.0 * k;
  return table;
}

void validate_tone_table(const ToneTable& table) {
  std::vector<double> freqs;
  for (const auto& [sym, hz] : table) {
    if (sym.empty()) throw std::invalid_argument("tone table has an empty symbol");
    if (!(hz >= 200.0 && hz <= 6000.0)) {
      throw std::invalid_argument("tone for '" + sym + "' outside [200, 6000] Hz");
    }
    freqs.push_back(hz);
  }
  std::sort(freqs.begin(), freqs.end());
  for (std::size_t i = 1; i < freqs.size(); ++i) {
    if (freqs[i] - freqs[i - 1] < 100.0) throw std::invalid_argument("tone frequencies closer than 100 Hz");
  }
}

std::vector<std::string> tone_alphabet(const ToneTable& table) {
  std::vector<std::string> out;
  for (const auto& [sym, hz] : table) out.push_back(sym);
  return out;
}

void FixtureSpec::validate() const {
  validate_tone_table(tone_table);
  if (!(amplitude > 0.0 && amplitude <= 1.0)) throw std::invalid_argument("fixture amplitude must be in (0, 1]");
  for (const auto& [sym, ms] : track) {
    if (!tone_table.count(sym)) throw std::invalid_argument("fixture symbol '" + sym + "' has no tone");
    if (!(ms >= 40.0)) throw std::invalid_argument("fixture symbol durations must be >= 40 ms");
  }
}

nlohmann::json Fixture::sidecar() const {
  nlohmann::json track = nlohmann::json::array();
  for (const auto& s : spans) {
    track.push_back({{"symbol", s.symbol}, {"start_sample", s.start_sample}, {"end_sample", s.end_sample}});
  }
  nlohmann::json table = nlohmann::json::object();
  for (const auto& [sym, hz] : tone_table) table[sym] = hz;
  return {{"track", track}, {"tone_table", table}, {"reference", reference}};
}

Fixture synth_fixture(const FixtureSpec& spec, int sample_rate) {
  spec.validate();
  Fixture fx;
  fx.tone_table = spec.tone_table;
  fx.audio.sample_rate_hz = sample_rate;
  const std::size_t ramp = ms_to_samples(10.0, sample_rate);
  for (const auto& [sym, ms] : spec.track) {
    const std::size_t n = ms_to_samples(ms, sample_rate);
    const double omega = 2.0 * M_PI * spec.tone_table.at(sym) / sample_rate;
    const std::size_t start = fx.audio.size();
    const std::size_t r = std::min(ramp, n / 2);
    for (std::size_t i = 0; i < n; ++i) {
      double gain = 1.0;
      const std::size_t edge = std::min(i, n - 1 - i);
      if (edge < r) gain = 0.5 * (1.0 - std::cos(M_PI * (static_cast<double>(edge) + 0.5) / static_cast<double>(r)));
      fx.audio.samples.push_back(static_cast<float>(spec.amplitude * gain * std::sin(omega * static_cast<double>(i))));
    }
    fx.spans.push_back({sym, start, fx.audio.size()});
    fx.reference += sym;
  }
  return fx;
}

FixtureSpec fixture_spec_from_json(const nlohmann::json& j) {
  FixtureSpec spec;
  if (j.contains("tone_table")) {
    spec.tone_table.clear();
    for (const auto& [sym, hz] : j.at("tone_table").items()) spec.tone_table[sym] = hz.get<double>();
  }
  if (j.contains("amplitude")) spec.amplitude = j.at("amplitude").get<double>();
  for (const auto& item : j.at("track")) {
    spec.track.emplace_back(item.at("symbol").get<std::string>(), item.at("duration_ms").get<double>());
  }
  return spec;
}

MockRecognizer::MockRecognizer(ToneTable table, MockConfig cfg)
    : table_(std::move(table)), cfg_(cfg), alphabet_(tone_alphabet(table_)) {
  validate_tone_table(table_);
  if (table_.empty()) throw std::invalid_argument("mock recognizer needs a tone table");
  if (cfg_.min_run_frames < 1 || !(cfg_.hop_ms > 0.0) || !(cfg_.frame_ms >= cfg_.hop_ms)) {
    throw std::invalid_argument("invalid mock recognizer framing");
  }
  for (const auto& sym : alphabet_) freqs_.push_back(table_.at(sym));
}

RecognizerCapabilities MockRecognizer::capabilities() const { return {true, 64}; }

RecognitionResult MockRecognizer::recognize(const AudioBuffer& buffer) {
  const int sr = buffer.sample_rate_hz;
  const std::size_t frame = std::max<std::size_t>(1, ms_to_samples(cfg_.frame_ms, sr));
  const std::size_t hop = std::max<std::size_t>(1, ms_to_samples(cfg_.hop_ms, sr));
  const std::size_t n = buffer.size();
  const std::size_t frames = n <= frame ? 1 : 1 + (n - frame) / hop;
  const std::size_t blank = alphabet_.size();

  std::vector<double> coeff(freqs_.size());
  for (std::size_t k = 0; k < freqs_.size(); ++k) coeff[k] = 2.0 * std::cos(2.0 * M_PI * freqs_[k] / sr);

  std::vector<std::size_t> label(frames, blank);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t b = t * hop;
    const std::size_t e = std::min(n, b + frame);
    double energy = 0.0;
    for (std::size_t i = b; i < e; ++i) energy += static_cast<double>(buffer.samples[i]) * buffer.samples[i];
    const double len = static_cast<double>(e - b);
    const double rms = std::sqrt(energy / len);
    if (rms <= 0.0 || 20.0 * std::log10(rms) < cfg_.energy_floor_db) continue;

    std::size_t best = 0;
    double best_power = -1.0;
    for (std::size_t k = 0; k < freqs_.size(); ++k) {
      double s1 = 0.0;
      double s2 = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        const double s = buffer.samples[i] + coeff[k] * s1 - s2;
        s2 = s1;
        s1 = s;
      }
      const double power = s1 * s1 + s2 * s2 - coeff[k] * s1 * s2;
      if (power > best_power) {
        best_power = power;
        best = k;
      }
    }
    const double purity = best_power / (energy * len / 2.0);
    if (purity >= cfg_.min_purity) label[t] = best;
  }

  // Blank symbol runs too short to be heard.
  for (std::size_t t = 0; t < frames;) {
    std::size_t u = t;
    while (u < frames && label[u] == label[t]) ++u;
    if (label[t] != blank && u - t < static_cast<std::size_t>(cfg_.min_run_frames)) {
      std::fill(label.begin() + static_cast<std::ptrdiff_t>(t), label.begin() + static_cast<std::ptrdiff_t>(u), blank);
    }
    t = u;
  }

  Posteriorgram post;
  post.alphabet = alphabet_;
  post.frame_hop_ms = cfg_.hop_ms;
  const std::size_t width = post.width();
  // A symbol frame gives 0.9 to its tone and 0.1 to blank; blank frames are
  // certain. A reference symbol the mock did not hear has no frame to align
  // to, so its CTC cost is infinite rather than a few nats.
  post.log_probs.assign(frames * width, kLogZero);
  for (std::size_t t = 0; t < frames; ++t) {
    double* row = post.log_probs.data() + t * width;
    if (label[t] == blank) {
      row[blank] = 0.0;
    } else {
      row[label[t]] = std::log(0.9);
      row[blank] = std::log(0.1);
    }
  }

  RecognitionResult result;
  result.alphabet = alphabet_;
  result.transcript = ctc_greedy_text(post);
  result.posteriorgram = std::move(post);
  return result;
}

RecognitionResult mock_recognize(const AudioBuffer& buffer, const ToneTable& table, const MockConfig& cfg) {
  MockRecognizer mock(table, cfg);
  return mock.recognize(buffer);
}

}  // namespace speedfit
