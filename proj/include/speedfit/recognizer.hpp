// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "speedfit/audio.hpp"
#include "speedfit/ctc.hpp"

namespace speedfit {

struct RecognitionResult {
  std::string transcript;
  std::optional<Posteriorgram> posteriorgram;
  std::vector<std::string> alphabet;
};

struct RecognizerCapabilities {
  bool supports_posteriors = false;
  int max_concurrent = 1;
};

/// The listening-comprehension oracle. Implementations must be callable from
/// several threads at once.
class Recognizer {
 public:
  virtual ~Recognizer() = default;
  virtual RecognitionResult recognize(const AudioBuffer& buffer) = 0;
  virtual RecognizerCapabilities capabilities() const = 0;
  virtual std::vector<std::string> alphabet() const = 0;
};

/// Symbol -> tone frequency (Hz). Ordered by symbol, which fixes alphabet order.
using ToneTable = std::map<std::string, double>;

/// Eight symbols a..h at 500 + 400 k Hz.
ToneTable default_tone_table();
/// Throws std::invalid_argument unless frequencies lie in [200, 6000] Hz and
/// are pairwise at least 100 Hz apart.
void validate_tone_table(const ToneTable& table);
std::vector<std::string> tone_alphabet(const ToneTable& table);

struct FixtureSpec {
  std::vector<std::pair<std::string, double>> track;  // (symbol, duration_ms)
  ToneTable tone_table = default_tone_table();
  double amplitude = 0.5;

  void validate() const;
};

struct FixtureSpan {
  std::string symbol;
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;
};

struct Fixture {
  AudioBuffer audio;
  std::string reference;
  std::vector<FixtureSpan> spans;
  ToneTable tone_table;

  nlohmann::json sidecar() const;
};

/// Concatenated pure tones with 10 ms raised-cosine onset and offset per symbol.
Fixture synth_fixture(const FixtureSpec& spec, int sample_rate = kCanonicalRate);

FixtureSpec fixture_spec_from_json(const nlohmann::json& j);

struct MockConfig {
  double frame_ms = 20.0;
  double hop_ms = 10.0;
  int min_run_frames = 3;
  double energy_floor_db = -45.0;
  /// Share of frame energy the winning tone must carry for the frame to count
  /// as that symbol; frames straddling a tone boundary fall below it.
  double min_purity = 0.7;
};

/// Deterministic tone-track recognizer. Per frame the table tone with the
/// largest Goertzel power wins if the frame is loud and pure enough, else the
/// frame is blank; symbol runs shorter than min_run_frames are blanked. With
/// the defaults a tone needs about 40 ms of clean rendering to be heard.
class MockRecognizer final : public Recognizer {
 public:
  explicit MockRecognizer(ToneTable table = default_tone_table(), MockConfig cfg = {});

  RecognitionResult recognize(const AudioBuffer& buffer) override;
  RecognizerCapabilities capabilities() const override;
  std::vector<std::string> alphabet() const override { return alphabet_; }

  const ToneTable& tone_table() const { return table_; }
  const MockConfig& config() const { return cfg_; }

 private:
  ToneTable table_;
  MockConfig cfg_;
  std::vector<std::string> alphabet_;
  std::vector<double> freqs_;
};

RecognitionResult mock_recognize(const AudioBuffer& buffer, const ToneTable& table = default_tone_table(),
                                 const MockConfig& cfg = {});

/// "mock" or "adapter:<command line>". The mock uses `table`.
std::shared_ptr<Recognizer> make_recognizer(const std::string& selector, const ToneTable& table = default_tone_table());

}  // namespace speedfit
