// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <random>

#include "speedfit/ctc.hpp"
#include "speedfit/metrics.hpp"
#include "speedfit/recognizer.hpp"
#include "speedfit/stretch.hpp"
#include "test_util.hpp"

using namespace speedfit;

namespace {

Fixture make(std::vector<std::pair<std::string, double>> track) {
  FixtureSpec spec;
  spec.track = std::move(track);
  return synth_fixture(spec);
}

void check_consistent(const RecognitionResult& r) {
  REQUIRE(r.posteriorgram.has_value());
  CHECK_NOTHROW(r.posteriorgram->validate());
  CHECK(ctc_greedy_text(*r.posteriorgram) == r.transcript);
}

}  // namespace

TEST_CASE("fixture synthesis") {
  CHECK(default_tone_table().size() == 8);
  CHECK(default_tone_table().at("h") == 500.0 + 400.0 * 7);

  const auto fx = make({{"a", 200}, {"c", 150}, {"b", 45}});
  CHECK(fx.reference == "acb");
  CHECK(fx.audio.size() == 3200 + 2400 + 720);
  REQUIRE(fx.spans.size() == 3);
  CHECK(fx.spans[0].start_sample == 0);
  CHECK(fx.spans[1].start_sample == fx.spans[0].end_sample);
  CHECK(fx.spans[2].end_sample == fx.audio.size());
  const auto side = fx.sidecar();
  CHECK(side.at("reference") == "acb");
  CHECK(side.at("track")[1].at("symbol") == "c");

  const auto empty = make({});
  CHECK(empty.audio.empty());
  CHECK(empty.reference.empty());

  FixtureSpec bad;
  bad.track = {{"z", 100}};
  CHECK_THROWS(synth_fixture(bad));
  bad.track = {{"a", 30}};
  CHECK_THROWS(synth_fixture(bad));
  ToneTable close{{"x", 500.0}, {"y", 550.0}};
  CHECK_THROWS(validate_tone_table(close));
}

TEST_CASE("mock recognizes unstretched fixtures") {
  MockRecognizer mock;
  const auto fx = make({{"a", 200}, {"b", 200}});
  const auto r = mock.recognize(fx.audio);
  CHECK(r.transcript == "ab");
  check_consistent(r);
  CHECK(r.posteriorgram->frames() == 39);

  const auto all = make({{"a", 120}, {"b", 120}, {"c", 120}, {"d", 120}, {"e", 120}, {"f", 120}, {"g", 120}, {"h", 120}});
  CHECK(mock.recognize(all.audio).transcript == "abcdefgh");
}

TEST_CASE("mock silence and determinism") {
  MockRecognizer mock;
  AudioBuffer silent;
  silent.samples.assign(16000, 0.0f);
  const auto r = mock.recognize(silent);
  CHECK(r.transcript.empty());
  check_consistent(r);
  CHECK(mock.recognize(AudioBuffer{}).transcript.empty());

  std::mt19937 rng(1);
  const auto n = testutil::noise(rng, 8000);
  const auto a = mock.recognize(n);
  const auto b = mock.recognize(n);
  CHECK(a.transcript == b.transcript);
  CHECK(a.posteriorgram->log_probs == b.posteriorgram->log_probs);
}

TEST_CASE("survival threshold on directly synthesized tones") {
  MockRecognizer mock;
  // 40 ms supplies exactly three clean 20 ms frames at a 10 ms hop.
  for (double ms : {40.0, 45.0, 60.0}) {
    AudioBuffer b = testutil::sine(1300.0, ms / 1000.0);
    CHECK(mock.recognize(b).transcript == "c");
  }
  for (double ms : {25.0, 33.0, 38.0}) {
    AudioBuffer b = testutil::sine(1300.0, ms / 1000.0);
    CHECK(mock.recognize(b).transcript.empty());
  }
}

TEST_CASE("compression drops symbols") {
  MockRecognizer mock;
  const auto fx = make({{"a", 200}, {"b", 200}});
  CHECK(mock.recognize(stretch(fx.audio, 4.0).audio).transcript == "ab");
  // About 33 ms per tone nominally. WSOLA copies whole 25 ms windows, so the
  // first tone keeps slightly more than its share and the second is lost.
  const auto six = mock.recognize(stretch(fx.audio, 6.0).audio);
  CHECK(six.transcript.size() < 2);
  CHECK(mock.recognize(stretch(fx.audio, 8.0).audio).transcript.empty());
}

// WSOLA copies whole windows, so a tone's rendered length moves in window
// steps whose phase depends on the rate; survival is a threshold only outside
// that band. Measured: every casualty renders under 60 ms, every survivor over 25 ms.
TEST_CASE("symbol survival is bracketed by rendered duration") {
  MockRecognizer mock;
  std::mt19937 rng(8);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> order{0, 1, 2, 3, 4, 5, 6, 7};
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::pair<std::string, double>> track;
    for (int i = 0; i < 5; ++i) track.push_back({std::string(1, static_cast<char>('a' + order[i])), 60.0 + 10.0 * (rng() % 15)});
    const auto fx = make(track);
    for (double r = 1.0; r <= 8.0; r += 0.5) {
      const auto heard = mock.recognize(stretch(fx.audio, r).audio).transcript;
      for (const auto& [sym, ms] : track) {
        const double rendered = ms / r;
        if (rendered >= 60.0) CHECK(heard.find(sym) != std::string::npos);
        if (rendered <= 25.0) CHECK(heard.find(sym) == std::string::npos);
        checked += rendered >= 60.0 || rendered <= 25.0;
      }
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("pitch shifted audio is not recognized") {
  MockRecognizer mock;
  const auto fx = make({{"a", 300}, {"c", 300}, {"e", 300}});
  for (double r : {1.3, 1.5, 2.0}) {
    CHECK(mock.recognize(stretch(fx.audio, r).audio).transcript == "ace");
    CHECK(mock.recognize(speed_by_resampling(fx.audio, r)).transcript != "ace");
  }
}

TEST_CASE("fixture spec json") {
  const auto j = nlohmann::json::parse(R"({"track":[{"symbol":"x","duration_ms":100}],"tone_table":{"x":700}})");
  const auto spec = fixture_spec_from_json(j);
  CHECK(spec.track.size() == 1);
  CHECK(spec.tone_table.at("x") == 700.0);
  const auto fx = synth_fixture(spec);
  MockRecognizer mock(spec.tone_table);
  CHECK(mock.recognize(fx.audio).transcript == "x");
}
