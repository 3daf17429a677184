// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "oracles.hpp"
#include "speedfit/recognizer.hpp"
#include "speedfit/stretch.hpp"
#include "test_util.hpp"

using namespace speedfit;

namespace {

double rms(const std::vector<float>& x, std::size_t b = 0, std::size_t e = 0) {
  if (e == 0) e = x.size();
  double s = 0.0;
  for (std::size_t i = b; i < e; ++i) s += double(x[i]) * x[i];
  return std::sqrt(s / static_cast<double>(e - b));
}

}  // namespace

TEST_CASE("stretch length and identity") {
  const auto s = testutil::sine(440.0, 2.0);
  const auto id = stretch(s, 1.0);
  CHECK(id.audio.samples == s.samples);
  CHECK_FALSE(id.fallback);

  const auto half = stretch(s, 2.0);
  CHECK(half.audio.duration_s() == doctest::Approx(1.0).epsilon(0.025));
  CHECK(half.audio.size() == 16000);

  CHECK_THROWS(stretch(s, 0.1));
  CHECK_THROWS(stretch(s, 9.0));
}

TEST_CASE("stretch keeps pitch, resampling does not") {
  const auto s = testutil::sine(440.0, 1.0);
  for (double r : {0.5, 1.3, 1.5, 2.0, 3.0}) {
    const auto out = stretch(s, r).audio;
    CHECK(oracle::dft_peak_hz(out.samples, 16000, 200.0, 1500.0) == doctest::Approx(440.0).epsilon(5.0 / 440.0));
  }
  const auto vs = speed_by_resampling(s, 1.5);
  CHECK(oracle::dft_peak_hz(vs.samples, 16000, 200.0, 1500.0) == doctest::Approx(660.0).epsilon(5.0 / 660.0));
}

TEST_CASE("short input falls back to resampling") {
  AudioBuffer b;
  b.samples.assign(100, 0.2f);
  const auto out = stretch(b, 2.0);
  CHECK(out.fallback);
  CHECK(out.audio.size() == 50);
}

TEST_CASE("stretch energy stays within 6 dB on noise") {
  std::mt19937 rng(21);
  const auto n = testutil::noise(rng, 16000);
  for (double r : {0.5, 1.0, 1.5, 2.0, 3.0}) {
    const auto out = stretch(n, r).audio;
    const double db = 20.0 * std::log10(rms(out.samples) / rms(n.samples));
    CHECK(std::abs(db) <= 6.0);
  }
}

TEST_CASE("render_schedule contracts") {
  const auto s = testutil::sine(300.0, 1.0);
  SegmentMap seg;
  seg.boundaries = {0, 8000, 16000};
  seg.labels = {SegmentLabel::Speech, SegmentLabel::Speech};

  SUBCASE("unit rates reproduce the input outside joins") {
    const auto out = render_schedule(s, SpeedSchedule::from_segments(seg, {1.0, 1.0}));
    REQUIRE(out.audio.size() == s.size());
    const std::size_t fade = ms_to_samples(5.0, 16000);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i >= 8000 && i < 8000 + fade) continue;
      REQUIRE(out.audio.samples[i] == doctest::Approx(s.samples[i]).epsilon(1e-6));
    }
  }
  SUBCASE("summed length") {
    const auto out = render_schedule(s, SpeedSchedule::from_segments(seg, {1.0, 2.0}));
    CHECK(out.audio.size() == 12000);
    CHECK(out.time_map.points.front().out_sample == 0);
    CHECK(out.time_map.points.back().out_sample == 12000);
    CHECK(out.time_map.points.back().in_sample == 16000);
    CHECK(out.time_map.source_at(8000.0) == doctest::Approx(8000.0));
    CHECK(out.time_map.source_at(10000.0) == doctest::Approx(12000.0));
  }
  SUBCASE("uncovered schedule is rejected") {
    SpeedSchedule bad;
    bad.entries = {{0, 8000, 1.0}};
    CHECK_THROWS_AS(render_schedule(s, bad), std::invalid_argument);
  }
}

TEST_CASE("fixture ab at rates (1, 2) keeps tone durations and frequencies") {
  FixtureSpec spec;
  spec.track = {{"a", 200.0}, {"b", 200.0}};
  const auto fx = synth_fixture(spec);
  const auto seg = testutil::spans_as_segments(fx);
  const auto out = render_schedule(fx.audio, SpeedSchedule::from_segments(seg, {1.0, 2.0})).audio;
  CHECK(out.size() == 3200 + 1600);
  // Dominant frequency per 10 ms frame; count frames per tone.
  int a = 0, b = 0;
  for (std::size_t f = 0; f + 160 <= out.size(); f += 160) {
    std::vector<float> frame(out.samples.begin() + f, out.samples.begin() + f + 160);
    const double hz = oracle::dft_peak_hz(frame, 16000, 300.0, 1300.0, 10.0);
    if (std::abs(hz - 500.0) < 60.0) ++a;
    if (std::abs(hz - 900.0) < 60.0) ++b;
  }
  CHECK(std::abs(a - 20) <= 1);
  CHECK(std::abs(b - 10) <= 1);
}

// Pieces stretched on their own drift in phase; an unaligned join notches a
// steady tone every segment.
TEST_CASE("joins keep a steady tone pure") {
  AudioBuffer tone;
  for (int i = 0; i < 19200; ++i) tone.samples.push_back(static_cast<float>(0.5 * std::sin(2 * M_PI * 500.0 * i / 16000)));
  SegmentMap seg;
  for (std::size_t i = 1; i <= 15; ++i) {
    seg.boundaries.push_back(i * 1280);
    seg.labels.push_back(SegmentLabel::Speech);
  }
  for (double r : {1.5, 2.0, 2.5, 3.0}) {
    const auto out = render_schedule(tone, SpeedSchedule::from_segments(seg, std::vector<double>(15, r))).audio;
    double worst = 1.0;
    for (std::size_t b = 320; b + 320 + 320 <= out.size(); b += 160) {
      std::complex<double> acc = 0.0;
      double energy = 0.0;
      for (std::size_t k = 0; k < 320; ++k) {
        acc += double(out.samples[b + k]) * std::polar(1.0, -2 * M_PI * 500.0 * k / 16000);
        energy += double(out.samples[b + k]) * out.samples[b + k];
      }
      worst = std::min(worst, std::norm(acc) / (160.0 * energy));
    }
    INFO("rate " << r);
    CHECK(worst > 0.9);
  }
}

TEST_CASE("random schedules keep the length contract and a monotone time map") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> rate(0.5, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2000 + rng() % 30000;
    const auto b = testutil::noise(rng, n);
    const std::size_t pieces = 1 + rng() % 6;
    std::vector<std::size_t> cuts{0};
    for (std::size_t k = 1; k < pieces; ++k) cuts.push_back(rng() % n);
    cuts.push_back(n);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    SpeedSchedule sched;
    double want = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double r = rate(rng);
      sched.entries.push_back({cuts[k], cuts[k + 1], r});
      want += std::max(1.0, std::round((cuts[k + 1] - cuts[k]) / r));
    }
    const auto out = render_schedule(b, sched);
    CHECK(out.audio.size() == static_cast<std::size_t>(want));
    const auto& pts = out.time_map.points;
    for (std::size_t k = 1; k < pts.size(); ++k) {
      CHECK(pts[k].out_sample >= pts[k - 1].out_sample);
      CHECK(pts[k].in_sample >= pts[k - 1].in_sample);
    }
    CHECK(pts.back().in_sample == n);
    CHECK(pts.back().out_sample == out.audio.size());
  }
}

TEST_CASE("schedule json and helpers") {
  SpeedSchedule s;
  s.entries = {{0, 100, 1.0}, {100, 400, 2.5}};
  CHECK(s.mean_rate() == doctest::Approx(1.75));
  CHECK(s.weighted_mean_rate() == doctest::Approx((100 * 1.0 + 300 * 2.5) / 400.0));
  const auto back = speed_schedule_from_json(to_json(s));
  CHECK(back == s);
  CHECK_NOTHROW(s.validate(400));
  CHECK_THROWS(s.validate(500));
  CHECK(SpeedSchedule::constant(400, 2.0).entries.size() == 1);

  TimeMap tm;
  tm.points = {{0, 0}, {100, 200}};
  CHECK(tm.to_csv() == "out_sample,in_sample\n0,0\n100,200\n");
}

TEST_CASE("rate curve csv") {
  const auto s = testutil::sine(300.0, 1.0);
  SegmentMap seg;
  seg.boundaries = {0, 8000, 16000};
  seg.labels = {SegmentLabel::Speech, SegmentLabel::Speech};
  const auto sched = SpeedSchedule::from_segments(seg, {1.0, 2.0});
  const auto out = render_schedule(s, sched);
  const auto csv = rate_curve_csv(sched, out.time_map, 16000);
  CHECK(csv.rfind("time_s,rate\n", 0) == 0);
  CHECK(csv.find("0.500000,2.000000") != std::string::npos);
}

TEST_CASE("stretch config validation") {
  StretchConfig c;
  CHECK_NOTHROW(c.validate());
  c.seek_ms = 15.0;
  CHECK_THROWS(c.validate());
}
