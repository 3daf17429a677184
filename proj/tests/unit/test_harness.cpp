// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "speedfit/harness.hpp"
#include "test_util.hpp"

using namespace speedfit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void put(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

void write_fixture(const fs::path& dir, const std::string& id, std::vector<std::pair<std::string, double>> track) {
  FixtureSpec spec;
  spec.track = std::move(track);
  const auto fx = synth_fixture(spec);
  write_wav(fx.audio, dir / (id + ".wav"));
  put(dir / (id + ".txt"), fx.reference + "\n");
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = apply_config({}, nlohmann::json::parse(R"({"r_max": 2.5, "eval_budget": 10,
      "reference_mode": "provided", "interval_ms": 100, "vad_threshold_db": -30, "window_ms": 30})"));
  CHECK(cfg.optimizer.r_max == 2.5);
  CHECK(cfg.optimizer.eval_budget == 10);
  CHECK(cfg.optimizer.reference_mode == ReferenceMode::Provided);
  CHECK(cfg.interval_ms == 100.0);
  CHECK(cfg.vad.energy_threshold_db == -30.0);
  CHECK(cfg.stretch.window_ms == 30.0);

  CHECK_THROWS_AS(apply_config({}, nlohmann::json::parse(R"({"lamda": 1})")), UsageError);
  CHECK_THROWS_AS(apply_config({}, nlohmann::json::parse(R"({"r_max": "fast"})")), UsageError);
  CHECK_THROWS_AS(apply_config({}, nlohmann::json::parse(R"({"r_max": 9})")), UsageError);
  CHECK_THROWS_AS(apply_config({}, nlohmann::json::parse(R"([1, 2])")), UsageError);

  const auto dir = testutil::scratch_dir("cfg");
  put(dir / "c.json", R"({"lambda": 1e-6, "r_max": 2.0})");
  const auto loaded = load_config(dir / "c.json", nlohmann::json{{"r_max", 3.0}});
  CHECK(loaded.optimizer.lambda == 1e-6);
  CHECK(loaded.optimizer.r_max == 3.0);
  const auto echoed = apply_config({}, to_json(loaded));
  CHECK(echoed.optimizer.lambda == 1e-6);
  fs::remove_all(dir);
}

TEST_CASE("speed lists") {
  CHECK(parse_speed_list("1.0, 1.5,2") == std::vector<double>{1.0, 1.5, 2.0});
  CHECK_THROWS_AS(parse_speed_list("1.0,,2"), UsageError);
  CHECK_THROWS_AS(parse_speed_list("1.0,x"), UsageError);
}

TEST_CASE("fixture and stretch commands") {
  const auto dir = testutil::scratch_dir("cmd");
  put(dir / "two.json", R"({"track":[{"symbol":"a","duration_ms":200},{"symbol":"b","duration_ms":150}]})");
  const auto info = cmd_fixture(dir / "two.json", dir / "out");
  CHECK(info.at("reference") == "ab");
  for (const char* ext : {".wav", ".json", ".txt"}) CHECK(fs::exists(dir / "out" / (std::string("two") + ext)));
  CHECK(read_wav(dir / "out" / "two.wav").duration_s() == doctest::Approx(0.35));
  const auto side = nlohmann::json::parse(slurp(dir / "out" / "two.json"));
  CHECK(side.at("track")[1].at("end_sample") == 5600);

  put(dir / "empty.json", R"({"track":[]})");
  CHECK_THROWS_WITH_AS(cmd_fixture(dir / "empty.json", dir / "out"), "empty fixture", UsageError);

  AudioBuffer two_s = testutil::sine(300.0, 2.0);
  write_wav(two_s, dir / "in.wav");
  const auto same = cmd_stretch(dir / "in.wav", 1.0, dir / "same.wav");
  CHECK(fs::file_size(dir / "same.wav") == fs::file_size(dir / "in.wav"));
  CHECK(same.at("duration_ratio") == 1.0);
  const auto half = cmd_stretch(dir / "in.wav", 2.0, dir / "half.wav");
  CHECK(half.at("duration_ratio").get<double>() == doctest::Approx(0.5).epsilon(0.01));
  CHECK_THROWS_AS(cmd_stretch(dir / "in.wav", 0.1, dir / "x.wav"), UsageError);
  fs::remove_all(dir);
}

TEST_CASE("optimize command") {
  const auto dir = testutil::scratch_dir("opt");
  MockRecognizer mock;
  HarnessConfig cfg;

  SUBCASE("long symbols run at r_max") {
    write_fixture(dir, "long", {{"a", 400}, {"b", 400}, {"c", 400}});
    const auto report = cmd_optimize(dir / "long.wav", mock, dir / "long.txt", cfg, dir / "o");
    CHECK(report.at("avg_speed").get<double>() == doctest::Approx(3.0));
    CHECK(report.at("cer").get<double>() == 0.0);
    CHECK(report.at("reference_source") == "provided");
    for (const char* f : {"output.wav", "schedule.json", "report.json", "rate_curve.csv", "trace.jsonl"}) {
      CHECK(fs::exists(dir / "o" / f));
    }
    CHECK(slurp(dir / "o" / "rate_curve.csv").rfind("time_s,rate\n", 0) == 0);
  }
  SUBCASE("silence") {
    AudioBuffer quiet;
    quiet.samples.assign(16000, 0.0f);
    write_wav(quiet, dir / "quiet.wav");
    const auto report = cmd_optimize(dir / "quiet.wav", mock, std::nullopt, cfg, dir / "q");
    CHECK(report.at("segments") == 1);
    CHECK(report.at("avg_speed").get<double>() == doctest::Approx(3.0));
    CHECK(report.at("cer").is_null());
    CHECK(report.at("reference") == "");
  }
  SUBCASE("mixed durations land between the bounds") {
    write_fixture(dir, "mix", {{"a", 400}, {"b", 110}, {"c", 300}, {"d", 110}, {"e", 400}});
    const auto report = cmd_optimize(dir / "mix.wav", mock, dir / "mix.txt", cfg, dir / "m");
    const double s = report.at("avg_speed").get<double>();
    CHECK(s > 1.0);
    CHECK(s < 3.0);
    CHECK(report.at("cer").get<double>() == 0.0);
  }
  SUBCASE("provided mode needs a reference") {
    write_fixture(dir, "p", {{"a", 200}});
    cfg.optimizer.reference_mode = ReferenceMode::Provided;
    CHECK_THROWS_AS(cmd_optimize(dir / "p.wav", mock, std::nullopt, cfg, dir / "p"), UsageError);
  }
  fs::remove_all(dir);
}

TEST_CASE("corpus, sweep and eval") {
  const auto dir = testutil::scratch_dir("corpus");
  const auto corpus = dir / "corpus";
  fs::create_directories(corpus);
  CHECK_THROWS(load_corpus(corpus));
  write_fixture(corpus, "b_item", {{"a", 200}, {"c", 120}, {"e", 180}});
  write_fixture(corpus, "a_item", {{"b", 200}, {"d", 90}, {"f", 200}, {"h", 150}});
  const auto items = load_corpus(corpus);
  REQUIRE(items.size() == 2);
  CHECK(items[0].id == "a_item");
  CHECK(items[0].reference == "bdfh");

  MockRecognizer mock;
  HarnessConfig cfg;
  const auto curve = run_sweep(items, {1.0, 2.0, 4.0, 8.0}, mock, cfg);
  CHECK(curve.cer_values[0] == 0.0);
  for (std::size_t i = 1; i < curve.speeds.size(); ++i) CHECK(curve.cer_values[i] >= curve.cer_values[i - 1]);
  CHECK(curve.cer_values.back() == 1.0);
  CHECK_THROWS_AS(run_sweep(items, {2.0, 1.0}, mock, cfg), UsageError);

  cmd_sweep(corpus, {1.0, 2.0, 4.0, 8.0}, mock, std::nullopt, cfg, dir / "s");
  const auto csv = slurp(dir / "s" / "sweep.csv");
  CHECK(csv.rfind("speed,cer,wer\n1.000000,0.000000,0.000000\n", 0) == 0);
  const auto corr = cmd_sweep(corpus, {1.0, 2.0, 4.0, 8.0}, mock, dir / "s" / "sweep.csv", cfg, dir / "s2");
  CHECK(corr.at("pearson").get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  put(dir / "human.csv", "speed,score\n1.0,0.1\n2.0,0.2\n");
  CHECK_THROWS(cmd_sweep(corpus, {1.0, 2.0, 4.0, 8.0}, mock, dir / "human.csv", cfg, dir / "s3"));

  const auto table = cmd_eval(corpus, mock, cfg, dir / "e");
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0].avg_speed == 1.0);
  CHECK(table.rows[0].cer_pct == doctest::Approx(100.0 * curve.cer_values[0]));
  CHECK(std::abs(table.rows[1].avg_speed - table.rows[2].avg_speed) <= 0.01);
  CHECK(slurp(dir / "e" / "eval.csv").rfind("model,avg_speed,cer_pct,wer_pct\n", 0) == 0);

  const auto again = cmd_eval(corpus, mock, cfg, dir / "e2");
  CHECK(slurp(dir / "e" / "eval.csv") == slurp(dir / "e2" / "eval.csv"));
  CHECK(slurp(dir / "e" / "eval_items.jsonl") == slurp(dir / "e2" / "eval_items.jsonl"));

  fs::remove(corpus / "a_item.txt");
  CHECK_THROWS(load_corpus(corpus));
  fs::remove_all(dir);
}
