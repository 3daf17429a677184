// SPDX-License-Identifier: Apache-2.0
// speedfit: fixture | stretch | optimize | sweep | eval
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "speedfit/harness.hpp"
#include "speedfit/remote.hpp"

using namespace speedfit;
namespace fs = std::filesystem;

namespace {

// "key=value" -> {key: value}; the value is parsed as JSON when it can be.
nlohmann::json parse_overrides(const std::vector<std::string>& sets) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got \"" + s + "\"");
    const std::string key = s.substr(0, eq);
    const std::string value = s.substr(eq + 1);
    auto parsed = nlohmann::json::parse(value, nullptr, false);
    out[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-segment playback speed optimization with a recognizer in the loop"};
  app.require_subcommand(1);

  std::string recognizer = "mock";
  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  std::string out_dir = ".";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--set", sets, "Config override key=value (repeatable)");
  };
  auto add_recognizer = [&](CLI::App* sub) {
    sub->add_option("--recognizer", recognizer, "mock | adapter:\"<command>\"");
  };

  auto* fixture = app.add_subcommand("fixture", "Synthesize a tone fixture from a JSON spec");
  std::string spec_path;
  fixture->add_option("spec", spec_path, "Fixture spec JSON")->required();
  fixture->add_option("--out-dir", out_dir, "Output directory");

  auto* stretch_cmd = app.add_subcommand("stretch", "Time-stretch a WAV at a constant rate");
  std::string in_wav;
  double rate = 1.0;
  std::string out_wav;
  stretch_cmd->add_option("input", in_wav, "Input WAV")->required();
  stretch_cmd->add_option("rate", rate, "Playback rate")->required();
  stretch_cmd->add_option("output", out_wav, "Output WAV")->required();
  add_common(stretch_cmd);

  auto* optimize = app.add_subcommand("optimize", "Optimize and render a per-segment speed schedule");
  std::optional<std::string> reference;
  optimize->add_option("input", in_wav, "Input WAV")->required();
  optimize->add_option("--reference", reference, "Reference transcript file");
  optimize->add_option("--out-dir", out_dir, "Output directory");
  add_recognizer(optimize);
  add_common(optimize);

  auto* sweep = app.add_subcommand("sweep", "Recognition error against constant playback speed");
  std::string corpus;
  std::string speeds = "1.0,1.25,1.5,1.75,2.0,2.5,3.0";
  std::optional<std::string> human_curve;
  sweep->add_option("corpus", corpus, "Directory of <id>.wav + <id>.txt pairs")->required();
  sweep->add_option("--speeds", speeds, "Comma-separated speeds");
  sweep->add_option("--human-curve", human_curve, "CSV of speed,<value> to correlate against");
  sweep->add_option("--out-dir", out_dir, "Output directory");
  add_recognizer(sweep);
  add_common(sweep);

  auto* eval = app.add_subcommand("eval", "Compare optimized schedules with constant speeds");
  eval->add_option("corpus", corpus, "Directory of <id>.wav + <id>.txt pairs")->required();
  eval->add_option("--out-dir", out_dir, "Output directory");
  add_recognizer(eval);
  add_common(eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto cfg_file = config_path ? std::optional<fs::path>(*config_path) : std::nullopt;
    const auto cfg = load_config(cfg_file, parse_overrides(sets));
    auto make = [&] {
      try {
        return make_recognizer(recognizer, cfg.tone_table);
      } catch (const RecognizerError&) {
        throw;
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    };

    if (*fixture) {
      std::cout << cmd_fixture(spec_path, out_dir).dump(2) << "\n";
    } else if (*stretch_cmd) {
      std::cout << cmd_stretch(in_wav, rate, out_wav, cfg).dump(2) << "\n";
    } else if (*optimize) {
      auto rec = make();
      const auto ref = reference ? std::optional<fs::path>(*reference) : std::nullopt;
      std::cout << cmd_optimize(in_wav, *rec, ref, cfg, out_dir).dump(2) << "\n";
    } else if (*sweep) {
      auto rec = make();
      const auto human = human_curve ? std::optional<fs::path>(*human_curve) : std::nullopt;
      cmd_sweep(corpus, parse_speed_list(speeds), *rec, human, cfg, out_dir);
      std::cout << (fs::path(out_dir) / "sweep.csv").string() << "\n";
    } else if (*eval) {
      auto rec = make();
      std::cout << cmd_eval(corpus, *rec, cfg, out_dir).to_csv();
    }
  } catch (const UsageError& e) {
    std::cerr << "speedfit: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "speedfit: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
