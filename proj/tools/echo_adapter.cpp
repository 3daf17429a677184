// SPDX-License-Identifier: Apache-2.0
// Protocol stub: answers every recognize request with a fixed transcript and,
// unless disabled, one-hot-ish posteriors that greedy-decode to it. Fault
// switches exist for client tests.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "speedfit/remote.hpp"

using nlohmann::json;

namespace {

struct Options {
  std::string transcript = "test";
  double hop_ms = 20.0;
  bool posteriors = true;
  int crash_after = -1;
  int delay_ms = 0;
  int version = speedfit::kProtocolVersion;
  bool malformed = false;
  int max_concurrent = 1;
  int reorder = 1;
};

json respond(const Options& opt, const json& req) {
  const std::string id = req.value("id", "");
  json out = {{"v", opt.version}, {"id", id}};
  try {
    const auto audio =
        speedfit::decode_pcm16_base64(req.at("pcm16le_b64").get<std::string>(), req.at("sample_rate").get<int>());
    std::set<std::string> symbols;
    for (char c : opt.transcript) symbols.insert(std::string(1, c));
    const std::vector<std::string> alphabet(symbols.begin(), symbols.end());
    out["transcript"] = opt.transcript;
    out["alphabet"] = alphabet;
    out["frame_hop_ms"] = opt.hop_ms;
    out["error"] = nullptr;
    out["log_posteriors"] = nullptr;
    if (!opt.posteriors || !req.value("want_posteriors", true)) return out;

    const double hop = opt.hop_ms * audio.sample_rate_hz / 1000.0;
    const auto frames = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(audio.size() / hop)));
    const std::size_t width = alphabet.size() + 1;
    if (frames < 2 * opt.transcript.size()) {
      out["error"] = "input too short for the transcript";
      return out;
    }
    const double win = std::log(0.9);
    const double other = std::log(0.1 / static_cast<double>(width - 1));
    json rows = json::array();
    for (std::size_t t = 0; t < frames; ++t) {
      std::size_t hot = width - 1;
      if (t % 2 == 0 && t / 2 < opt.transcript.size()) {
        const std::string sym(1, opt.transcript[t / 2]);
        hot = static_cast<std::size_t>(std::find(alphabet.begin(), alphabet.end(), sym) - alphabet.begin());
      }
      std::vector<double> row(width, other);
      row[hot] = win;
      rows.push_back(row);
    }
    out["log_posteriors"] = rows;
  } catch (const std::exception& e) {
    out["error"] = std::string("bad request: ") + e.what();
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  bool no_posteriors = false;
  CLI::App app{"speedfit echo adapter"};
  app.add_option("--transcript", opt.transcript, "Transcript returned for every request");
  app.add_option("--hop-ms", opt.hop_ms, "Posterior frame hop");
  app.add_flag("--no-posteriors", no_posteriors, "Advertise and return text only");
  app.add_option("--crash-after", opt.crash_after, "Exit after reading this many requests without answering the last");
  app.add_option("--delay-ms", opt.delay_ms, "Sleep before each response");
  app.add_option("--version", opt.version, "Protocol version to announce");
  app.add_flag("--malformed", opt.malformed, "Answer with a line that is not JSON");
  app.add_option("--max-concurrent", opt.max_concurrent, "Concurrency advertised in the handshake");
  app.add_option("--reorder", opt.reorder, "Collect this many requests, answer them in reverse order");
  CLI11_PARSE(app, argc, argv);
  opt.posteriors = !no_posteriors;

  std::cout << json{{"v", opt.version},
                    {"op", "hello"},
                    {"supports_posteriors", opt.posteriors},
                    {"max_concurrent", opt.max_concurrent}}
                   .dump()
            << std::endl;

  int seen = 0;
  std::vector<json> held;
  for (std::string line; std::getline(std::cin, line);) {
    if (line.empty()) continue;
    ++seen;
    if (opt.crash_after >= 0 && seen >= opt.crash_after) return 3;
    json req = json::parse(line, nullptr, false);
    if (req.is_discarded()) {
      std::cout << json{{"v", opt.version}, {"id", ""}, {"error", "request is not JSON"}}.dump() << std::endl;
      continue;
    }
    if (opt.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(opt.delay_ms));
    if (opt.malformed) {
      std::cout << "{not json" << std::endl;
      continue;
    }
    held.push_back(respond(opt, req));
    if (static_cast<int>(held.size()) >= opt.reorder) {
      for (auto it = held.rbegin(); it != held.rend(); ++it) std::cout << it->dump() << "\n";
      std::cout << std::flush;
      held.clear();
    }
  }
  for (auto it = held.rbegin(); it != held.rend(); ++it) std::cout << it->dump() << "\n";
  std::cout << std::flush;
  return 0;
}
