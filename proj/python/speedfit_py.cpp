// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "speedfit/ctc.hpp"
#include "speedfit/harness.hpp"
#include "speedfit/metrics.hpp"
#include "speedfit/optimizer.hpp"
#include "speedfit/recognizer.hpp"
#include "speedfit/stretch.hpp"

namespace py = pybind11;
using namespace speedfit;

namespace {

AudioBuffer buffer_of(std::vector<float> samples, int rate) {
  AudioBuffer b;
  b.samples = std::move(samples);
  b.sample_rate_hz = rate;
  return b;
}

HarnessConfig config_of(const std::string& json_text) {
  return apply_config(HarnessConfig{}, json_text.empty() ? nlohmann::json::object() : nlohmann::json::parse(json_text));
}

py::dict recognition_dict(const RecognitionResult& r) {
  py::dict out;
  out["transcript"] = r.transcript;
  out["alphabet"] = r.alphabet;
  if (r.posteriorgram) {
    const auto& p = *r.posteriorgram;
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < p.frames(); ++t) {
      const auto row = p.row(t);
      rows.emplace_back(row.begin(), row.end());
    }
    out["log_posteriors"] = rows;
  } else {
    out["log_posteriors"] = py::none();
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_speedfit, m) {
  m.doc() = "Per-segment playback speed optimization (C++ core bindings)";
  m.attr("SAMPLE_RATE") = kCanonicalRate;

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

  m.def(
      "synth_fixture",
      [](const std::vector<std::pair<std::string, double>>& track, double amplitude) {
        FixtureSpec spec;
        spec.track = track;
        spec.amplitude = amplitude;
        const auto fx = synth_fixture(spec);
        return py::make_tuple(fx.audio.samples, fx.reference);
      },
      py::arg("track"), py::arg("amplitude") = 0.5, "Tone track [(symbol, ms), ...] -> (samples, reference).");

  m.def(
      "stretch",
      [](std::vector<float> samples, double rate, int sample_rate) {
        return stretch(buffer_of(std::move(samples), sample_rate), rate).audio.samples;
      },
      py::arg("samples"), py::arg("rate"), py::arg("sample_rate") = kCanonicalRate, "Pitch-preserving constant-rate stretch.");

  m.def(
      "render",
      [](std::vector<float> samples, const std::vector<std::pair<std::size_t, double>>& segments, int sample_rate) {
        SpeedSchedule s;
        std::size_t start = 0;
        for (const auto& [end, rate] : segments) {
          s.entries.push_back({start, end, rate});
          start = end;
        }
        return render_schedule(buffer_of(std::move(samples), sample_rate), s).audio.samples;
      },
      py::arg("samples"), py::arg("segments"), py::arg("sample_rate") = kCanonicalRate,
      "Render a schedule given as [(end_sample, rate), ...].");

  m.def(
      "recognize",
      [](std::vector<float> samples, int sample_rate) {
        return recognition_dict(mock_recognize(buffer_of(std::move(samples), sample_rate)));
      },
      py::arg("samples"), py::arg("sample_rate") = kCanonicalRate, "Built-in tone recognizer.");

  m.def("cer", [](const std::string& ref, const std::string& hyp) { return cer(ref, hyp); });
  m.def("wer", [](const std::string& ref, const std::string& hyp) { return wer(ref, hyp); });
  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); });
  m.def("loss_speed", [](const std::vector<double>& rates) { return loss_speed(rates); });

  m.def(
      "ctc_nll",
      [](const std::vector<std::vector<double>>& log_probs, const std::vector<std::string>& alphabet,
         const std::vector<std::size_t>& labels) {
        Posteriorgram p;
        p.alphabet = alphabet;
        for (const auto& row : log_probs) {
          if (row.size() != alphabet.size() + 1) throw std::invalid_argument("each row needs alphabet size + 1 entries");
          p.log_probs.insert(p.log_probs.end(), row.begin(), row.end());
        }
        return ctc_nll(p, labels);
      },
      py::arg("log_probs"), py::arg("alphabet"), py::arg("labels"), "Negative log-likelihood; blank is the last column.");

  m.def(
      "optimize",
      [](std::vector<float> samples, std::optional<std::string> reference, const std::string& config_json,
         int sample_rate) {
        const auto cfg = config_of(config_json);
        MockRecognizer mock(cfg.tone_table);
        const auto buf = normalize(buffer_of(std::move(samples), sample_rate));
        const auto o = run_optimize(buf, reference, mock, cfg);
        py::dict out;
        out["rates"] = o.result.schedule.rates();
        out["boundaries"] = o.segments.boundaries;
        out["avg_speed"] = o.avg_speed;
        out["transcript"] = o.final_recognition.transcript;
        out["reference"] = o.result.reference;
        out["cer"] = o.cer ? py::cast(*o.cer) : py::none();
        out["loss"] = to_json(o.result.loss).dump();
        out["output"] = o.render.audio.samples;
        return out;
      },
      py::arg("samples"), py::arg("reference") = py::none(), py::arg("config_json") = "",
      py::arg("sample_rate") = kCanonicalRate, "Optimize a schedule with the built-in recognizer.");
}
