// SPDX-License-Identifier: Apache-2.0
#include "speedfit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "speedfit/audio.hpp"
#include "speedfit/metrics.hpp"

namespace fs = std::filesystem;

namespace speedfit {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && issp(static_cast<unsigned char>(s[b]))) ++b;
  return s.substr(b);
}

// Runs f(0..n-1) on `workers` threads; rethrows the lowest-index failure.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

AudioBuffer load_canonical(const fs::path& path) { return normalize(read_wav(path)); }

double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

void HarnessConfig::validate() const {
  try {
    optimizer.validate();
    stretch.validate();
    validate_tone_table(tone_table);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (tone_table.empty()) throw UsageError("tone_table must not be empty");
  if (!(interval_ms >= 10.0)) throw UsageError("interval_ms must be >= 10");
  if (!(vad.frame_ms > 0.0)) throw UsageError("vad_frame_ms must be > 0");
  if (vad.hangover_frames < 0) throw UsageError("vad_hangover_frames must be >= 0");
  if (workers < 0) throw UsageError("workers must be >= 0");
}

std::size_t HarnessConfig::worker_count(std::size_t jobs) const {
  std::size_t w = workers > 0 ? static_cast<std::size_t>(workers) : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(w, jobs));
}

HarnessConfig apply_config(HarnessConfig cfg, const nlohmann::json& j) {
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "lambda") cfg.optimizer.lambda = v.get<double>();
      else if (key == "r_min") cfg.optimizer.r_min = v.get<double>();
      else if (key == "r_max") cfg.optimizer.r_max = v.get<double>();
      else if (key == "rate_step") cfg.optimizer.rate_step = v.get<double>();
      else if (key == "eval_budget") cfg.optimizer.eval_budget = v.get<int>();
      else if (key == "ctc_normalize_by_label_length") cfg.optimizer.ctc_normalize_by_label_length = v.get<bool>();
      else if (key == "ctc_cap") cfg.optimizer.ctc_cap = v.get<double>();
      else if (key == "allow_cer_surrogate") cfg.optimizer.allow_cer_surrogate = v.get<bool>();
      else if (key == "reference_mode") {
        const auto mode = v.get<std::string>();
        if (mode == "provided") cfg.optimizer.reference_mode = ReferenceMode::Provided;
        else if (mode == "self_label") cfg.optimizer.reference_mode = ReferenceMode::SelfLabel;
        else throw UsageError("reference_mode must be \"provided\" or \"self_label\"");
      }
      else if (key == "window_ms") cfg.stretch.window_ms = v.get<double>();
      else if (key == "hop_fraction") cfg.stretch.hop_fraction = v.get<double>();
      else if (key == "seek_ms") cfg.stretch.seek_ms = v.get<double>();
      else if (key == "crossfade_ms") cfg.stretch.crossfade_ms = v.get<double>();
      else if (key == "interval_ms") cfg.interval_ms = v.get<double>();
      else if (key == "vad_frame_ms") cfg.vad.frame_ms = v.get<double>();
      else if (key == "vad_threshold_db") cfg.vad.energy_threshold_db = v.get<double>();
      else if (key == "vad_hangover_frames") cfg.vad.hangover_frames = v.get<int>();
      else if (key == "workers") cfg.workers = v.get<int>();
      else if (key == "tone_table") {
        ToneTable table;
        for (const auto& [sym, hz] : v.items()) table[sym] = hz.get<double>();
        cfg.tone_table = table;
      } else {
        throw UsageError("unknown config key \"" + key + "\"");
      }
    } catch (const nlohmann::json::exception&) {
      throw UsageError("config key \"" + key + "\" has the wrong type");
    }
  }
  cfg.validate();
  return cfg;
}

HarnessConfig load_config(const std::optional<fs::path>& path, const nlohmann::json& overrides) {
  HarnessConfig cfg;
  if (path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(*path));
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError("config " + path->string() + " is not valid JSON: " + e.what());
    }
    cfg = apply_config(cfg, j);
  }
  return apply_config(cfg, overrides);
}

nlohmann::json to_json(const HarnessConfig& cfg) {
  nlohmann::json table = nlohmann::json::object();
  for (const auto& [sym, hz] : cfg.tone_table) table[sym] = hz;
  const auto& o = cfg.optimizer;
  return {{"lambda", o.lambda},
          {"r_min", o.r_min},
          {"r_max", o.r_max},
          {"rate_step", o.rate_step},
          {"eval_budget", o.eval_budget},
          {"ctc_normalize_by_label_length", o.ctc_normalize_by_label_length},
          {"ctc_cap", o.ctc_cap},
          {"reference_mode", o.reference_mode == ReferenceMode::Provided ? "provided" : "self_label"},
          {"allow_cer_surrogate", o.allow_cer_surrogate},
          {"window_ms", cfg.stretch.window_ms},
          {"hop_fraction", cfg.stretch.hop_fraction},
          {"seek_ms", cfg.stretch.seek_ms},
          {"crossfade_ms", cfg.stretch.crossfade_ms},
          {"interval_ms", cfg.interval_ms},
          {"vad_frame_ms", cfg.vad.frame_ms},
          {"vad_threshold_db", cfg.vad.energy_threshold_db},
          {"vad_hangover_frames", cfg.vad.hangover_frames},
          {"tone_table", table}};
}

std::vector<CorpusItem> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("corpus directory " + dir.string() + " does not exist");
  std::vector<CorpusItem> items;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".wav") continue;
    CorpusItem item;
    item.id = entry.path().stem().string();
    item.wav = entry.path();
    auto txt = entry.path();
    txt.replace_extension(".txt");
    if (!fs::exists(txt)) throw std::runtime_error("corpus item " + item.id + " has no transcript " + txt.string());
    item.reference = trim(read_text(txt));
    items.push_back(std::move(item));
  }
  if (items.empty()) throw std::runtime_error("empty corpus: no .wav files in " + dir.string());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return items;
}

SegmentMap segment_for_optimizer(const AudioBuffer& buffer, const HarnessConfig& cfg) {
  const auto grid = label_from_voice(split_equal(buffer, cfg.interval_ms), detect_voice(buffer, cfg.vad));
  SegmentMap out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool extend = !out.labels.empty() && grid.labels[i] == SegmentLabel::NonSpeech &&
                        out.labels.back() == SegmentLabel::NonSpeech;
    if (extend) {
      out.boundaries.back() = grid.end(i);
    } else {
      out.boundaries.push_back(grid.end(i));
      out.labels.push_back(grid.labels[i]);
    }
  }
  return out;
}

OptimizeOutcome run_optimize(const AudioBuffer& buffer, const std::optional<std::string>& reference,
                             Recognizer& recognizer, const HarnessConfig& cfg) {
  if (buffer.empty()) throw std::runtime_error("input audio is empty");
  OptimizeOutcome out;
  out.segments = segment_for_optimizer(buffer, cfg);
  out.result = optimize_schedule(buffer, out.segments, reference, recognizer, cfg.optimizer, cfg.stretch);
  out.render = render_schedule(buffer, out.result.schedule, cfg.stretch);
  out.final_recognition = recognizer.recognize(out.render.audio);
  out.avg_speed = out.result.schedule.weighted_mean_rate();
  if (!normalize_text(out.result.reference).empty()) {
    out.cer = cer(out.result.reference, out.final_recognition.transcript);
    out.wer = wer(out.result.reference, out.final_recognition.transcript);
  }
  return out;
}

void SweepCurve::validate() const {
  if (cer_values.size() != speeds.size() || wer_values.size() != speeds.size()) {
    throw std::logic_error("sweep curve columns differ in length");
  }
  for (std::size_t i = 1; i < speeds.size(); ++i) {
    if (!(speeds[i] > speeds[i - 1])) throw std::logic_error("sweep speeds must be strictly increasing");
  }
}

std::string SweepCurve::to_csv() const {
  validate();
  std::string out = "speed,cer,wer\n";
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    out += fixed6(speeds[i]) + "," + fixed6(cer_values[i]) + "," + fixed6(wer_values[i]) + "\n";
  }
  return out;
}

std::string EvalTable::to_csv() const {
  std::string out = "model,avg_speed,cer_pct,wer_pct\n";
  for (const auto& r : rows) {
    out += r.model + "," + fixed6(r.avg_speed) + "," + fixed6(r.cer_pct) + "," + fixed6(r.wer_pct) + "\n";
  }
  return out;
}

nlohmann::json cmd_fixture(const fs::path& spec_path, const fs::path& out_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(spec_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("fixture spec is not valid JSON: " + std::string(e.what()));
  }
  FixtureSpec spec;
  try {
    spec = fixture_spec_from_json(j);
    spec.validate();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("invalid fixture spec: " + std::string(e.what()));
  } catch (const std::invalid_argument& e) {
    throw UsageError("invalid fixture spec: " + std::string(e.what()));
  }
  if (spec.track.empty()) throw UsageError("empty fixture");

  const auto fx = synth_fixture(spec);
  const std::string name = spec_path.stem().string();
  fs::create_directories(out_dir);
  write_wav(fx.audio, out_dir / (name + ".wav"));
  write_text(out_dir / (name + ".json"), fx.sidecar().dump(2) + "\n");
  write_text(out_dir / (name + ".txt"), fx.reference + "\n");
  return {{"name", name},
          {"samples", fx.audio.size()},
          {"duration_s", fx.audio.duration_s()},
          {"reference", fx.reference}};
}

nlohmann::json cmd_stretch(const fs::path& in_wav, double rate, const fs::path& out_wav, const HarnessConfig& cfg) {
  if (!(rate >= kMinStretchRate && rate <= kMaxStretchRate)) {
    throw UsageError("rate " + fixed6(rate) + " outside supported domain [" + fixed6(kMinStretchRate) + ", " +
                     fixed6(kMaxStretchRate) + "]");
  }
  const auto input = read_wav(in_wav);
  const auto result = stretch(input, rate, cfg.stretch);
  if (out_wav.has_parent_path()) fs::create_directories(out_wav.parent_path());
  const auto written = write_wav(result.audio, out_wav);
  const double ratio = input.empty() ? 0.0 : static_cast<double>(result.audio.size()) / static_cast<double>(input.size());
  return {{"rate", rate},
          {"sample_rate_hz", input.sample_rate_hz},
          {"input_samples", input.size()},
          {"output_samples", result.audio.size()},
          {"duration_ratio", ratio},
          {"fallback", result.fallback},
          {"clipped_samples", written.clipped}};
}

nlohmann::json cmd_optimize(const fs::path& in_wav, Recognizer& recognizer,
                            const std::optional<fs::path>& reference_path, const HarnessConfig& cfg,
                            const fs::path& out_dir) {
  std::optional<std::string> reference;
  if (reference_path) reference = trim(read_text(*reference_path));
  else if (cfg.optimizer.reference_mode == ReferenceMode::Provided) {
    throw UsageError("--reference is required when reference_mode is \"provided\"");
  }

  const auto input = load_canonical(in_wav);
  const auto out = run_optimize(input, reference, recognizer, cfg);

  fs::create_directories(out_dir);
  const auto written = write_wav(out.render.audio, out_dir / "output.wav");
  write_text(out_dir / "schedule.json", to_json(out.result.schedule).dump(2) + "\n");
  write_text(out_dir / "rate_curve.csv",
             rate_curve_csv(out.result.schedule, out.render.time_map, out.render.audio.sample_rate_hz));
  write_text(out_dir / "trace.jsonl", trace_jsonl(out.result.trace));

  std::size_t speech = 0;
  for (auto l : out.segments.labels) speech += l == SegmentLabel::Speech;
  const auto pct = [](const std::optional<double>& v) {
    return v ? nlohmann::json(100.0 * *v) : nlohmann::json(nullptr);
  };
  nlohmann::json report = {
      {"input", in_wav.filename().string()},
      {"input_duration_s", input.duration_s()},
      {"output_duration_s", out.render.audio.duration_s()},
      {"segments", out.segments.size()},
      {"speech_segments", speech},
      {"avg_speed", out.avg_speed},
      {"mean_rate", out.result.schedule.mean_rate()},
      {"reference", out.result.reference},
      {"reference_source", reference ? "provided" : "self_label"},
      {"transcript", out.final_recognition.transcript},
      {"cer", out.cer ? nlohmann::json(*out.cer) : nlohmann::json(nullptr)},
      {"wer", out.wer ? nlohmann::json(*out.wer) : nlohmann::json(nullptr)},
      {"cer_pct", pct(out.cer)},
      {"wer_pct", pct(out.wer)},
      {"loss", to_json(out.result.loss)},
      {"recognizer_calls", out.result.recognizer_calls + 1},
      {"budgeted_calls", out.result.budgeted_calls},
      {"fallback_segments", out.render.fallback_segments},
      {"clipped_samples", written.clipped},
      {"schedule", "schedule.json"},
      {"config", to_json(cfg)}};
  write_text(out_dir / "report.json", report.dump(2) + "\n");
  return report;
}

std::vector<double> parse_speed_list(const std::string& text) {
  std::vector<double> speeds;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    tok = trim(tok);
    if (tok.empty()) throw UsageError("empty entry in speed list \"" + text + "\"");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw UsageError("bad speed \"" + tok + "\"");
    speeds.push_back(v);
  }
  if (speeds.empty()) throw UsageError("speed list is empty");
  return speeds;
}

SweepCurve run_sweep(const std::vector<CorpusItem>& corpus, const std::vector<double>& speeds,
                     Recognizer& recognizer, const HarnessConfig& cfg) {
  if (corpus.empty()) throw std::runtime_error("empty corpus");
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    if (!(speeds[i] >= kMinStretchRate && speeds[i] <= kMaxStretchRate)) {
      throw UsageError("speed " + fixed6(speeds[i]) + " outside supported domain");
    }
    if (i > 0 && !(speeds[i] > speeds[i - 1])) throw UsageError("speeds must be strictly increasing");
  }
  for (const auto& item : corpus) {
    if (normalize_text(item.reference).empty()) throw std::runtime_error("corpus item " + item.id + " has an empty reference");
  }

  std::vector<AudioBuffer> audio(corpus.size());
  parallel_for(corpus.size(), cfg.worker_count(corpus.size()),
               [&](std::size_t i) { audio[i] = load_canonical(corpus[i].wav); });

  const std::size_t n = corpus.size();
  std::vector<double> cers(n * speeds.size());
  std::vector<double> wers(n * speeds.size());
  parallel_for(cers.size(), cfg.worker_count(cers.size()), [&](std::size_t job) {
    const std::size_t s = job / n;
    const std::size_t i = job % n;
    const auto rendered = stretch(audio[i], speeds[s], cfg.stretch);
    const auto rec = recognizer.recognize(rendered.audio);
    cers[job] = cer(corpus[i].reference, rec.transcript);
    wers[job] = wer(corpus[i].reference, rec.transcript);
  });

  SweepCurve curve;
  curve.speeds = speeds;
  for (std::size_t s = 0; s < speeds.size(); ++s) {
    const auto first = static_cast<std::ptrdiff_t>(s * n);
    const auto last = first + static_cast<std::ptrdiff_t>(n);
    curve.cer_values.push_back(mean({cers.begin() + first, cers.begin() + last}));
    curve.wer_values.push_back(mean({wers.begin() + first, wers.begin() + last}));
  }
  return curve;
}

std::vector<std::pair<double, double>> read_human_curve(const fs::path& path) {
  std::stringstream ss(read_text(path));
  std::string line;
  if (!std::getline(ss, line)) throw std::runtime_error("human curve " + path.string() + " is empty");
  std::vector<std::string> header;
  {
    std::stringstream hs(trim(line));
    for (std::string col; std::getline(hs, col, ',');) header.push_back(trim(col));
  }
  if (header.size() < 2 || header[0] != "speed") {
    throw std::runtime_error("human curve header must start with \"speed\" and name a value column");
  }
  std::size_t col = 1;
  if (auto it = std::find(header.begin(), header.end(), "cer"); it != header.end()) {
    col = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<std::pair<double, double>> rows;
  while (std::getline(ss, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(trim(c));
    if (cells.size() != header.size()) throw std::runtime_error("human curve row \"" + line + "\" has the wrong width");
    try {
      rows.emplace_back(std::stod(cells[0]), std::stod(cells[col]));
    } catch (const std::exception&) {
      throw std::runtime_error("human curve row \"" + line + "\" is not numeric");
    }
  }
  return rows;
}

nlohmann::json cmd_sweep(const fs::path& corpus_dir, const std::vector<double>& speeds, Recognizer& recognizer,
                         const std::optional<fs::path>& human_curve, const HarnessConfig& cfg,
                         const fs::path& out_dir) {
  const auto corpus = load_corpus(corpus_dir);
  std::vector<std::pair<double, double>> human;
  if (human_curve) {
    human = read_human_curve(*human_curve);
    bool same = human.size() == speeds.size();
    for (std::size_t i = 0; same && i < speeds.size(); ++i) same = std::abs(human[i].first - speeds[i]) <= 1e-9;
    if (!same) throw std::runtime_error("human curve speeds do not match the sweep speeds");
  }
  const auto curve = run_sweep(corpus, speeds, recognizer, cfg);

  nlohmann::json corr = {{"items", corpus.size()}, {"human_curve", nullptr}, {"pearson", nullptr}};
  if (human_curve) {
    std::vector<double> sub_speeds;
    std::vector<double> machine;
    std::vector<double> people;
    for (std::size_t i = 0; i < speeds.size(); ++i) {
      if (speeds[i] < 1.0) continue;
      sub_speeds.push_back(speeds[i]);
      machine.push_back(curve.cer_values[i]);
      people.push_back(human[i].second);
    }
    corr["human_curve"] = human_curve->filename().string();
    corr["speeds"] = sub_speeds;
    corr["machine_cer"] = machine;
    corr["human"] = people;
    try {
      corr["pearson"] = pearson(std::span<const double>(machine), std::span<const double>(people));
    } catch (const std::invalid_argument& e) {
      corr["pearson_error"] = e.what();
    }
  }

  fs::create_directories(out_dir);
  write_text(out_dir / "sweep.csv", curve.to_csv());
  write_text(out_dir / "correlation.json", corr.dump(2) + "\n");
  return corr;
}

EvalTable run_eval(const std::vector<CorpusItem>& corpus, Recognizer& recognizer, const HarnessConfig& cfg) {
  if (corpus.empty()) throw std::runtime_error("empty corpus");
  for (const auto& item : corpus) {
    if (normalize_text(item.reference).empty()) throw std::runtime_error("corpus item " + item.id + " has an empty reference");
  }
  const std::size_t n = corpus.size();
  std::vector<AudioBuffer> audio(n);
  std::vector<EvalReport> items(n);
  std::vector<double> plain_cer(n);
  std::vector<double> plain_wer(n);
  parallel_for(n, cfg.worker_count(n), [&](std::size_t i) {
    audio[i] = load_canonical(corpus[i].wav);
    const auto plain = recognizer.recognize(audio[i]);
    plain_cer[i] = cer(corpus[i].reference, plain.transcript);
    plain_wer[i] = wer(corpus[i].reference, plain.transcript);

    const auto out = run_optimize(audio[i], corpus[i].reference, recognizer, cfg);
    auto& rep = items[i];
    rep.id = corpus[i].id;
    rep.avg_speed = out.avg_speed;
    rep.cer = 100.0 * *out.cer;
    rep.wer = 100.0 * *out.wer;
    rep.loss = out.result.loss;
    rep.schedule = out.result.schedule;
  });

  std::vector<double> speeds;
  for (const auto& r : items) speeds.push_back(r.avg_speed);
  const double s_bar = mean(speeds);

  std::vector<double> const_cer(n);
  std::vector<double> const_wer(n);
  parallel_for(n, cfg.worker_count(n), [&](std::size_t i) {
    const auto rendered = render_schedule(audio[i], SpeedSchedule::constant(audio[i].size(), s_bar), cfg.stretch);
    const auto rec = recognizer.recognize(rendered.audio);
    const_cer[i] = cer(corpus[i].reference, rec.transcript);
    const_wer[i] = wer(corpus[i].reference, rec.transcript);
  });

  std::vector<double> opt_cer;
  std::vector<double> opt_wer;
  for (const auto& r : items) {
    opt_cer.push_back(r.cer);
    opt_wer.push_back(r.wer);
  }
  char label[64];
  std::snprintf(label, sizeof label, "constant_%.2fx", s_bar);

  EvalTable table;
  table.rows.push_back({"constant_1.00x", 1.0, 100.0 * mean(plain_cer), 100.0 * mean(plain_wer)});
  table.rows.push_back({label, s_bar, 100.0 * mean(const_cer), 100.0 * mean(const_wer)});
  table.rows.push_back({"optimized", s_bar, mean(opt_cer), mean(opt_wer)});
  table.items = std::move(items);
  return table;
}

EvalTable cmd_eval(const fs::path& corpus_dir, Recognizer& recognizer, const HarnessConfig& cfg,
                   const fs::path& out_dir) {
  const auto corpus = load_corpus(corpus_dir);
  auto table = run_eval(corpus, recognizer, cfg);
  std::string jsonl;
  for (const auto& r : table.items) {
    nlohmann::json j = {{"id", r.id},
                        {"avg_speed", r.avg_speed},
                        {"cer_pct", r.cer},
                        {"wer_pct", r.wer},
                        {"loss", to_json(r.loss)},
                        {"rates", r.schedule.rates()}};
    jsonl += j.dump() + "\n";
  }
  fs::create_directories(out_dir);
  write_text(out_dir / "eval.csv", table.to_csv());
  write_text(out_dir / "eval_items.jsonl", jsonl);
  return table;
}

}  // namespace speedfit
