// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "speedfit/optimizer.hpp"
#include "speedfit/recognizer.hpp"
#include "speedfit/segmenter.hpp"
#include "speedfit/stretch.hpp"

namespace speedfit {

/// Bad arguments or configuration; the CLI maps it to exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flat JSON config. Keys:
///   optimizer: lambda, r_min, r_max, rate_step, eval_budget,
///              ctc_normalize_by_label_length, ctc_cap, reference_mode
///              ("provided" | "self_label"), allow_cer_surrogate
///   stretch:   window_ms, hop_fraction, seek_ms, crossfade_ms
///   segmenter: interval_ms, vad_frame_ms, vad_threshold_db, vad_hangover_frames
///   mock:      tone_table ({symbol: hz})
///   harness:   workers (0 = one per hardware thread)
struct HarnessConfig {
  OptimizerConfig optimizer;
  StretchConfig stretch;
  VadConfig vad;
  double interval_ms = 80.0;
  ToneTable tone_table = default_tone_table();
  int workers = 0;

  void validate() const;
  std::size_t worker_count(std::size_t jobs) const;
};

/// Applies the keys of `j` on top of `base`; unknown keys throw UsageError.
HarnessConfig apply_config(HarnessConfig base, const nlohmann::json& j);
HarnessConfig load_config(const std::optional<std::filesystem::path>& path, const nlohmann::json& overrides = {});
nlohmann::json to_json(const HarnessConfig& cfg);

struct CorpusItem {
  std::string id;
  std::filesystem::path wav;
  std::string reference;
};

/// Sorted <id>.wav + <id>.txt pairs. Throws on an empty corpus or a wav
/// without its transcript.
std::vector<CorpusItem> load_corpus(const std::filesystem::path& dir);

/// VAD over an equal grid; consecutive nonspeech cells are merged.
SegmentMap segment_for_optimizer(const AudioBuffer& buffer, const HarnessConfig& cfg);

struct OptimizeOutcome {
  SegmentMap segments;
  OptimizeResult result;
  RenderResult render;
  RecognitionResult final_recognition;
  double avg_speed = 0.0;
  std::optional<double> cer;  // ratios; absent with an empty reference
  std::optional<double> wer;
};

/// detect_voice -> split_equal -> optimize_schedule -> render -> recognize.
OptimizeOutcome run_optimize(const AudioBuffer& buffer, const std::optional<std::string>& reference,
                             Recognizer& recognizer, const HarnessConfig& cfg);

struct EvalReport {
  std::string id;
  double avg_speed = 0.0;
  double cer = 0.0;  // percent
  double wer = 0.0;  // percent
  LossBreakdown loss;
  SpeedSchedule schedule;
};

struct SweepCurve {
  std::vector<double> speeds;
  std::vector<double> cer_values;
  std::vector<double> wer_values;

  void validate() const;
  std::string to_csv() const;
};

struct EvalRow {
  std::string model;
  double avg_speed = 0.0;
  double cer_pct = 0.0;
  double wer_pct = 0.0;
};

struct EvalTable {
  std::vector<EvalRow> rows;  // constant 1.0x, constant mean, optimized
  std::vector<EvalReport> items;

  std::string to_csv() const;
};

nlohmann::json cmd_fixture(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir);
nlohmann::json cmd_stretch(const std::filesystem::path& in_wav, double rate, const std::filesystem::path& out_wav,
                           const HarnessConfig& cfg = {});
nlohmann::json cmd_optimize(const std::filesystem::path& in_wav, Recognizer& recognizer,
                            const std::optional<std::filesystem::path>& reference_path, const HarnessConfig& cfg,
                            const std::filesystem::path& out_dir);

SweepCurve run_sweep(const std::vector<CorpusItem>& corpus, const std::vector<double>& speeds,
                     Recognizer& recognizer, const HarnessConfig& cfg);
/// Reads "speed,<value>" rows (header required; a "cer" column is used when
/// present, otherwise the second column).
std::vector<std::pair<double, double>> read_human_curve(const std::filesystem::path& path);
/// Writes sweep.csv and correlation.json.
nlohmann::json cmd_sweep(const std::filesystem::path& corpus_dir, const std::vector<double>& speeds,
                         Recognizer& recognizer, const std::optional<std::filesystem::path>& human_curve,
                         const HarnessConfig& cfg, const std::filesystem::path& out_dir);

EvalTable run_eval(const std::vector<CorpusItem>& corpus, Recognizer& recognizer, const HarnessConfig& cfg);
/// Writes eval.csv and eval_items.jsonl.
EvalTable cmd_eval(const std::filesystem::path& corpus_dir, Recognizer& recognizer, const HarnessConfig& cfg,
                   const std::filesystem::path& out_dir);

std::vector<double> parse_speed_list(const std::string& text);

}  // namespace speedfit
