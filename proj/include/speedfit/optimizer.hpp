// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "speedfit/audio.hpp"
#include "speedfit/recognizer.hpp"
#include "speedfit/segmenter.hpp"
#include "speedfit/stretch.hpp"

namespace speedfit {

enum class ReferenceMode { Provided, SelfLabel };

struct OptimizerConfig {
  double lambda = 1e-7;
  double r_min = 1.0;
  double r_max = 3.0;
  double rate_step = 0.1;
  int eval_budget = 200;
  bool ctc_normalize_by_label_length = false;
  double ctc_cap = 1e4;
  ReferenceMode reference_mode = ReferenceMode::SelfLabel;
  /// Score text-only recognizers by ctc_cap * CER instead of CTC.
  bool allow_cer_surrogate = true;

  void validate() const;
  /// {r_min, r_min + step, ...} up to r_max inclusive.
  std::vector<double> rate_grid() const;
};

enum class CtcSource { Posteriors, CerSurrogate };

struct LossBreakdown {
  double loss_speed = 0.0;
  double loss_ctc = 0.0;  // after normalization and capping
  double total = 0.0;
  double mean_rate = 0.0;
  double loss_ctc_raw = 0.0;  // before capping; +inf when no alignment exists
  bool capped = false;
  CtcSource source = CtcSource::Posteriors;
};

nlohmann::json to_json(const LossBreakdown& loss);

/// 0.1 raised to the unweighted mean rate.
double loss_speed(std::span<const double> rates);
double loss_speed(const SpeedSchedule& schedule);

/// Renders, recognizes and scores schedules over one utterance. Keeps the
/// rendered-piece cache across calls and counts recognizer invocations.
class ScheduleEvaluator {
 public:
  ScheduleEvaluator(AudioBuffer buffer, std::string reference, Recognizer& recognizer, OptimizerConfig cfg,
                    StretchConfig stretch = {});

  LossBreakdown evaluate(const SpeedSchedule& schedule);
  /// Scores an already-recognized render.
  LossBreakdown score(const SpeedSchedule& schedule, const RecognitionResult& recognition) const;

  std::size_t recognizer_calls() const { return calls_; }
  const std::string& reference() const { return reference_; }
  const AudioBuffer& buffer() const { return renderer_.source(); }
  ScheduleRenderer& renderer() { return renderer_; }

 private:
  ScheduleRenderer renderer_;
  std::string reference_;
  Recognizer& recognizer_;
  OptimizerConfig cfg_;
  std::size_t calls_ = 0;
};

LossBreakdown total_loss(const AudioBuffer& buffer, const SpeedSchedule& schedule, const std::string& reference,
                         Recognizer& recognizer, const OptimizerConfig& cfg, const StretchConfig& stretch = {});

struct TraceEntry {
  std::size_t eval_index = 0;
  std::string phase;
  std::vector<double> rates;
  LossBreakdown loss;
  bool accepted = false;  // strictly improved on the best schedule so far
};

struct OptimizeResult {
  SpeedSchedule schedule;
  LossBreakdown loss;
  std::vector<TraceEntry> trace;
  std::string reference;
  std::size_t recognizer_calls = 0;
  std::size_t budgeted_calls = 0;  // calls charged against eval_budget
};

/// Grid search for the schedule minimizing loss_speed + lambda * loss_ctc.
///
/// Non-speech segments are pinned at r_max. Speech segments start from the
/// baseline (every speech rate at the grid point nearest below 1.0) and go
/// through three deterministic phases, all on the rate grid:
///   1. warm start: bisection for the largest constant rate whose loss does
///      not exceed the baseline's, then +-1-step coordinate descent;
///   2. intelligible climb: bisection for the largest constant rate whose
///      render keeps every reference symbol decodable (finite, uncapped CTC,
///      or no CER increase for text-only recognizers), then per segment in
///      index order, bisection for the highest rate that stays decodable
///      and improves the loss;
///   3. +-1-step coordinate descent from the best schedule found.
/// Evaluations are memoized per schedule. The baseline and the phase-1
/// bisection are free; everything else is charged to eval_budget.
/// The result is the best evaluated schedule; equal losses prefer the
/// lexicographically lower rate vector.
OptimizeResult optimize_schedule(const AudioBuffer& buffer, const SegmentMap& segments,
                                 std::optional<std::string> reference, Recognizer& recognizer,
                                 const OptimizerConfig& cfg, const StretchConfig& stretch = {});

nlohmann::json to_json(const TraceEntry& entry);
std::string trace_jsonl(const std::vector<TraceEntry>& trace);

}  // namespace speedfit
