// SPDX-License-Identifier: Apache-2.0
#include "speedfit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "speedfit/ctc.hpp"
#include "speedfit/metrics.hpp"

namespace speedfit {

void OptimizerConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(r_min >= 0.25)) throw std::invalid_argument("r_min must be >= 0.25");
  if (!(r_max <= 4.0)) throw std::invalid_argument("r_max must be <= 4.0");
  if (!(r_min <= r_max)) throw std::invalid_argument("r_min must not exceed r_max");
  if (!(rate_step > 0.0)) throw std::invalid_argument("rate_step must be > 0");
  if (eval_budget < 0) throw std::invalid_argument("eval_budget must be >= 0");
  if (!(ctc_cap > 0.0)) throw std::invalid_argument("ctc_cap must be > 0");
}

std::vector<double> OptimizerConfig::rate_grid() const {
  const auto steps = static_cast<std::size_t>(std::floor((r_max - r_min) / rate_step + 1e-9));
  std::vector<double> grid;
  for (std::size_t k = 0; k <= steps; ++k) {
    // Rounded to 1e-9 so 1.0 + 3 * 0.1 prints and compares as 1.3.
    grid.push_back(std::round((r_min + static_cast<double>(k) * rate_step) * 1e9) / 1e9);
  }
  return grid;
}

nlohmann::json to_json(const LossBreakdown& loss) {
  nlohmann::json raw = std::isfinite(loss.loss_ctc_raw) ? nlohmann::json(loss.loss_ctc_raw) : nlohmann::json(nullptr);
  return {{"loss_speed", loss.loss_speed},
          {"loss_ctc", loss.loss_ctc},
          {"loss_ctc_raw", raw},
          {"total", loss.total},
          {"mean_rate", loss.mean_rate},
          {"capped", loss.capped},
          {"ctc_source", loss.source == CtcSource::Posteriors ? "posteriors" : "cer_surrogate"}};
}

double loss_speed(std::span<const double> rates) {
  if (rates.empty()) throw std::invalid_argument("loss_speed needs at least one segment");
  double sum = 0.0;
  for (double r : rates) sum += r;
  // 10^-m rather than 0.1^m: the base 0.1 is inexact in binary and would
  // put integer means one ulp off.
  return std::pow(10.0, -(sum / static_cast<double>(rates.size())));
}

double loss_speed(const SpeedSchedule& schedule) {
  const auto rates = schedule.rates();
  return loss_speed(std::span<const double>(rates));
}

ScheduleEvaluator::ScheduleEvaluator(AudioBuffer buffer, std::string reference, Recognizer& recognizer,
                                     OptimizerConfig cfg, StretchConfig stretch)
    : renderer_(std::move(buffer), stretch), reference_(std::move(reference)), recognizer_(recognizer), cfg_(cfg) {
  cfg_.validate();
}

LossBreakdown ScheduleEvaluator::score(const SpeedSchedule& schedule, const RecognitionResult& rec) const {
  LossBreakdown out;
  const auto rates = schedule.rates();
  out.mean_rate = schedule.mean_rate();
  out.loss_speed = loss_speed(std::span<const double>(rates));

  double ctc;
  if (rec.posteriorgram) {
    out.source = CtcSource::Posteriors;
    const auto& post = *rec.posteriorgram;
    const auto labels = labels_from_text(post.alphabet, normalize_text(reference_));
    ctc = ctc_nll(post, labels);
    if (cfg_.ctc_normalize_by_label_length && !labels.empty()) ctc /= static_cast<double>(labels.size());
    out.loss_ctc_raw = ctc;
  } else {
    if (!cfg_.allow_cer_surrogate) {
      throw std::runtime_error("recognizer returned no posteriors and the CER surrogate is disabled");
    }
    out.source = CtcSource::CerSurrogate;
    const double err = normalize_text(reference_).empty() ? (normalize_text(rec.transcript).empty() ? 0.0 : 1.0)
                                                          : cer(reference_, rec.transcript);
    out.loss_ctc_raw = err;
    ctc = cfg_.ctc_cap * err;
  }
  out.capped = !(ctc < cfg_.ctc_cap) && out.source == CtcSource::Posteriors;
  out.loss_ctc = out.capped ? cfg_.ctc_cap : ctc;
  out.total = out.loss_speed + cfg_.lambda * out.loss_ctc;
  return out;
}

LossBreakdown ScheduleEvaluator::evaluate(const SpeedSchedule& schedule) {
  const auto rendered = renderer_.render(schedule);
  const auto rec = recognizer_.recognize(rendered.audio);
  ++calls_;
  return score(schedule, rec);
}

LossBreakdown total_loss(const AudioBuffer& buffer, const SpeedSchedule& schedule, const std::string& reference,
                         Recognizer& recognizer, const OptimizerConfig& cfg, const StretchConfig& stretch) {
  ScheduleEvaluator evaluator(buffer, reference, recognizer, cfg, stretch);
  return evaluator.evaluate(schedule);
}

namespace {

class GridSearch {
 public:
  GridSearch(ScheduleEvaluator& evaluator, const SegmentMap& segments, std::vector<double> grid, int budget)
      : evaluator_(evaluator), segments_(segments), grid_(std::move(grid)), budget_(budget) {
    top_ = static_cast<int>(grid_.size()) - 1;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      if (segments_.labels[i] == SegmentLabel::Speech) speech_.push_back(i);
    }
  }

  using Point = std::vector<int>;

  std::optional<LossBreakdown> eval(const Point& p, const char* phase, bool charged) {
    if (auto it = memo_.find(p); it != memo_.end()) return it->second;
    if (charged && charged_calls_ >= static_cast<std::size_t>(budget_)) return std::nullopt;
    const auto loss = evaluator_.evaluate(schedule(p));
    if (charged) ++charged_calls_;
    memo_.emplace(p, loss);

    TraceEntry entry;
    entry.eval_index = trace_.size();
    entry.phase = phase;
    entry.rates = rates(p);
    entry.loss = loss;
    if (!best_ || loss.total < best_loss_.total) {
      entry.accepted = true;
      best_ = p;
      best_loss_ = loss;
    } else if (loss.total == best_loss_.total && p < *best_) {
      best_ = p;
      best_loss_ = loss;
    }
    trace_.push_back(std::move(entry));
    return loss;
  }

  Point uniform(int k) const {
    Point p(segments_.size(), top_);
    for (auto s : speech_) p[s] = k;
    return p;
  }

  // Largest k in [lo, hi] with pred(k), given pred(lo) holds and pred is
  // monotone. Returns nullopt when the budget runs out.
  template <typename Probe>
  std::optional<int> bisect(int lo, int hi, Probe probe) {
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      const auto ok = probe(mid);
      if (!ok) return std::nullopt;
      if (*ok) lo = mid;
      else hi = mid - 1;
    }
    return lo;
  }

  // +-1 grid moves, segments in index order, best strictly improving move
  // per segment (ties to the lower rate). When a pass moves nothing, tries
  // exchanges (one segment up a step, another down) and resumes on success;
  // decodability is not monotone in a single rate, so some optima are only
  // reachable by trading speed between neighbors.
  void descend(Point cur, const char* phase) {
    auto cur_loss = eval(cur, phase, true);
    if (!cur_loss) return;
    for (;;) {
      bool moved = false;
      for (auto s : speech_) {
        std::optional<Point> pick;
        LossBreakdown pick_loss;
        for (int d : {-1, +1}) {
          const int k = cur[s] + d;
          if (k < 0 || k > top_) continue;
          Point cand = cur;
          cand[s] = k;
          const auto l = eval(cand, phase, true);
          if (!l) return;
          if (l->total < cur_loss->total && (!pick || l->total < pick_loss.total)) {
            pick = cand;
            pick_loss = *l;
          }
        }
        if (pick) {
          cur = *pick;
          cur_loss = pick_loss;
          moved = true;
        }
      }
      if (moved) continue;

      std::optional<Point> pick;
      LossBreakdown pick_loss;
      for (auto up : speech_) {
        for (auto down : speech_) {
          if (up == down || cur[up] == top_ || cur[down] == 0) continue;
          Point cand = cur;
          ++cand[up];
          --cand[down];
          const auto l = eval(cand, phase, true);
          if (!l) return;
          if (l->total < cur_loss->total && (!pick || l->total < pick_loss.total)) {
            pick = cand;
            pick_loss = *l;
          }
        }
      }
      if (!pick) return;
      cur = *pick;
      cur_loss = pick_loss;
    }
  }

  // Raise each speech segment as far as the render stays decodable. Returns
  // the last decodable point reached.
  std::optional<Point> climb(int base, const LossBreakdown& baseline) {
    auto feasible = [&](const LossBreakdown& l) {
      if (l.source == CtcSource::Posteriors) return !l.capped;
      return l.loss_ctc <= baseline.loss_ctc;
    };
    if (!feasible(baseline)) return std::nullopt;

    const auto start = bisect(base, top_, [&](int k) -> std::optional<bool> {
      const auto l = eval(uniform(k), "climb", true);
      if (!l) return std::nullopt;
      return feasible(*l);
    });
    if (!start) return std::nullopt;
    Point cur = uniform(*start);
    auto cur_loss = eval(cur, "climb", true);
    if (!cur_loss) return cur;

    for (auto s : speech_) {
      if (cur[s] == top_) continue;
      auto probe = [&](int k) -> std::optional<bool> {
        Point cand = cur;
        cand[s] = k;
        const auto l = eval(cand, "climb", true);
        if (!l) return std::nullopt;
        return feasible(*l) && l->total < cur_loss->total;
      };
      const auto at_top = probe(top_);
      if (!at_top) return cur;
      std::optional<int> k = *at_top ? std::optional<int>(top_) : bisect(cur[s], top_ - 1, probe);
      if (!k) return cur;
      if (*k != cur[s]) {
        cur[s] = *k;
        cur_loss = eval(cur, "climb", true);
        if (!cur_loss) return cur;
      }
    }
    return cur;
  }

  SpeedSchedule schedule(const Point& p) const {
    return SpeedSchedule::from_segments(segments_, rates(p));
  }

  std::vector<double> rates(const Point& p) const {
    std::vector<double> r(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) r[i] = grid_[static_cast<std::size_t>(p[i])];
    return r;
  }

  const std::vector<std::size_t>& speech() const { return speech_; }
  int top() const { return top_; }
  const std::optional<Point>& best() const { return best_; }
  const LossBreakdown& best_loss() const { return best_loss_; }
  std::vector<TraceEntry>& trace() { return trace_; }
  std::size_t charged_calls() const { return charged_calls_; }

 private:
  ScheduleEvaluator& evaluator_;
  const SegmentMap& segments_;
  std::vector<double> grid_;
  int budget_;
  int top_ = 0;
  std::vector<std::size_t> speech_;
  std::map<Point, LossBreakdown> memo_;
  std::vector<TraceEntry> trace_;
  std::optional<Point> best_;
  LossBreakdown best_loss_;
  std::size_t charged_calls_ = 0;
};

}  // namespace

OptimizeResult optimize_schedule(const AudioBuffer& buffer, const SegmentMap& segments,
                                 std::optional<std::string> reference, Recognizer& recognizer,
                                 const OptimizerConfig& cfg, const StretchConfig& stretch) {
  cfg.validate();
  segments.validate();
  if (segments.total_length() != buffer.size()) throw std::invalid_argument("segments do not cover the buffer");
  if (segments.size() == 0) throw std::invalid_argument("cannot optimize an empty buffer");

  std::size_t extra_calls = 0;
  if (!reference) {
    if (cfg.reference_mode != ReferenceMode::SelfLabel) {
      throw std::invalid_argument("no reference given and reference_mode is \"provided\"");
    }
    reference = recognizer.recognize(buffer).transcript;
    ++extra_calls;
  }

  ScheduleEvaluator evaluator(buffer, *reference, recognizer, cfg, stretch);
  const auto grid = cfg.rate_grid();
  GridSearch search(evaluator, segments, grid, cfg.eval_budget);

  int base = 0;
  for (int k = 0; k <= search.top(); ++k) {
    if (grid[static_cast<std::size_t>(k)] <= 1.0 + 1e-9) base = k;
  }

  const auto baseline = *search.eval(search.uniform(base), "baseline", false);
  if (!search.speech().empty() && cfg.eval_budget > 0) {
    const int warm = *search.bisect(base, search.top(), [&](int k) -> std::optional<bool> {
      return search.eval(search.uniform(k), "warm_start", false)->total <= baseline.total;
    });
    // Climbing is cheap (about S log G calls) and lands near the decodable
    // frontier; descent is what eats the budget, so it comes after.
    if (const auto reached = search.climb(base, baseline)) search.descend(*reached, "descent");
    search.descend(search.uniform(warm), "polish");
    search.descend(*search.best(), "polish");
  }

  OptimizeResult out;
  out.schedule = search.schedule(*search.best());
  out.loss = search.best_loss();
  out.trace = std::move(search.trace());
  out.reference = *reference;
  out.recognizer_calls = evaluator.recognizer_calls() + extra_calls;
  out.budgeted_calls = search.charged_calls();
  return out;
}

nlohmann::json to_json(const TraceEntry& e) {
  return {{"eval_index", e.eval_index},
          {"phase", e.phase},
          {"schedule", e.rates},
          {"loss_speed", e.loss.loss_speed},
          {"loss_ctc", e.loss.loss_ctc},
          {"total", e.loss.total},
          {"accepted", e.accepted}};
}

std::string trace_jsonl(const std::vector<TraceEntry>& trace) {
  std::string out;
  for (const auto& e : trace) out += to_json(e).dump() + "\n";
  return out;
}

}  // namespace speedfit
