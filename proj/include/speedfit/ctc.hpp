// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace speedfit {

/// Stand-in for log(0) in log-space arithmetic.
inline constexpr double kLogZero = -1e30;

/// Frame-wise log-probabilities over `alphabet` plus a trailing blank column.
/// Row-major: log_probs[t * width() + k]; column alphabet.size() is blank.
struct Posteriorgram {
  std::vector<std::string> alphabet;
  double frame_hop_ms = 10.0;
  std::vector<double> log_probs;

  std::size_t width() const { return alphabet.size() + 1; }
  std::size_t blank() const { return alphabet.size(); }
  std::size_t frames() const { return width() == 0 ? 0 : log_probs.size() / width(); }
  double at(std::size_t t, std::size_t k) const { return log_probs[t * width() + k]; }
  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(log_probs).subspan(t * width(), width());
  }

  /// Throws std::invalid_argument unless T >= 1, rows are complete, and each
  /// row's log-sum-exp is within `tolerance` of zero.
  void validate(double tolerance = 1e-4) const;
};

nlohmann::json to_json(const Posteriorgram& post);
/// Accepts rows of width |alphabet| + 1 (blank implicit, last) or rows of
/// width |alphabet| whose last alphabet entry names the blank.
Posteriorgram posteriorgram_from_json(const nlohmann::json& alphabet, double frame_hop_ms,
                                      const nlohmann::json& rows);

double log_sum_exp(double a, double b);
double log_sum_exp(std::span<const double> xs);

/// Maps each UTF-8 character of `text` to its alphabet index. A space maps to
/// "|" when the alphabet has no literal space. Throws std::invalid_argument
/// for characters outside the alphabet.
std::vector<std::size_t> labels_from_text(const std::vector<std::string>& alphabet, std::string_view text);
std::string text_from_labels(const std::vector<std::string>& alphabet, std::span<const std::size_t> labels);

/// CTC negative log-likelihood (nats) by the forward recursion over the
/// blank-interleaved label sequence. Returns +infinity when no alignment
/// exists. Throws std::invalid_argument for labels outside the alphabet.
double ctc_nll(const Posteriorgram& post, std::span<const std::size_t> labels);

/// Per-frame argmax (ties to the lowest column), repeats collapsed, blanks dropped.
std::vector<std::size_t> ctc_greedy_decode(const Posteriorgram& post);
std::string ctc_greedy_text(const Posteriorgram& post);

}  // namespace speedfit
