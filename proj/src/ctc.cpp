// SPDX-License-Identifier: Apache-2.0
#include "speedfit/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "speedfit/metrics.hpp"

namespace speedfit {

double log_sum_exp(double a, double b) {
  if (a <= kLogZero) return std::max(b, kLogZero);
  if (b <= kLogZero) return std::max(a, kLogZero);
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

double log_sum_exp(std::span<const double> xs) {
  double hi = kLogZero;
  for (double x : xs) hi = std::max(hi, x);
  if (hi <= kLogZero) return kLogZero;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

void Posteriorgram::validate(double tolerance) const {
  if (log_probs.empty() || log_probs.size() % width() != 0) {
    throw std::invalid_argument("posteriorgram needs at least one complete frame");
  }
  for (std::size_t t = 0; t < frames(); ++t) {
    const double lse = log_sum_exp(row(t));
    if (!(std::abs(lse) <= tolerance)) {
      throw std::invalid_argument("posteriorgram frame " + std::to_string(t) + " is not normalized");
    }
  }
}

nlohmann::json to_json(const Posteriorgram& post) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < post.frames(); ++t) {
    const auto r = post.row(t);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"alphabet", post.alphabet}, {"frame_hop_ms", post.frame_hop_ms}, {"log_probs", rows}};
}

Posteriorgram posteriorgram_from_json(const nlohmann::json& alphabet, double frame_hop_ms,
                                      const nlohmann::json& rows) {
  Posteriorgram post;
  post.alphabet = alphabet.get<std::vector<std::string>>();
  post.frame_hop_ms = frame_hop_ms;
  if (!rows.is_array() || rows.empty()) throw std::invalid_argument("posterior rows missing");
  const std::size_t w = rows.front().size();
  if (w == post.alphabet.size() && !post.alphabet.empty()) {
    post.alphabet.pop_back();
  } else if (w != post.alphabet.size() + 1) {
    throw std::invalid_argument("posterior row width does not match alphabet");
  }
  post.log_probs.reserve(rows.size() * w);
  for (const auto& r : rows) {
    if (r.size() != w) throw std::invalid_argument("ragged posterior rows");
    for (const auto& v : r) post.log_probs.push_back(v.get<double>());
  }
  return post;
}

std::vector<std::size_t> labels_from_text(const std::vector<std::string>& alphabet, std::string_view text) {
  const bool has_space = std::find(alphabet.begin(), alphabet.end(), " ") != alphabet.end();
  std::vector<std::size_t> labels;
  for (const auto& ch : utf8_chars(text)) {
    const std::string sym = (ch == " " && !has_space) ? "|" : ch;
    const auto it = std::find(alphabet.begin(), alphabet.end(), sym);
    if (it == alphabet.end()) throw std::invalid_argument("symbol '" + ch + "' not in recognizer alphabet");
    labels.push_back(static_cast<std::size_t>(it - alphabet.begin()));
  }
  return labels;
}

std::string text_from_labels(const std::vector<std::string>& alphabet, std::span<const std::size_t> labels) {
  std::string out;
  for (auto l : labels) out += alphabet.at(l);
  return out;
}

double ctc_nll(const Posteriorgram& post, std::span<const std::size_t> labels) {
  const std::size_t blank = post.blank();
  for (auto l : labels) {
    if (l >= blank) throw std::invalid_argument("label index outside alphabet");
  }
  const std::size_t T = post.frames();
  const std::size_t S = 2 * labels.size() + 1;
  if (T == 0) return std::numeric_limits<double>::infinity();

  auto ext = [&](std::size_t s) { return s % 2 == 0 ? blank : labels[s / 2]; };

  std::vector<double> alpha(S, kLogZero);
  std::vector<double> next(S, kLogZero);
  alpha[0] = post.at(0, blank);
  if (S > 1) alpha[1] = post.at(0, ext(1));

  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double a = alpha[s];
      if (s >= 1) a = log_sum_exp(a, alpha[s - 1]);
      if (s >= 2 && ext(s) != blank && ext(s) != ext(s - 2)) a = log_sum_exp(a, alpha[s - 2]);
      next[s] = a <= kLogZero ? kLogZero : std::max(kLogZero, a + post.at(t, ext(s)));
    }
    std::swap(alpha, next);
  }

  double total = alpha[S - 1];
  if (S > 1) total = log_sum_exp(total, alpha[S - 2]);
  // Anything within a factor of two of the floor is an impossible alignment.
  if (total <= 0.5 * kLogZero) return std::numeric_limits<double>::infinity();
  return std::max(0.0, -total);
}

std::vector<std::size_t> ctc_greedy_decode(const Posteriorgram& post) {
  std::vector<std::size_t> out;
  std::size_t prev = post.blank();
  for (std::size_t t = 0; t < post.frames(); ++t) {
    const auto r = post.row(t);
    const auto best = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    if (best != prev && best != post.blank()) out.push_back(best);
    prev = best;
  }
  return out;
}

std::string ctc_greedy_text(const Posteriorgram& post) {
  const auto labels = ctc_greedy_decode(post);
  return text_from_labels(post.alphabet, labels);
}

}  // namespace speedfit
