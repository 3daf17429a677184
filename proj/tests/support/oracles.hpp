// SPDX-License-Identifier: Apache-2.0
// Slow reference implementations used only by tests. None of them share code
// with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace oracle {

// Edit distance by top-down recursion over the three edit choices, memoized
// on (i, j) suffix positions.
template <typename T>
int edit_distance(const std::vector<T>& a, const std::vector<T>& b) {
  const std::size_t cols = b.size() + 1;
  std::vector<int> memo((a.size() + 1) * cols, -1);
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> int {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    int& slot = memo[i * cols + j];
    if (slot >= 0) return slot;
    int best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    return slot = best;
  };
  return go(0, 0);
}

// Every sequence over {0..k-1} of length 0..max_len.
inline std::vector<std::vector<int>> all_sequences(int k, int max_len) {
  std::vector<std::vector<int>> out{{}};
  std::vector<std::vector<int>> frontier{{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& s : frontier) {
      for (int c = 0; c < k; ++c) {
        auto t = s;
        t.push_back(c);
        next.push_back(t);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

// CTC likelihood by enumerating all width^T frame paths, collapsing each and
// summing the probabilities of those equal to `labels`. probs[t][k], blank = width-1.
inline double ctc_nll_bruteforce(const std::vector<std::vector<double>>& probs, const std::vector<std::size_t>& labels) {
  const std::size_t T = probs.size();
  const std::size_t W = probs[0].size();
  const std::size_t blank = W - 1;
  std::vector<std::size_t> path(T, 0);
  double total = 0.0;
  for (;;) {
    std::vector<std::size_t> collapsed;
    std::size_t prev = blank;
    for (std::size_t t = 0; t < T; ++t) {
      if (path[t] != blank && path[t] != prev) collapsed.push_back(path[t]);
      prev = path[t];
    }
    if (collapsed == labels) {
      double p = 1.0;
      for (std::size_t t = 0; t < T; ++t) p *= probs[t][path[t]];
      total += p;
    }
    std::size_t t = 0;
    while (t < T && ++path[t] == W) path[t++] = 0;
    if (t == T) break;
  }
  return total > 0.0 ? -std::log(total) : std::numeric_limits<double>::infinity();
}

// CTC likelihood by the backward recursion in the probability domain; for
// long inputs where enumeration is infeasible. Probabilities are renormalized
// per frame and the scales accumulated in log space.
inline double ctc_nll_backward(const std::vector<std::vector<double>>& probs, const std::vector<std::size_t>& labels) {
  const std::size_t T = probs.size();
  const std::size_t blank = probs[0].size() - 1;
  std::vector<std::size_t> ext{blank};
  for (auto l : labels) {
    ext.push_back(l);
    ext.push_back(blank);
  }
  const std::size_t S = ext.size();
  std::vector<double> beta(S, 0.0);
  beta[S - 1] = probs[T - 1][blank];
  if (S >= 2) beta[S - 2] = probs[T - 1][ext[S - 2]];
  double log_scale = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    std::vector<double> next(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      double acc = beta[s];
      if (s + 1 < S) acc += beta[s + 1];
      if (s + 2 < S && ext[s] != blank && ext[s + 2] != ext[s]) acc += beta[s + 2];
      next[s] = acc * probs[t][ext[s]];
    }
    double m = 0.0;
    for (double v : next) m = std::max(m, v);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    for (double& v : next) v /= m;
    log_scale += std::log(m);
    beta = std::move(next);
  }
  const double start = beta[0] + (S >= 2 ? beta[1] : 0.0);
  if (start <= 0.0) return std::numeric_limits<double>::infinity();
  return -(std::log(start) + log_scale);
}

// Frequency of the largest Hann-windowed DFT magnitude, scanned on a fine grid.
inline double dft_peak_hz(const std::vector<float>& x, int rate, double lo_hz, double hi_hz, double step_hz = 0.5) {
  const std::size_t n = x.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = x[i] * (0.5 - 0.5 * std::cos(2.0 * M_PI * i / std::max<std::size_t>(1, n - 1)));
  double best_f = lo_hz;
  double best_mag = -1.0;
  for (double f = lo_hz; f <= hi_hz; f += step_hz) {
    const double omega = 2.0 * M_PI * f / rate;
    std::complex<double> acc = 0.0;
    const std::complex<double> rot = std::polar(1.0, -omega);
    std::complex<double> ph = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += w[i] * ph;
      ph *= rot;
    }
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best_f = f;
    }
  }
  return best_f;
}

}  // namespace oracle
