// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace speedfit {

struct EditOps {
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t substitutions = 0;

  std::size_t total() const { return insertions + deletions + substitutions; }
  bool operator==(const EditOps&) const = default;
};

/// Minimal unit-cost Levenshtein alignment of hypothesis against reference.
/// Among minimal alignments the backtrace prefers substitution (or match),
/// then insertion, then deletion.
template <typename T>
EditOps edit_distance(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t cols = m + 1;
  std::vector<std::size_t> d((n + 1) * cols);
  for (std::size_t i = 0; i <= n; ++i) d[i * cols] = i;
  for (std::size_t j = 0; j <= m; ++j) d[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = d[(i - 1) * cols + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const std::size_t ins = d[i * cols + j - 1] + 1;
      const std::size_t del = d[(i - 1) * cols + j] + 1;
      d[i * cols + j] = std::min({diag, ins, del});
    }
  }

  EditOps ops;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const std::size_t here = d[i * cols + j];
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (d[(i - 1) * cols + j - 1] + (same ? 0 : 1) == here) {
        if (!same) ++ops.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && d[i * cols + j - 1] + 1 == here) {
      ++ops.insertions;
      --j;
      continue;
    }
    ++ops.deletions;
    --i;
  }
  return ops;
}

template <typename T>
EditOps edit_distance(const std::vector<T>& ref, const std::vector<T>& hyp) {
  return edit_distance(std::span<const T>(ref), std::span<const T>(hyp));
}

/// ASCII case fold, whitespace runs collapsed to one space, ends trimmed.
/// Punctuation is kept.
std::string normalize_text(std::string_view text);

/// Splits on whitespace.
std::vector<std::string> split_words(std::string_view text);

/// UTF-8 code points of `text`, each as its own string.
std::vector<std::string> utf8_chars(std::string_view text);

/// (ins + sub + del) / |ref|. Throws std::invalid_argument on empty reference.
double wer(std::span<const std::string> ref, std::span<const std::string> hyp);
/// Word error rate on raw text (normalized first).
double wer(std::string_view ref, std::string_view hyp);

/// Character error rate on normalized text; spaces count as characters.
double cer(std::string_view ref, std::string_view hyp);

/// Pearson product-moment correlation. Throws std::invalid_argument on length
/// mismatch, fewer than two points, or a constant series.
double pearson(std::span<const double> xs, std::span<const double> ys);

}  // namespace speedfit
