// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

namespace avsr::metrics {

struct WerBreakdown {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t ref_words = 0;
  double wer = 0.0;  // (S+D+I)/N
};

// Minimal-edit alignment over words with unit costs; ties prefer a
// substitution over an insertion+deletion pair.
WerBreakdown wer(const std::vector<std::string>& ref,
                 const std::vector<std::string>& hyp);

// Case-folding whitespace tokenizer used before scoring.
std::vector<std::string> tokenize_words(const std::string& text);

double word_accuracy(const std::vector<int>& preds, const std::vector<int>& golds);

// Accumulated results for one (mode, snr) cell.
struct EvalCell {
  double wer_sum = 0.0;
  int64_t count = 0;

  double mean() const { return count ? wer_sum / static_cast<double>(count) : 0.0; }
};

using ResultGrid = std::map<std::pair<std::string, std::string>, EvalCell>;

// Rows ordered clean,10,5,0,-5,-10; one column per mode; cells as percent
// with one decimal, '-' where absent.
std::string report_table(const std::vector<std::string>& modes,
                         const ResultGrid& results);
std::string report_csv(const std::vector<std::string>& modes,
                       const ResultGrid& results);

const std::vector<std::string>& snr_row_order();

}  // namespace avsr::metrics
