// SPDX-License-Identifier: Apache-2.0

#include "avsr/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "avsr/error.hpp"

namespace avsr::metrics {

WerBreakdown wer(const std::vector<std::string>& ref,
                 const std::vector<std::string>& hyp) {
  if (ref.empty()) throw DataError("wer: empty reference");
  const size_t n = ref.size(), m = hyp.size();

  // cost[i][j]: minimal edits aligning ref[0..i) with hyp[0..j)
  std::vector<std::vector<int>> cost(n + 1, std::vector<int>(m + 1, 0));
  // 0 = match, 1 = substitution, 2 = deletion, 3 = insertion
  std::vector<std::vector<int8_t>> op(n + 1, std::vector<int8_t>(m + 1, 0));
  for (size_t i = 1; i <= n; ++i) {
    cost[i][0] = static_cast<int>(i);
    op[i][0] = 2;
  }
  for (size_t j = 1; j <= m; ++j) {
    cost[0][j] = static_cast<int>(j);
    op[0][j] = 3;
  }
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const bool eq = ref[i - 1] == hyp[j - 1];
      const int diag = cost[i - 1][j - 1] + (eq ? 0 : 1);
      const int del = cost[i - 1][j] + 1;
      const int ins = cost[i][j - 1] + 1;
      // diagonal wins ties: substitution preferred over insertion+deletion
      if (diag <= del && diag <= ins) {
        cost[i][j] = diag;
        op[i][j] = eq ? 0 : 1;
      } else if (del <= ins) {
        cost[i][j] = del;
        op[i][j] = 2;
      } else {
        cost[i][j] = ins;
        op[i][j] = 3;
      }
    }
  }

  WerBreakdown out;
  out.ref_words = static_cast<int64_t>(n);
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    switch (op[i][j]) {
      case 0:
        --i;
        --j;
        break;
      case 1:
        ++out.substitutions;
        --i;
        --j;
        break;
      case 2:
        ++out.deletions;
        --i;
        break;
      default:
        ++out.insertions;
        --j;
        break;
    }
  }
  out.wer = static_cast<double>(out.substitutions + out.deletions + out.insertions) /
            static_cast<double>(out.ref_words);
  return out;
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

double word_accuracy(const std::vector<int>& preds, const std::vector<int>& golds) {
  if (preds.size() != golds.size())
    throw ContractError("word_accuracy: " + std::to_string(preds.size()) +
                        " predictions vs " + std::to_string(golds.size()) + " labels");
  if (preds.empty()) return 0.0;
  int64_t hit = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == golds[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

const std::vector<std::string>& snr_row_order() {
  static const std::vector<std::string> rows{"clean", "10", "5", "0", "-5", "-10"};
  return rows;
}

namespace {

std::string cell_text(const ResultGrid& results, const std::string& mode,
                      const std::string& snr) {
  auto it = results.find({mode, snr});
  if (it == results.end() || it->second.count == 0) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * it->second.mean());
  return buf;
}

}  // namespace

std::string report_table(const std::vector<std::string>& modes,
                         const ResultGrid& results) {
  std::ostringstream os;
  const int w = 8;
  os << "SNR dB";
  os << std::string(static_cast<size_t>(w) - 6, ' ');
  for (const auto& m : modes) {
    os << "|";
    os << std::string(w - std::min<size_t>(m.size(), w), ' ') << m.substr(0, w);
  }
  os << "\n";
  os << std::string(static_cast<size_t>(w) + modes.size() * (w + 1), '-') << "\n";
  for (const auto& snr : snr_row_order()) {
    os << snr << std::string(static_cast<size_t>(w) - snr.size(), ' ');
    for (const auto& m : modes) {
      const std::string c = cell_text(results, m, snr);
      os << "|" << std::string(w - std::min<size_t>(c.size(), w), ' ') << c;
    }
    os << "\n";
  }
  return os.str();
}

std::string report_csv(const std::vector<std::string>& modes,
                       const ResultGrid& results) {
  std::ostringstream os;
  os << "snr_db";
  for (const auto& m : modes) os << "," << m;
  os << "\n";
  for (const auto& snr : snr_row_order()) {
    os << snr;
    for (const auto& m : modes) os << "," << cell_text(results, m, snr);
    os << "\n";
  }
  return os.str();
}

}  // namespace avsr::metrics
