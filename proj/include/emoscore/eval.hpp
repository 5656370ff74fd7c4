#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "emoscore/dataio.hpp"
#include "emoscore/error.hpp"
#include "emoscore/scores.hpp"

namespace emoscore {

// RMSE over the N x 8 prediction grid. Pooling all N*8 squared differences
// makes the overall figure the RMS of the per-emotion RMSEs, so both
// readings of "RMSE of the eight emotion scores" coincide.

struct EvalReport {
  std::string label;
  std::size_t n_utterances = 0;
  double overall_rmse = 0.0;
  std::array<double, kEmotionCount> per_emotion_rmse{};
};

namespace detail {

// Neumaier compensated accumulation keeps the sum independent of rounding
// drift across platforms to ~1e-16 relative.
class CompensatedSum {
 public:
  void add(double value) {
    const double t = sum_ + value;
    if (std::fabs(sum_) >= std::fabs(value)) {
      compensation_ += (sum_ - t) + value;
    } else {
      compensation_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline void require_same_ids(const ScoreTable& a, const ScoreTable& b, const std::string& what) {
  std::vector<std::string> missing;
  for (const auto& [id, _] : a.scores) {
    if (!b.scores.count(id)) missing.push_back(id);
  }
  for (const auto& [id, _] : b.scores) {
    if (!a.scores.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string msg = what + ": utterance id sets differ; first mismatches:";
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) msg += " '" + missing[i] + "'";
    throw ValidationError(msg);
  }
}

}  // namespace detail

inline EvalReport rmse(const ScoreTable& pred, const ScoreTable& truth) {
  detail::require_same_ids(pred, truth, "rmse");
  if (pred.scores.empty()) throw ValidationError("rmse: no utterances to evaluate");
  std::array<detail::CompensatedSum, kEmotionCount> per_emotion;
  for (const auto& [id, truth_scores] : truth.scores) {
    if (!labels_in_range(truth_scores)) {
      throw ValidationError("rmse: truth labels for '" + id + "' fall outside the scale of 1 to 5");
    }
    const EmotionScores& pred_scores = pred.scores.at(id);
    for (int j = 0; j < kEmotionCount; ++j) {
      const double d = pred_scores[j] - truth_scores[j];
      per_emotion[j].add(d * d);
    }
  }
  EvalReport report;
  report.label = pred.label;
  report.n_utterances = pred.scores.size();
  const double n = static_cast<double>(report.n_utterances);
  detail::CompensatedSum total;
  for (int j = 0; j < kEmotionCount; ++j) {
    const double sum_sq = per_emotion[j].value();
    report.per_emotion_rmse[j] = std::sqrt(sum_sq / n);
    total.add(sum_sq);
  }
  report.overall_rmse = std::sqrt(total.value() / (n * kEmotionCount));
  return report;
}

// Ascending by overall RMSE (smaller is better); stable for ties.
inline std::vector<EvalReport> compare_runs(std::vector<EvalReport> reports) {
  if (reports.empty()) throw ValidationError("compare_runs: no reports");
  std::stable_sort(reports.begin(), reports.end(),
                   [](const EvalReport& a, const EvalReport& b) {
                     return a.overall_rmse < b.overall_rmse;
                   });
  return reports;
}

inline std::string format_report_text(const std::vector<EvalReport>& reports) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-20s %8s %12s", "run", "n", "overall");
  out += line;
  for (const auto& name : kEmotionNames) {
    std::snprintf(line, sizeof(line), " %10s", std::string(name).c_str());
    out += line;
  }
  out += '\n';
  for (const EvalReport& r : reports) {
    std::snprintf(line, sizeof(line), "%-20s %8zu %12.5f",
                  (r.label.empty() ? "(unnamed)" : r.label.c_str()), r.n_utterances,
                  r.overall_rmse);
    out += line;
    for (double v : r.per_emotion_rmse) {
      std::snprintf(line, sizeof(line), " %10.5f", v);
      out += line;
    }
    out += '\n';
  }
  return out;
}

inline std::string format_report_tsv(const std::vector<EvalReport>& reports) {
  std::string out;
  for (const EvalReport& r : reports) {
    out += "run\t" + (r.label.empty() ? std::string("(unnamed)") : r.label) + "\n";
    out += "n_utterances\t" + std::to_string(r.n_utterances) + "\n";
    out += "overall_rmse\t" + detail::format_double(r.overall_rmse) + "\n";
    for (int j = 0; j < kEmotionCount; ++j) {
      out += "rmse." + std::string(kEmotionNames[j]) + "\t" +
             detail::format_double(r.per_emotion_rmse[j]) + "\n";
    }
  }
  return out;
}

inline void write_report_files(const std::vector<EvalReport>& reports,
                               const std::filesystem::path& text_path,
                               const std::filesystem::path& tsv_path) {
  detail::write_file_bytes(text_path, format_report_text(reports));
  detail::write_file_bytes(tsv_path, format_report_tsv(reports));
}

}  // namespace emoscore
