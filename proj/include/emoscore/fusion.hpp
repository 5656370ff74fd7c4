#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "emoscore/dataio.hpp"
#include "emoscore/error.hpp"
#include "emoscore/scores.hpp"

namespace emoscore {

// Score fusion across model runs: plain mean, validation-RMSE-ranked
// weighted mean, or elementwise maximum. Every table entering a fusion must
// cover the same utterance ids.

struct FusionWeights {
  std::vector<double> values;  // ordered to match the run list

  void validate() const {
    double sum = 0.0;
    for (double w : values) {
      if (!(std::isfinite(w) && w >= 0.0)) {
        throw ValidationError("fusion weights must be finite and >= 0");
      }
      sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
      throw ValidationError("fusion weights must sum to 1, got " + std::to_string(sum));
    }
  }
};

namespace detail {

inline void require_aligned_tables(const std::vector<ScoreTable>& tables,
                                   const std::string& what) {
  if (tables.empty()) throw ValidationError(what + ": no score tables given");
  for (std::size_t i = 1; i < tables.size(); ++i) {
    std::vector<std::string> missing;
    for (const auto& [id, _] : tables[0].scores) {
      if (!tables[i].scores.count(id)) missing.push_back("'" + id + "'");
    }
    for (const auto& [id, _] : tables[i].scores) {
      if (!tables[0].scores.count(id)) missing.push_back("'" + id + "'");
    }
    if (!missing.empty()) {
      std::sort(missing.begin(), missing.end());
      std::string msg = what + ": table '" + tables[i].label +
                        "' does not cover the same utterances as '" + tables[0].label +
                        "'; mismatched ids:";
      for (std::size_t k = 0; k < missing.size() && k < 5; ++k) msg += " " + missing[k];
      throw ValidationError(msg);
    }
  }
}

}  // namespace detail

inline ScoreTable fuse_average(const std::vector<ScoreTable>& tables) {
  detail::require_aligned_tables(tables, "fuse_average");
  ScoreTable out;
  out.label = "average";
  const double inv_n = 1.0 / static_cast<double>(tables.size());
  for (const auto& [id, first] : tables[0].scores) {
    EmotionScores fused{};
    for (int j = 0; j < kEmotionCount; ++j) {
      double acc = first[j];
      for (std::size_t i = 1; i < tables.size(); ++i) acc += tables[i].scores.at(id)[j];
      fused[j] = acc * inv_n;
    }
    out.scores.emplace(id, fused);
  }
  return out;
}

inline ScoreTable fuse_weighted(const std::vector<ScoreTable>& tables, const FusionWeights& w) {
  detail::require_aligned_tables(tables, "fuse_weighted");
  if (w.values.size() != tables.size()) {
    throw ValidationError("fuse_weighted: " + std::to_string(w.values.size()) + " weights for " +
                          std::to_string(tables.size()) + " tables");
  }
  w.validate();
  ScoreTable out;
  out.label = "weighted";
  for (const auto& [id, first] : tables[0].scores) {
    EmotionScores fused{};
    for (int j = 0; j < kEmotionCount; ++j) {
      double acc = w.values[0] * first[j];
      for (std::size_t i = 1; i < tables.size(); ++i) {
        acc += w.values[i] * tables[i].scores.at(id)[j];
      }
      fused[j] = acc;
    }
    out.scores.emplace(id, fused);
  }
  return out;
}

inline ScoreTable fuse_max(const std::vector<ScoreTable>& tables) {
  detail::require_aligned_tables(tables, "fuse_max");
  ScoreTable out;
  out.label = "max";
  for (const auto& [id, first] : tables[0].scores) {
    EmotionScores fused = first;
    for (std::size_t i = 1; i < tables.size(); ++i) {
      const EmotionScores& s = tables[i].scores.at(id);
      for (int j = 0; j < kEmotionCount; ++j) fused[j] = std::max(fused[j], s[j]);
    }
    out.scores.emplace(id, fused);
  }
  return out;
}

struct RunRmse {
  std::string label;
  double val_rmse = 0.0;
};

// The three-run weighted template: 0.6 to the best validation RMSE, 0.2 to
// the other two. Ties rank lexicographically by label. Returned in the
// original run order.
inline FusionWeights assign_weights_by_val_rmse(const std::vector<RunRmse>& runs) {
  if (runs.size() != 3) {
    throw ValidationError("weighted fusion needs exactly 3 runs, got " +
                          std::to_string(runs.size()));
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      if (runs[i].label == runs[j].label) {
        throw ValidationError("weighted fusion: duplicate run label '" + runs[i].label + "'");
      }
    }
  }
  std::vector<std::size_t> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (runs[a].val_rmse != runs[b].val_rmse) return runs[a].val_rmse < runs[b].val_rmse;
    return runs[a].label < runs[b].label;
  });
  FusionWeights w;
  w.values.assign(3, 0.2);
  w.values[order[0]] = 0.6;
  return w;
}

}  // namespace emoscore
