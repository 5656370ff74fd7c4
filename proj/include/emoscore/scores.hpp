#pragma once

#include <array>
#include <cmath>
#include <string_view>

namespace emoscore {

inline constexpr int kEmotionCount = 8;

inline constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "sadness", "happiness", "relaxation", "surprise",
    "anger",   "fear",      "disgust",    "neutral",
};

// Ground-truth intensities live on a 1..5 scale; model predictions are
// unconstrained unless clamped at export.
inline constexpr double kLabelMin = 1.0;
inline constexpr double kLabelMax = 5.0;

using EmotionScores = std::array<double, kEmotionCount>;

inline bool scores_finite(const EmotionScores& s) {
  for (double v : s) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline bool labels_in_range(const EmotionScores& s) {
  for (double v : s) {
    if (!(v >= kLabelMin && v <= kLabelMax)) return false;
  }
  return true;
}

inline EmotionScores clamp_scores(EmotionScores s) {
  for (double& v : s) v = std::min(kLabelMax, std::max(kLabelMin, v));
  return s;
}

}  // namespace emoscore
