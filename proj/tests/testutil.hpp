#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emoscore/matrix.hpp"
#include "emoscore/rng.hpp"
#include "emoscore/scores.hpp"

namespace testutil {

// Scratch directory, unique per process, wiped on construction so reruns
// start clean.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() /
              ("emoscore_test_" + std::to_string(::getpid()) + "_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline emoscore::Matrix random_matrix(int rows, int cols, emoscore::Rng& rng, double scale = 1.0) {
  emoscore::Matrix m(rows, cols);
  for (auto& v : m.data) v = static_cast<float>(rng.uniform(-scale, scale));
  return m;
}

inline emoscore::EmotionScores random_scores(emoscore::Rng& rng, double lo = 1.0, double hi = 5.0) {
  emoscore::EmotionScores s{};
  for (auto& v : s) v = rng.uniform(lo, hi);
  return s;
}

// Naive double-loop RMSE used as the evaluation oracle. Kept free of any
// library accumulation helpers on purpose.
inline double naive_rmse(const std::vector<emoscore::EmotionScores>& pred,
                         const std::vector<emoscore::EmotionScores>& truth) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t u = 0; u < pred.size(); ++u) {
    for (int j = 0; j < emoscore::kEmotionCount; ++j) {
      const double d = pred[u][j] - truth[u][j];
      total += d * d;
      ++count;
    }
  }
  return std::sqrt(total / static_cast<double>(count));
}

// Dense least-squares via normal equations with a vanishing ridge term so a
// rank-deficient design still solves. Gaussian elimination with partial
// pivoting, all double precision. design: n x p, targets: n x q (row-major
// vectors of vectors). Returns p x q coefficients.
inline std::vector<std::vector<double>> solve_least_squares(
    const std::vector<std::vector<double>>& design, const std::vector<std::vector<double>>& targets,
    double ridge = 1e-9) {
  const std::size_t n = design.size();
  const std::size_t p = design[0].size();
  const std::size_t q = targets[0].size();
  std::vector<std::vector<double>> gram(p, std::vector<double>(p, 0.0));
  std::vector<std::vector<double>> rhs(p, std::vector<double>(q, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) gram[i][j] += design[s][i] * design[s][j];
      for (std::size_t k = 0; k < q; ++k) rhs[i][k] += design[s][i] * targets[s][k];
    }
  }
  double scale = 0.0;
  for (std::size_t i = 0; i < p; ++i) scale = std::max(scale, gram[i][i]);
  for (std::size_t i = 0; i < p; ++i) gram[i][i] += ridge * (scale > 0 ? scale : 1.0);

  for (std::size_t col = 0; col < p; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r) {
      if (std::fabs(gram[r][col]) > std::fabs(gram[pivot][col])) pivot = r;
    }
    std::swap(gram[col], gram[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    const double diag = gram[col][col];
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col || gram[r][col] == 0.0) continue;
      const double f = gram[r][col] / diag;
      for (std::size_t c = col; c < p; ++c) gram[r][c] -= f * gram[col][c];
      for (std::size_t k = 0; k < q; ++k) rhs[r][k] -= f * rhs[col][k];
    }
  }
  std::vector<std::vector<double>> beta(p, std::vector<double>(q, 0.0));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < q; ++k) beta[i][k] = rhs[i][k] / gram[i][i];
  }
  return beta;
}

inline double mean_squared_error(const std::vector<std::vector<double>>& design,
                                 const std::vector<std::vector<double>>& targets,
                                 const std::vector<std::vector<double>>& beta) {
  const std::size_t n = design.size();
  const std::size_t p = design[0].size();
  const std::size_t q = targets[0].size();
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < q; ++k) {
      double pred = 0.0;
      for (std::size_t i = 0; i < p; ++i) pred += design[s][i] * beta[i][k];
      const double d = pred - targets[s][k];
      total += d * d;
    }
  }
  return total / static_cast<double>(n * q);
}

}  // namespace testutil
