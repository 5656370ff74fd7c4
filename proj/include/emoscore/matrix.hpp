#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emoscore/error.hpp"

namespace emoscore {

// Dense row-major single-precision matrix. Rows are frames, columns are
// feature dimensions; bias and layer-norm parameters are stored as 1xN.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(int r, int c, float fill = 0.0f)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  float& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  float operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  std::span<float> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const float> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
  }
};

inline bool all_finite(const Matrix& m) {
  for (float v : m.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline void require_shape(const Matrix& m, int rows, int cols, const std::string& what) {
  if (m.rows != rows || m.cols != cols) {
    throw ValidationError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                          ", got " + std::to_string(m.rows) + "x" + std::to_string(m.cols));
  }
}

// C = A * B. Accumulates in double.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ValidationError("matmul: inner dimensions disagree (" + std::to_string(a.cols) + " vs " +
                          std::to_string(b.rows) + ")");
  }
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += static_cast<double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<float>(acc);
    }
  }
  return c;
}

// C = A * B^T. Covers both attention logits (Q K^T) and linear layers with
// weights stored out-by-in.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) {
    throw ValidationError("matmul_nt: inner dimensions disagree (" + std::to_string(a.cols) +
                          " vs " + std::to_string(b.cols) + ")");
  }
  Matrix c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += static_cast<double>(a(i, k)) * b(j, k);
      c(i, j) = static_cast<float>(acc);
    }
  }
  return c;
}

// Y = X * W^T + bias, with W stored out-by-in and bias 1-by-out.
inline Matrix linear(const Matrix& x, const Matrix& w, const Matrix& bias) {
  require_shape(bias, 1, w.rows, "linear bias");
  Matrix y = matmul_nt(x, w);
  for (int i = 0; i < y.rows; ++i) {
    for (int j = 0; j < y.cols; ++j) y(i, j) += bias(0, j);
  }
  return y;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ValidationError("add: shape mismatch");
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

inline void relu_inplace(Matrix& m) {
  for (float& v : m.data) v = v > 0.0f ? v : 0.0f;
}

// Per-column mean in double precision.
inline std::vector<double> col_means(const Matrix& m) {
  std::vector<double> out(m.cols, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) out[j] += m(i, j);
  }
  for (double& v : out) v /= m.rows;
  return out;
}

}  // namespace emoscore
