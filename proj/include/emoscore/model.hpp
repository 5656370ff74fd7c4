#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "emoscore/dataio.hpp"
#include "emoscore/error.hpp"
#include "emoscore/matrix.hpp"
#include "emoscore/rng.hpp"
#include "emoscore/scores.hpp"

namespace emoscore {

// Windowed-transformer regressor over frame-level features:
//
//   input projection -> transformer encoder block -> frame importance
//   -> N x [ window partition -> local window attention
//            -> global fusion across window embeddings ]
//   -> temporal mean pooling -> FC1-ReLU-FC2-ReLU-FC3 -> 8 scores
//
// Frames are grouped into variable-size windows by thresholding the
// importance each frame receives in attention; local attention runs within
// windows, global attention runs across per-window pooled embeddings.
// Only the final classifier layer (FC3) is trainable; everything else is
// frozen after initialization.

enum class ThresholdMode : std::uint32_t { kMeanImportance = 0, kFixed = 1 };

struct ModelConfig {
  int input_dim = 16;
  int model_dim = 32;
  int head_count = 4;
  int block_count = 2;
  ThresholdMode threshold_mode = ThresholdMode::kMeanImportance;
  double fixed_threshold = 0.5;
  int max_window = 8;
  int hidden1 = 64;
  int hidden2 = 32;
  bool clamp_output = false;
  std::uint64_t seed = 0;

  static constexpr int output_dim = kEmotionCount;

  void validate() const {
    if (input_dim < 1 || model_dim < 1 || head_count < 1 || block_count < 1 || max_window < 1 ||
        hidden1 < 1 || hidden2 < 1) {
      throw ValidationError("model config: all dimensions must be >= 1");
    }
    if (model_dim % head_count != 0) {
      throw ValidationError("model config: model_dim " + std::to_string(model_dim) +
                            " not divisible by head_count " + std::to_string(head_count));
    }
    if (!std::isfinite(fixed_threshold)) {
      throw ValidationError("model config: fixed_threshold must be finite");
    }
  }
};

struct AttentionParams {
  Matrix wq, wk, wv, wo;  // model_dim x model_dim
  Matrix bq, bk, bv, bo;  // 1 x model_dim
};

struct LayerNormParams {
  Matrix gain, bias;  // 1 x dim
};

struct EncoderParams {
  AttentionParams attn;
  LayerNormParams ln1, ln2;
  Matrix ff1_w, ff1_b;  // expansion factor 4
  Matrix ff2_w, ff2_b;
};

struct WindowBlockParams {
  AttentionParams local_attn;
  LayerNormParams local_ln;
  AttentionParams global_attn;
  LayerNormParams global_ln;
};

struct ClassifierParams {
  Matrix fc1_w, fc1_b;
  Matrix fc2_w, fc2_b;
  Matrix fc3_w, fc3_b;  // the only trainable tensors
};

struct ModelParams {
  Matrix input_w, input_b;
  EncoderParams encoder;
  std::vector<WindowBlockParams> blocks;
  ClassifierParams classifier;
};

// ---------------------------------------------------------------------------
// Parameter bookkeeping

struct TensorRef {
  std::string name;
  Matrix* tensor;
  bool frozen;
  int init_fan_in;  // 0 = layer-norm style constant init
};

namespace detail {

inline void attention_refs(const std::string& prefix, AttentionParams& p, int model_dim,
                           std::vector<TensorRef>& out) {
  out.push_back({prefix + ".wq", &p.wq, true, model_dim});
  out.push_back({prefix + ".bq", &p.bq, true, model_dim});
  out.push_back({prefix + ".wk", &p.wk, true, model_dim});
  out.push_back({prefix + ".bk", &p.bk, true, model_dim});
  out.push_back({prefix + ".wv", &p.wv, true, model_dim});
  out.push_back({prefix + ".bv", &p.bv, true, model_dim});
  out.push_back({prefix + ".wo", &p.wo, true, model_dim});
  out.push_back({prefix + ".bo", &p.bo, true, model_dim});
}

inline void layer_norm_refs(const std::string& prefix, LayerNormParams& p,
                            std::vector<TensorRef>& out) {
  out.push_back({prefix + ".gain", &p.gain, true, 0});
  out.push_back({prefix + ".bias", &p.bias, true, 0});
}

}  // namespace detail

// Enumeration order is fixed; initialization and checkpoint layout both
// follow it.
inline std::vector<TensorRef> tensor_refs(ModelParams& params, const ModelConfig& cfg) {
  const int dm = cfg.model_dim;
  const int ff = 4 * dm;
  std::vector<TensorRef> out;
  out.push_back({"input.w", &params.input_w, true, cfg.input_dim});
  out.push_back({"input.b", &params.input_b, true, cfg.input_dim});
  detail::attention_refs("encoder.attn", params.encoder.attn, dm, out);
  detail::layer_norm_refs("encoder.ln1", params.encoder.ln1, out);
  detail::layer_norm_refs("encoder.ln2", params.encoder.ln2, out);
  out.push_back({"encoder.ff1.w", &params.encoder.ff1_w, true, dm});
  out.push_back({"encoder.ff1.b", &params.encoder.ff1_b, true, dm});
  out.push_back({"encoder.ff2.w", &params.encoder.ff2_w, true, ff});
  out.push_back({"encoder.ff2.b", &params.encoder.ff2_b, true, ff});
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i);
    detail::attention_refs(prefix + ".local.attn", params.blocks[i].local_attn, dm, out);
    detail::layer_norm_refs(prefix + ".local.ln", params.blocks[i].local_ln, out);
    detail::attention_refs(prefix + ".global.attn", params.blocks[i].global_attn, dm, out);
    detail::layer_norm_refs(prefix + ".global.ln", params.blocks[i].global_ln, out);
  }
  out.push_back({"classifier.fc1.w", &params.classifier.fc1_w, true, dm});
  out.push_back({"classifier.fc1.b", &params.classifier.fc1_b, true, dm});
  out.push_back({"classifier.fc2.w", &params.classifier.fc2_w, true, cfg.hidden1});
  out.push_back({"classifier.fc2.b", &params.classifier.fc2_b, true, cfg.hidden1});
  out.push_back({"classifier.fc3.w", &params.classifier.fc3_w, false, cfg.hidden2});
  out.push_back({"classifier.fc3.b", &params.classifier.fc3_b, false, cfg.hidden2});
  return out;
}

namespace detail {

inline AttentionParams make_attention(int dm) {
  AttentionParams p;
  p.wq = Matrix(dm, dm);
  p.wk = Matrix(dm, dm);
  p.wv = Matrix(dm, dm);
  p.wo = Matrix(dm, dm);
  p.bq = Matrix(1, dm);
  p.bk = Matrix(1, dm);
  p.bv = Matrix(1, dm);
  p.bo = Matrix(1, dm);
  return p;
}

inline LayerNormParams make_layer_norm(int dim) {
  LayerNormParams p;
  p.gain = Matrix(1, dim);
  p.bias = Matrix(1, dim);
  return p;
}

}  // namespace detail

inline ModelParams make_params(const ModelConfig& cfg) {
  cfg.validate();
  const int dm = cfg.model_dim;
  const int ff = 4 * dm;
  ModelParams p;
  p.input_w = Matrix(dm, cfg.input_dim);
  p.input_b = Matrix(1, dm);
  p.encoder.attn = detail::make_attention(dm);
  p.encoder.ln1 = detail::make_layer_norm(dm);
  p.encoder.ln2 = detail::make_layer_norm(dm);
  p.encoder.ff1_w = Matrix(ff, dm);
  p.encoder.ff1_b = Matrix(1, ff);
  p.encoder.ff2_w = Matrix(dm, ff);
  p.encoder.ff2_b = Matrix(1, dm);
  p.blocks.resize(cfg.block_count);
  for (auto& block : p.blocks) {
    block.local_attn = detail::make_attention(dm);
    block.local_ln = detail::make_layer_norm(dm);
    block.global_attn = detail::make_attention(dm);
    block.global_ln = detail::make_layer_norm(dm);
  }
  p.classifier.fc1_w = Matrix(cfg.hidden1, dm);
  p.classifier.fc1_b = Matrix(1, cfg.hidden1);
  p.classifier.fc2_w = Matrix(cfg.hidden2, cfg.hidden1);
  p.classifier.fc2_b = Matrix(1, cfg.hidden2);
  p.classifier.fc3_w = Matrix(ModelConfig::output_dim, cfg.hidden2);
  p.classifier.fc3_b = Matrix(1, ModelConfig::output_dim);
  return p;
}

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); layer norms start at gain 1,
// bias 0. One stream, fixed enumeration order.
inline ModelParams init_params(const ModelConfig& cfg) {
  ModelParams params = make_params(cfg);
  Rng rng(derive_seed(cfg.seed, tag_hash("init")));
  for (const TensorRef& ref : tensor_refs(params, cfg)) {
    if (ref.init_fan_in == 0) {
      const bool is_gain = ref.name.ends_with(".gain");
      for (float& v : ref.tensor->data) v = is_gain ? 1.0f : 0.0f;
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(ref.init_fan_in));
    for (float& v : ref.tensor->data) v = static_cast<float>(rng.uniform(-bound, bound));
  }
  return params;
}

// ---------------------------------------------------------------------------
// Core ops

// Row-wise softmax with max subtraction; rows sum to 1 within 1e-6 even for
// logits around +-1000.
inline Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    float row_max = m(i, 0);
    for (int j = 1; j < m.cols; ++j) row_max = std::max(row_max, m(i, j));
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      const double e = std::exp(static_cast<double>(m(i, j)) - row_max);
      out(i, j) = static_cast<float>(e);
      sum += e;
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (int j = 0; j < m.cols; ++j) out(i, j) *= inv;
  }
  return out;
}

struct AttentionResult {
  Matrix output;
  Matrix weights;  // row-stochastic
};

// Scaled dot-product attention on already-projected inputs.
inline AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v) {
  if (q.cols != k.cols || k.rows != v.rows) {
    throw ValidationError("attention: shapes do not conform (Q " + std::to_string(q.rows) + "x" +
                          std::to_string(q.cols) + ", K " + std::to_string(k.rows) + "x" +
                          std::to_string(k.cols) + ", V " + std::to_string(v.rows) + "x" +
                          std::to_string(v.cols) + ")");
  }
  Matrix logits = matmul_nt(q, k);
  const float scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(q.cols)));
  for (float& x : logits.data) x *= scale;
  Matrix weights = softmax_rows(logits);
  Matrix output = matmul(weights, v);
  return {std::move(output), std::move(weights)};
}

namespace detail {

inline Matrix head_slice(const Matrix& m, int head, int head_dim) {
  Matrix out(m.rows, head_dim);
  const int offset = head * head_dim;
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < head_dim; ++j) out(i, j) = m(i, offset + j);
  }
  return out;
}

}  // namespace detail

// Multi-head attention: per-head scaled dot-product on projected slices,
// concatenated then output-projected. The returned weight matrix is the
// head average.
inline AttentionResult multi_head_attention(const Matrix& x, const AttentionParams& p,
                                            int head_count) {
  const int dm = x.cols;
  if (dm % head_count != 0) {
    throw ValidationError("attention: dim " + std::to_string(dm) + " not divisible by " +
                          std::to_string(head_count) + " heads");
  }
  const int head_dim = dm / head_count;
  const Matrix q = linear(x, p.wq, p.bq);
  const Matrix k = linear(x, p.wk, p.bk);
  const Matrix v = linear(x, p.wv, p.bv);
  Matrix concat(x.rows, dm);
  Matrix avg_weights(x.rows, x.rows, 0.0f);
  for (int h = 0; h < head_count; ++h) {
    const AttentionResult head = attention(detail::head_slice(q, h, head_dim),
                                           detail::head_slice(k, h, head_dim),
                                           detail::head_slice(v, h, head_dim));
    const int offset = h * head_dim;
    for (int i = 0; i < x.rows; ++i) {
      for (int j = 0; j < head_dim; ++j) concat(i, offset + j) = head.output(i, j);
    }
    add_inplace(avg_weights, head.weights);
  }
  const float inv = 1.0f / static_cast<float>(head_count);
  for (float& w : avg_weights.data) w *= inv;
  return {linear(concat, p.wo, p.bo), std::move(avg_weights)};
}

inline Matrix layer_norm_rows(const Matrix& m, const LayerNormParams& p) {
  require_shape(p.gain, 1, m.cols, "layer norm gain");
  require_shape(p.bias, 1, m.cols, "layer norm bias");
  constexpr double kEps = 1e-5;
  Matrix out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < m.cols; ++j) mean += m(i, j);
    mean /= m.cols;
    double var = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      const double d = m(i, j) - mean;
      var += d * d;
    }
    var /= m.cols;
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (int j = 0; j < m.cols; ++j) {
      out(i, j) = static_cast<float>((m(i, j) - mean) * inv * p.gain(0, j) + p.bias(0, j));
    }
  }
  return out;
}

struct EncoderResult {
  Matrix hidden;
  Matrix attention;
};

// Pre-norm transformer block: H = X' + FFN(LN(X')), X' = X + Attn(LN(X)).
inline EncoderResult encoder_block(const Matrix& x, const EncoderParams& p, int head_count) {
  AttentionResult attn = multi_head_attention(layer_norm_rows(x, p.ln1), p.attn, head_count);
  Matrix x1 = x;
  add_inplace(x1, attn.output);
  Matrix ffn = linear(layer_norm_rows(x1, p.ln2), p.ff1_w, p.ff1_b);
  relu_inplace(ffn);
  ffn = linear(ffn, p.ff2_w, p.ff2_b);
  add_inplace(x1, ffn);
  return {std::move(x1), std::move(attn.weights)};
}

// Attention received per frame: column means of a row-stochastic weight
// matrix, min-max normalized into [0,1]. A flat profile maps to all 0.5.
inline std::vector<double> importance_scores(const Matrix& attn_weights) {
  if (attn_weights.rows != attn_weights.cols || attn_weights.rows < 1) {
    throw ValidationError("importance: attention matrix must be square and nonempty");
  }
  std::vector<double> imp = col_means(attn_weights);
  double lo = imp[0], hi = imp[0];
  for (double v : imp) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) {
    std::fill(imp.begin(), imp.end(), 0.5);
    return imp;
  }
  for (double& v : imp) v = (v - lo) / (hi - lo);
  return imp;
}

// ---------------------------------------------------------------------------
// Window machinery

struct WindowPartition {
  std::vector<std::pair<int, int>> ranges;  // half-open, sorted, disjoint, covering

  int count() const { return static_cast<int>(ranges.size()); }

  void validate(int frame_count, int max_window) const {
    int expected_start = 0;
    for (const auto& [start, end] : ranges) {
      if (start != expected_start || end <= start || end - start > max_window) {
        throw ValidationError("window partition invariant violated at [" + std::to_string(start) +
                              "," + std::to_string(end) + ")");
      }
      expected_start = end;
    }
    if (expected_start != frame_count) {
      throw ValidationError("window partition does not cover all " +
                            std::to_string(frame_count) + " frames");
    }
  }
};

inline double resolve_threshold(const std::vector<double>& importance, const ModelConfig& cfg) {
  if (cfg.threshold_mode == ThresholdMode::kFixed) return cfg.fixed_threshold;
  double sum = 0.0;
  for (double v : importance) sum += v;
  return sum / static_cast<double>(importance.size());
}

// Maximal runs of frames on the same side of the threshold, each run split
// left-to-right into chunks of at most max_window frames.
inline WindowPartition partition_windows(const std::vector<double>& importance, double threshold,
                                         int max_window) {
  if (importance.empty()) throw ValidationError("partition: importance vector is empty");
  if (max_window < 1) throw ValidationError("partition: max_window must be >= 1");
  const int frames = static_cast<int>(importance.size());
  WindowPartition partition;
  int t = 0;
  while (t < frames) {
    const bool salient = importance[t] >= threshold;
    int run_end = t + 1;
    while (run_end < frames && (importance[run_end] >= threshold) == salient) ++run_end;
    for (int s = t; s < run_end; s += max_window) {
      partition.ranges.emplace_back(s, std::min(s + max_window, run_end));
    }
    t = run_end;
  }
  return partition;
}

namespace detail {

inline Matrix take_rows(const Matrix& m, int begin, int end) {
  Matrix out(end - begin, m.cols);
  for (int i = begin; i < end; ++i) {
    for (int j = 0; j < m.cols; ++j) out(i - begin, j) = m(i, j);
  }
  return out;
}

}  // namespace detail

struct LocalWindowResult {
  Matrix hidden;
  Matrix attention;  // T x T, block-diagonal over the partition
};

// Attention restricted to each window: out = LN(h + Attn(h)) computed per
// window. Frames in different windows cannot interact here.
inline LocalWindowResult local_window_block(const Matrix& h, const WindowPartition& partition,
                                            const AttentionParams& attn,
                                            const LayerNormParams& ln, int head_count) {
  partition.validate(h.rows, h.rows);  // cap already enforced at construction
  Matrix hidden(h.rows, h.cols);
  Matrix weights(h.rows, h.rows, 0.0f);
  for (const auto& [start, end] : partition.ranges) {
    const Matrix sub = detail::take_rows(h, start, end);
    AttentionResult res = multi_head_attention(sub, attn, head_count);
    add_inplace(res.output, sub);
    const Matrix normed = layer_norm_rows(res.output, ln);
    for (int i = start; i < end; ++i) {
      for (int j = 0; j < h.cols; ++j) hidden(i, j) = normed(i - start, j);
      for (int j = start; j < end; ++j) weights(i, j) = res.weights(i - start, j - start);
    }
  }
  return {std::move(hidden), std::move(weights)};
}

// Global fusion: each window is pooled into an importance-weighted mean
// embedding, attention runs across the window embeddings, and each fused
// embedding is broadcast back to its frames as an additive residual
// followed by layer norm.
inline Matrix global_window_block(const Matrix& h, const WindowPartition& partition,
                                  const std::vector<double>& importance,
                                  const AttentionParams& attn, const LayerNormParams& ln,
                                  int head_count) {
  partition.validate(h.rows, h.rows);
  if (static_cast<int>(importance.size()) != h.rows) {
    throw ValidationError("global window block: importance length mismatch");
  }
  const int windows = partition.count();
  Matrix embeddings(windows, h.cols);
  for (int w = 0; w < windows; ++w) {
    const auto [start, end] = partition.ranges[w];
    double weight_sum = 0.0;
    for (int t = start; t < end; ++t) weight_sum += importance[t];
    for (int j = 0; j < h.cols; ++j) {
      double acc = 0.0;
      for (int t = start; t < end; ++t) {
        const double wt = weight_sum > 0.0 ? importance[t] / weight_sum : 1.0 / (end - start);
        acc += wt * h(t, j);
      }
      embeddings(w, j) = static_cast<float>(acc);
    }
  }
  const AttentionResult fused = multi_head_attention(embeddings, attn, head_count);
  Matrix out(h.rows, h.cols);
  for (int w = 0; w < windows; ++w) {
    const auto [start, end] = partition.ranges[w];
    for (int t = start; t < end; ++t) {
      for (int j = 0; j < h.cols; ++j) out(t, j) = h(t, j) + fused.output(w, j);
    }
  }
  return layer_norm_rows(out, ln);
}

// ---------------------------------------------------------------------------
// Full forward pass

struct BackboneResult {
  Matrix pooled;       // 1 x model_dim, temporal mean
  Matrix penultimate;  // 1 x hidden2, input to FC3
};

inline BackboneResult backbone_forward(const Matrix& x, const ModelParams& params,
                                       const ModelConfig& cfg) {
  cfg.validate();
  if (x.cols != cfg.input_dim) {
    throw ValidationError("forward: feature dim " + std::to_string(x.cols) +
                          " does not match configured input dim " + std::to_string(cfg.input_dim));
  }
  if (x.rows < 1) throw ValidationError("forward: empty feature matrix");

  Matrix h = linear(x, params.input_w, params.input_b);
  const EncoderResult enc = encoder_block(h, params.encoder, cfg.head_count);
  h = enc.hidden;
  std::vector<double> importance = importance_scores(enc.attention);
  for (const WindowBlockParams& block : params.blocks) {
    const WindowPartition partition =
        partition_windows(importance, resolve_threshold(importance, cfg), cfg.max_window);
    LocalWindowResult local =
        local_window_block(h, partition, block.local_attn, block.local_ln, cfg.head_count);
    h = global_window_block(local.hidden, partition, importance, block.global_attn,
                            block.global_ln, cfg.head_count);
    importance = importance_scores(local.attention);
  }

  Matrix pooled(1, h.cols);
  const std::vector<double> means = col_means(h);
  for (int j = 0; j < h.cols; ++j) pooled(0, j) = static_cast<float>(means[j]);

  Matrix a1 = linear(pooled, params.classifier.fc1_w, params.classifier.fc1_b);
  relu_inplace(a1);
  Matrix z = linear(a1, params.classifier.fc2_w, params.classifier.fc2_b);
  relu_inplace(z);
  return {std::move(pooled), std::move(z)};
}

// FC3 in double precision; shared by the forward pass and the training
// loop's cached-penultimate path so both produce bit-identical scores.
inline EmotionScores apply_head(std::span<const float> penultimate, const Matrix& fc3_w,
                                const Matrix& fc3_b, bool clamp) {
  require_shape(fc3_w, kEmotionCount, static_cast<int>(penultimate.size()), "fc3 weights");
  require_shape(fc3_b, 1, kEmotionCount, "fc3 bias");
  EmotionScores scores{};
  for (int j = 0; j < kEmotionCount; ++j) {
    double acc = fc3_b(0, j);
    for (std::size_t k = 0; k < penultimate.size(); ++k) {
      acc += static_cast<double>(fc3_w(j, static_cast<int>(k))) * penultimate[k];
    }
    scores[j] = acc;
  }
  return clamp ? clamp_scores(scores) : scores;
}

struct ForwardResult {
  EmotionScores scores;
  Matrix pooled;
  Matrix penultimate;
};

inline ForwardResult model_forward(const Matrix& x, const ModelParams& params,
                                   const ModelConfig& cfg) {
  BackboneResult backbone = backbone_forward(x, params, cfg);
  EmotionScores scores = apply_head(backbone.penultimate.row(0), params.classifier.fc3_w,
                                    params.classifier.fc3_b, cfg.clamp_output);
  return {scores, std::move(backbone.pooled), std::move(backbone.penultimate)};
}

// ---------------------------------------------------------------------------
// Checkpoint container: "EMCK", version, config block, then every tensor in
// enumeration order as (name, rows, cols, frozen flag, float32 payload).

inline constexpr char kCheckpointMagic[4] = {'E', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                            const ModelParams& params) {
  cfg.validate();
  std::string out;
  out.append(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.input_dim));
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.model_dim));
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.head_count));
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.block_count));
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.threshold_mode));
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.max_window));
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.hidden1));
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.hidden2));
  detail::put_u32(out, static_cast<std::uint32_t>(ModelConfig::output_dim));
  detail::put_u32(out, cfg.clamp_output ? 1 : 0);
  const std::uint64_t threshold_bits = std::bit_cast<std::uint64_t>(cfg.fixed_threshold);
  detail::put_u32(out, static_cast<std::uint32_t>(threshold_bits & 0xffffffffULL));
  detail::put_u32(out, static_cast<std::uint32_t>(threshold_bits >> 32));
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.seed & 0xffffffffULL));
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.seed >> 32));

  auto& mutable_params = const_cast<ModelParams&>(params);
  const std::vector<TensorRef> refs = tensor_refs(mutable_params, cfg);
  detail::put_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const TensorRef& ref : refs) {
    detail::put_u32(out, static_cast<std::uint32_t>(ref.name.size()));
    out += ref.name;
    detail::put_u32(out, static_cast<std::uint32_t>(ref.tensor->rows));
    detail::put_u32(out, static_cast<std::uint32_t>(ref.tensor->cols));
    out.push_back(ref.frozen ? 1 : 0);
    for (float v : ref.tensor->data) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  detail::write_file_bytes(path, out);
}

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw LengthError(path.string() + ": truncated checkpoint");
  };
  auto get_u32 = [&]() {
    need(4);
    const std::uint32_t v =
        detail::get_u32(reinterpret_cast<const unsigned char*>(bytes.data()) + pos);
    pos += 4;
    return v;
  };

  need(4);
  if (std::string_view(bytes.data(), 4) != std::string_view(kCheckpointMagic, 4)) {
    throw FormatError(path.string() + ": bad magic, not a checkpoint");
  }
  pos += 4;
  const std::uint32_t version = get_u32();
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  ModelConfig cfg;
  cfg.input_dim = static_cast<int>(get_u32());
  cfg.model_dim = static_cast<int>(get_u32());
  cfg.head_count = static_cast<int>(get_u32());
  cfg.block_count = static_cast<int>(get_u32());
  cfg.threshold_mode = static_cast<ThresholdMode>(get_u32());
  cfg.max_window = static_cast<int>(get_u32());
  cfg.hidden1 = static_cast<int>(get_u32());
  cfg.hidden2 = static_cast<int>(get_u32());
  const std::uint32_t output_dim = get_u32();
  if (output_dim != ModelConfig::output_dim) {
    throw ValidationError(path.string() + ": checkpoint output dim " + std::to_string(output_dim) +
                          " unsupported");
  }
  cfg.clamp_output = get_u32() != 0;
  const std::uint64_t threshold_lo = get_u32();
  const std::uint64_t threshold_hi = get_u32();
  cfg.fixed_threshold = std::bit_cast<double>(threshold_lo | (threshold_hi << 32));
  const std::uint64_t seed_lo = get_u32();
  const std::uint64_t seed_hi = get_u32();
  cfg.seed = seed_lo | (seed_hi << 32);
  cfg.validate();

  Checkpoint ckpt{cfg, make_params(cfg)};
  const std::vector<TensorRef> refs = tensor_refs(ckpt.params, cfg);
  const std::uint32_t tensor_count = get_u32();
  if (tensor_count != refs.size()) {
    throw ValidationError(path.string() + ": checkpoint holds " + std::to_string(tensor_count) +
                          " tensors, model needs " + std::to_string(refs.size()));
  }
  for (const TensorRef& ref : refs) {
    const std::uint32_t name_len = get_u32();
    need(name_len);
    const std::string name = bytes.substr(pos, name_len);
    pos += name_len;
    if (name != ref.name) {
      throw ValidationError(path.string() + ": expected tensor '" + ref.name + "', found '" +
                            name + "'");
    }
    const std::uint32_t rows = get_u32();
    const std::uint32_t cols = get_u32();
    if (rows != static_cast<std::uint32_t>(ref.tensor->rows) ||
        cols != static_cast<std::uint32_t>(ref.tensor->cols)) {
      throw ValidationError(path.string() + ": tensor '" + name + "' has shape " +
                            std::to_string(rows) + "x" + std::to_string(cols) +
                            ", config implies " + std::to_string(ref.tensor->rows) + "x" +
                            std::to_string(ref.tensor->cols));
    }
    need(1);
    const bool frozen = bytes[pos++] != 0;
    if (frozen != ref.frozen) {
      throw ValidationError(path.string() + ": tensor '" + name + "' frozen flag mismatch");
    }
    for (float& v : ref.tensor->data) {
      need(4);
      v = std::bit_cast<float>(
          detail::get_u32(reinterpret_cast<const unsigned char*>(bytes.data()) + pos));
      pos += 4;
    }
  }
  if (pos != bytes.size()) {
    throw LengthError(path.string() + ": trailing bytes after checkpoint payload");
  }
  return ckpt;
}

}  // namespace emoscore
