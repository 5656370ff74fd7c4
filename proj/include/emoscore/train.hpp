#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "emoscore/augment.hpp"
#include "emoscore/dataio.hpp"
#include "emoscore/error.hpp"
#include "emoscore/eval.hpp"
#include "emoscore/model.hpp"
#include "emoscore/parallel.hpp"
#include "emoscore/rng.hpp"
#include "emoscore/scores.hpp"

namespace emoscore {

// Frozen-backbone fine-tuning. The backbone (everything up to FC2) never
// changes, so gradients exist only for FC3 and are computed analytically.
// Each epoch: seeded shuffle, per-utterance augmentation, minibatch Adam on
// the head, then validation RMSE feeding both checkpoint selection and the
// plateau scheduler.

struct TrainConfig {
  int batch_size = 4;
  double lr0 = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double scheduler_factor = 0.5;
  int scheduler_patience = 5;
  double min_lr = 1e-6;
  double improvement_threshold = 1e-6;
  int max_epochs = 30;
  std::uint64_t seed = 0;
  bool augment_enabled = true;
  AugmentConfig augment;

  void validate() const {
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (!(lr0 > 0.0)) throw ValidationError("train config: lr0 must be positive");
    if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0)) {
      throw ValidationError("train config: scheduler factor must lie in (0,1)");
    }
    if (scheduler_patience < 1) throw ValidationError("train config: patience must be >= 1");
    if (!(weight_decay >= 0.0)) throw ValidationError("train config: weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      throw ValidationError("train config: betas must lie in [0,1)");
    }
    if (!(min_lr > 0.0 && min_lr <= lr0)) {
      throw ValidationError("train config: min_lr must lie in (0, lr0]");
    }
    if (max_epochs < 0) throw ValidationError("train config: max_epochs must be >= 0");
    augment.validate();
  }
};

struct OptimizerState {
  std::vector<double> m_w, v_w;  // first/second moments for fc3_w
  std::vector<double> m_b, v_b;  // and fc3_b
  long long step = 0;
  double lr = 0.0;
  double best_val_rmse = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;

  static OptimizerState create(const ModelConfig& cfg, const TrainConfig& tcfg) {
    OptimizerState s;
    s.m_w.assign(static_cast<std::size_t>(ModelConfig::output_dim) * cfg.hidden2, 0.0);
    s.v_w = s.m_w;
    s.m_b.assign(ModelConfig::output_dim, 0.0);
    s.v_b = s.m_b;
    s.lr = tcfg.lr0;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Loss and gradient

inline double mse_loss(const EmotionScores& target, const EmotionScores& prediction) {
  double acc = 0.0;
  for (int j = 0; j < kEmotionCount; ++j) {
    const double d = target[j] - prediction[j];
    acc += d * d;
  }
  return acc / kEmotionCount;
}

struct HeadSample {
  std::vector<float> penultimate;
  EmotionScores target{};
  EmotionScores prediction{};
};

inline double mse_loss_batch(std::span<const HeadSample> batch) {
  if (batch.empty()) throw ValidationError("mse: empty batch");
  double acc = 0.0;
  for (const HeadSample& s : batch) acc += mse_loss(s.target, s.prediction);
  return acc / static_cast<double>(batch.size());
}

struct HeadGradient {
  int input_dim = 0;                        // hidden2
  std::vector<double> dw;                   // output_dim x input_dim, row-major
  std::array<double, kEmotionCount> db{};
};

// Exact gradient of the batch-mean MSE with respect to FC3 only:
//   db_j = mean_s (2/8)(pred_j - target_j)
//   dW_jk = mean_s (2/8)(pred_j - target_j) z_k
// Predictions must come from the current FC3 applied to z with clamping off.
inline HeadGradient head_gradient(std::span<const HeadSample> batch) {
  if (batch.empty()) throw ValidationError("head gradient: empty batch");
  HeadGradient g;
  g.input_dim = static_cast<int>(batch.front().penultimate.size());
  g.dw.assign(static_cast<std::size_t>(kEmotionCount) * g.input_dim, 0.0);
  const double scale = 2.0 / (kEmotionCount * static_cast<double>(batch.size()));
  for (const HeadSample& s : batch) {
    if (static_cast<int>(s.penultimate.size()) != g.input_dim) {
      throw ValidationError("head gradient: inconsistent penultimate sizes in batch");
    }
    for (int j = 0; j < kEmotionCount; ++j) {
      const double r = scale * (s.prediction[j] - s.target[j]);
      g.db[j] += r;
      for (int k = 0; k < g.input_dim; ++k) {
        g.dw[static_cast<std::size_t>(j) * g.input_dim + k] += r * s.penultimate[k];
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Optimizer

namespace detail {

inline void adam_update_tensor(Matrix& param, std::span<const double> grad, std::vector<double>& m,
                               std::vector<double>& v, long long step, const TrainConfig& cfg,
                               double lr, const char* name) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    const double g = grad[i] + cfg.weight_decay * param.data[i];  // coupled L2
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    const double updated = param.data[i] - lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    if (!std::isfinite(updated)) {
      throw ValidationError(std::string("adam: non-finite update in ") + name);
    }
    param.data[i] = static_cast<float>(updated);
  }
}

}  // namespace detail

inline void adam_step(Matrix& fc3_w, Matrix& fc3_b, const HeadGradient& grad,
                      OptimizerState& state, const TrainConfig& cfg) {
  if (static_cast<int>(fc3_w.cols) != grad.input_dim || fc3_w.rows != kEmotionCount) {
    throw ValidationError("adam: gradient shape does not match fc3");
  }
  state.step += 1;
  detail::adam_update_tensor(fc3_w, grad.dw, state.m_w, state.v_w, state.step, cfg, state.lr,
                             "classifier.fc3.w");
  detail::adam_update_tensor(fc3_b, grad.db, state.m_b, state.v_b, state.step, cfg, state.lr,
                             "classifier.fc3.b");
}

// ReduceLROnPlateau: no improvement beyond the threshold for more than
// `patience` consecutive epochs multiplies the rate by `factor`, floored at
// min_lr.
inline void plateau_step(OptimizerState& state, double val_rmse, const TrainConfig& cfg) {
  if (val_rmse < state.best_val_rmse - cfg.improvement_threshold) {
    state.best_val_rmse = val_rmse;
    state.epochs_since_improvement = 0;
    return;
  }
  state.epochs_since_improvement += 1;
  if (state.epochs_since_improvement > cfg.scheduler_patience) {
    state.lr = std::max(state.lr * cfg.scheduler_factor, cfg.min_lr);
    state.epochs_since_improvement = 0;
  }
}

// ---------------------------------------------------------------------------
// Epoch loop

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_rmse = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelParams params;  // best-validation-RMSE head, frozen backbone untouched
  std::vector<EpochStats> history;
  double best_val_rmse = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
};

inline std::string format_history(const std::vector<EpochStats>& history) {
  std::string out;
  for (const EpochStats& e : history) {
    out += std::to_string(e.epoch);
    out += '\t';
    out += detail::format_double(e.train_loss);
    out += '\t';
    out += detail::format_double(e.val_rmse);
    out += '\t';
    out += detail::format_double(e.lr);
    out += '\n';
  }
  return out;
}

inline void write_history(const std::vector<EpochStats>& history,
                          const std::filesystem::path& path) {
  detail::write_file_bytes(path, format_history(history));
}

inline TrainResult train(const LoadedDataset& data, const NoiseBank* bank,
                         const ModelConfig& mcfg, const ModelParams& initial,
                         const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  if (mcfg.clamp_output) {
    throw ValidationError("train: clamp_output must be off during training");
  }

  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < data.manifest.records.size(); ++i) {
    const UtteranceRecord& rec = data.manifest.records[i];
    if (rec.split == Split::kTest) continue;
    if (!rec.labels) {
      throw ValidationError("train: record '" + rec.id + "' has no labels");
    }
    (rec.split == Split::kTrain ? train_idx : val_idx).push_back(i);
  }
  if (train_idx.empty()) throw ValidationError("train: train split is empty");
  if (val_idx.empty()) throw ValidationError("train: val split is empty");

  const bool augment_on = tcfg.augment_enabled && tcfg.augment.probability > 0.0;
  if (augment_on) {
    if (bank == nullptr) throw ValidationError("train: noise probability > 0 but no noise bank");
    bank->validate();
  }

  TrainResult result;
  result.params = initial;
  Matrix& fc3_w = result.params.classifier.fc3_w;
  Matrix& fc3_b = result.params.classifier.fc3_b;

  // The backbone is frozen, so clean-feature penultimates never change:
  // compute them once. Only augmented training features need re-running.
  std::vector<std::vector<float>> clean_z(data.manifest.records.size());
  {
    std::vector<std::size_t> wanted = val_idx;
    if (!augment_on) wanted.insert(wanted.end(), train_idx.begin(), train_idx.end());
    parallel_for(wanted.size(), [&](std::size_t w) {
      const std::size_t idx = wanted[w];
      const BackboneResult r = backbone_forward(data.features[idx], result.params, mcfg);
      clean_z[idx].assign(r.penultimate.data.begin(), r.penultimate.data.end());
    });
  }

  OptimizerState state = OptimizerState::create(mcfg, tcfg);
  Matrix best_w = fc3_w;
  Matrix best_b = fc3_b;

  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    Rng shuffle_rng(derive_seed(tcfg.seed, tag_hash("shuffle"), static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    detail::CompensatedSum loss_sum;
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(tcfg.batch_size));
      std::vector<HeadSample> batch(batch_end - batch_start);
      parallel_for(batch.size(), [&](std::size_t b) {
        const std::size_t idx = order[batch_start + b];
        HeadSample& sample = batch[b];
        if (augment_on) {
          const Matrix x = augment_utterance(data.features[idx], *bank, tcfg.augment,
                                             static_cast<std::uint64_t>(epoch), idx);
          const BackboneResult r = backbone_forward(x, result.params, mcfg);
          sample.penultimate.assign(r.penultimate.data.begin(), r.penultimate.data.end());
        } else {
          sample.penultimate = clean_z[idx];
        }
        sample.target = *data.manifest.records[idx].labels;
        sample.prediction = apply_head(sample.penultimate, fc3_w, fc3_b, false);
      });
      for (const HeadSample& s : batch) {
        const double loss = mse_loss(s.target, s.prediction);
        if (!std::isfinite(loss)) {
          throw ValidationError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                ", batch starting at sample " + std::to_string(batch_start));
        }
        loss_sum.add(loss);
      }
      const HeadGradient grad = head_gradient(batch);
      adam_step(fc3_w, fc3_b, grad, state, tcfg);
    }
    const double train_loss = loss_sum.value() / static_cast<double>(train_idx.size());

    ScoreTable pred, truth;
    std::vector<EmotionScores> val_scores(val_idx.size());
    parallel_for(val_idx.size(), [&](std::size_t v) {
      val_scores[v] = apply_head(clean_z[val_idx[v]], fc3_w, fc3_b, false);
    });
    for (std::size_t v = 0; v < val_idx.size(); ++v) {
      const UtteranceRecord& rec = data.manifest.records[val_idx[v]];
      pred.scores.emplace(rec.id, val_scores[v]);
      truth.scores.emplace(rec.id, *rec.labels);
    }
    const double val_rmse = rmse(pred, truth).overall_rmse;

    if (val_rmse < result.best_val_rmse) {
      result.best_val_rmse = val_rmse;
      result.best_epoch = epoch;
      best_w = fc3_w;
      best_b = fc3_b;
    }
    plateau_step(state, val_rmse, tcfg);
    result.history.push_back({epoch, train_loss, val_rmse, state.lr});
  }

  fc3_w = best_w;
  fc3_b = best_b;
  return result;
}

}  // namespace emoscore
