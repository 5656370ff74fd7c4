#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emoscore/augment.hpp"
#include "emoscore/config.hpp"
#include "emoscore/dataio.hpp"
#include "emoscore/error.hpp"
#include "emoscore/eval.hpp"
#include "emoscore/fusion.hpp"
#include "emoscore/model.hpp"
#include "emoscore/parallel.hpp"
#include "emoscore/synthdata.hpp"
#include "emoscore/train.hpp"

namespace emoscore {

// Batch pipeline commands. Every stage talks to the next through files only:
// synth -> train -> predict -> fuse -> evaluate. A lock file serializes
// processes per output directory, and partially written outputs are removed
// when a command fails.

struct CliOptions {
  std::optional<std::uint64_t> seed_override;
  bool dry_run = false;
};

// One process per output directory. fopen("wx") is atomic-exclusive; the
// lock disappears when the command finishes.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir)
      : path_(dir / ".emoscore.lock") {
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (f == nullptr) {
      throw IoError("output directory " + dir.string() +
                    " is locked by another emoscore process (stale lock? remove " +
                    path_.string() + ")");
    }
    std::fclose(f);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;
  ~DirLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

 private:
  std::filesystem::path path_;
};

// Rolls back tracked files and directories unless commit() ran.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;

  const std::filesystem::path& track(const std::filesystem::path& file) {
    files_.push_back(file);
    return files_.back();
  }
  void track_dir(const std::filesystem::path& dir) { dirs_.push_back(dir); }
  void commit() { committed_ = true; }

  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) std::filesystem::remove(f, ec);
    for (const auto& d : dirs_) std::filesystem::remove_all(d, ec);
  }

 private:
  std::vector<std::filesystem::path> files_;
  std::vector<std::filesystem::path> dirs_;
  bool committed_ = false;
};

namespace detail {

inline ModelConfig model_config_from(KvConfig& cfg) {
  ModelConfig m;
  m.input_dim = static_cast<int>(cfg.get_int("model.input_dim", m.input_dim));
  m.model_dim = static_cast<int>(cfg.get_int("model.model_dim", m.model_dim));
  m.head_count = static_cast<int>(cfg.get_int("model.heads", m.head_count));
  m.block_count = static_cast<int>(cfg.get_int("model.blocks", m.block_count));
  m.max_window = static_cast<int>(cfg.get_int("model.max_window", m.max_window));
  m.hidden1 = static_cast<int>(cfg.get_int("model.hidden1", m.hidden1));
  m.hidden2 = static_cast<int>(cfg.get_int("model.hidden2", m.hidden2));
  const std::string mode = cfg.get_string("model.threshold_mode", "mean");
  if (mode == "mean") {
    m.threshold_mode = ThresholdMode::kMeanImportance;
  } else if (mode == "fixed") {
    m.threshold_mode = ThresholdMode::kFixed;
  } else {
    throw ConfigError(cfg.source() + ": model.threshold_mode must be 'mean' or 'fixed'");
  }
  m.fixed_threshold = cfg.get_double("model.fixed_threshold", m.fixed_threshold);
  m.validate();
  return m;
}

inline TrainConfig train_config_from(KvConfig& cfg) {
  TrainConfig t;
  t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", t.batch_size));
  t.lr0 = cfg.get_double("train.lr0", t.lr0);
  t.weight_decay = cfg.get_double("train.weight_decay", t.weight_decay);
  t.beta1 = cfg.get_double("train.beta1", t.beta1);
  t.beta2 = cfg.get_double("train.beta2", t.beta2);
  t.epsilon = cfg.get_double("train.epsilon", t.epsilon);
  t.scheduler_factor = cfg.get_double("train.scheduler_factor", t.scheduler_factor);
  t.scheduler_patience = static_cast<int>(cfg.get_int("train.patience", t.scheduler_patience));
  t.min_lr = cfg.get_double("train.min_lr", t.min_lr);
  t.max_epochs = static_cast<int>(cfg.get_int("train.max_epochs", t.max_epochs));
  if (t.max_epochs < 1) {
    throw ConfigError(cfg.source() + ": train.max_epochs must be >= 1");
  }
  return t;
}

inline Split parse_split_key(const std::string& value, const std::string& source) {
  return parse_split(value, source + ": key 'split'");
}

inline DatasetManifest filter_split(const DatasetManifest& manifest,
                                    const std::optional<Split>& split) {
  if (!split) return manifest;
  DatasetManifest out;
  for (const auto& rec : manifest.records) {
    if (rec.split == *split) out.records.push_back(rec);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synth

inline void synth_command(const std::filesystem::path& config_path, const CliOptions& opts) {
  KvConfig cfg = KvConfig::parse_file(config_path);
  const std::filesystem::path out_dir = cfg.require_string("output_dir");
  SynthSpec spec;
  spec.n_train_pool = static_cast<int>(cfg.require_int("n_train"));
  spec.n_test = static_cast<int>(cfg.get_int("n_test", 0));
  spec.t_min = static_cast<int>(cfg.get_int("t_min", spec.t_min));
  spec.t_max = static_cast<int>(cfg.get_int("t_max", spec.t_max));
  spec.dim = static_cast<int>(cfg.get_int("dim", spec.dim));
  spec.label_noise_sd = cfg.get_double("label_noise_sd", spec.label_noise_sd);
  spec.noise_bank_entries = static_cast<int>(cfg.get_int("n_noise", spec.noise_bank_entries));
  spec.noise_len_min = static_cast<int>(cfg.get_int("noise_len_min", spec.noise_len_min));
  spec.noise_len_max = static_cast<int>(cfg.get_int("noise_len_max", spec.noise_len_max));
  spec.seed = cfg.get_u64("seed", 0);
  if (opts.seed_override) spec.seed = *opts.seed_override;
  const double b_scale = cfg.get_double("b_scale", 1.0);
  const double c_value = cfg.get_double("c_value", 3.0);
  cfg.finish();
  spec.signal_map = random_signal_map(spec.dim, b_scale, spec.seed);
  spec.offset = constant_offset(c_value);
  spec.validate();
  if (opts.dry_run) {
    std::cout << "synth: config ok, would write " << (spec.n_train_pool + spec.n_test)
              << " utterances to " << out_dir.string() << "\n";
    return;
  }
  std::filesystem::create_directories(out_dir);
  DirLock lock(out_dir);
  OutputGuard guard;
  guard.track_dir(out_dir / "features");
  guard.track_dir(out_dir / "noise");
  guard.track(out_dir / "manifest.tsv");
  guard.track(out_dir / "synth_spec.txt");
  guard.track(out_dir / "signal_map.emof");
  const SynthOutput result = generate(spec, out_dir);
  guard.commit();
  std::cout << "synth: wrote " << (spec.n_train_pool + spec.n_test) << " utterances, "
            << spec.noise_bank_entries << " noise tensors under " << out_dir.string() << "\n";
  (void)result;
}

// ---------------------------------------------------------------------------
// train

struct TrainRunSpec {
  std::string label;
  std::filesystem::path manifest;
  double noise_probability = 0.0;
};

inline void train_command(const std::filesystem::path& config_path, const CliOptions& opts) {
  KvConfig cfg = KvConfig::parse_file(config_path);
  const std::filesystem::path out_dir = cfg.require_string("output_dir");
  const double val_fraction = cfg.get_double("val_fraction", 0.2);
  std::uint64_t seed = cfg.get_u64("seed", 0);
  if (opts.seed_override) seed = *opts.seed_override;
  const std::string bank_dir = cfg.get_string("noise_bank_dir", "");
  const double default_probability = cfg.get_double("augment.probability", 0.0);
  const double gain = cfg.get_double("augment.gain", 1.0);
  const ModelConfig mcfg_base = detail::model_config_from(cfg);
  const TrainConfig tcfg_base = detail::train_config_from(cfg);

  std::vector<TrainRunSpec> runs;
  for (const std::string& line : cfg.get_all("run")) {
    const std::vector<std::string> tokens = KvConfig::split_whitespace(line);
    if (tokens.size() != 3) {
      throw ConfigError(cfg.source() + ": run line must be '<label> <manifest> <probability>', got '" +
                        line + "'");
    }
    TrainRunSpec run;
    run.label = tokens[0];
    run.manifest = tokens[1];
    run.noise_probability = detail::parse_double(tokens[2], cfg.source() + ": run probability");
    runs.push_back(std::move(run));
  }
  if (runs.empty()) {
    TrainRunSpec run;
    run.label = "run0";
    run.manifest = cfg.require_string("manifest");
    run.noise_probability = default_probability;
    runs.push_back(std::move(run));
  } else {
    cfg.get_string("manifest", "");  // may be present but unused when runs are explicit
  }
  cfg.finish();

  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!(runs[i].noise_probability >= 0.0 && runs[i].noise_probability <= 1.0)) {
      throw ConfigError("run '" + runs[i].label + "': noise probability must lie in [0,1]");
    }
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      if (runs[i].label == runs[j].label) {
        throw ConfigError("duplicate run label '" + runs[i].label + "'");
      }
    }
    if (!std::filesystem::exists(runs[i].manifest)) {
      throw IoError("run '" + runs[i].label + "': manifest " + runs[i].manifest.string() +
                    " does not exist");
    }
  }
  const bool needs_bank = std::any_of(runs.begin(), runs.end(),
                                      [](const TrainRunSpec& r) { return r.noise_probability > 0; });
  NoiseBank bank;
  if (needs_bank) {
    if (bank_dir.empty()) {
      throw ConfigError(cfg.source() +
                        ": noise_bank_dir is required when a run has noise probability > 0");
    }
    bank = load_noise_bank(bank_dir);  // fails before any training starts
  }
  if (opts.dry_run) {
    for (const TrainRunSpec& run : runs) load_manifest(run.manifest);
    std::cout << "train: config ok, " << runs.size() << " run(s) would write to "
              << out_dir.string() << "\n";
    return;
  }

  std::filesystem::create_directories(out_dir);
  DirLock lock(out_dir);
  OutputGuard guard;
  const std::uint64_t split_seed = derive_seed(seed, tag_hash("split"));
  std::string val_rmse_rows;
  for (const TrainRunSpec& run : runs) {
    const std::uint64_t run_seed = derive_seed(seed, tag_hash(run.label));
    DatasetManifest manifest = load_manifest(run.manifest);
    DatasetManifest trainval;
    for (const auto& rec : manifest.records) {
      if (rec.split != Split::kTest) trainval.records.push_back(rec);
    }
    if (trainval.count(Split::kVal) == 0) {
      trainval = split_dataset(trainval, val_fraction, split_seed);
    }
    const LoadedDataset data =
        load_features(trainval, run.manifest.parent_path(), mcfg_base.input_dim);

    ModelConfig mcfg = mcfg_base;
    mcfg.seed = run_seed;
    mcfg.clamp_output = false;
    TrainConfig tcfg = tcfg_base;
    tcfg.seed = run_seed;
    tcfg.augment_enabled = true;
    tcfg.augment.probability = run.noise_probability;
    tcfg.augment.gain = gain;
    tcfg.augment.seed = run_seed;

    const ModelParams initial = init_params(mcfg);
    const TrainResult result =
        train(data, run.noise_probability > 0 ? &bank : nullptr, mcfg, initial, tcfg);

    const std::filesystem::path run_dir = out_dir / run.label;
    std::filesystem::create_directories(run_dir);
    guard.track_dir(run_dir);
    save_checkpoint(run_dir / "checkpoint.emck", mcfg, result.params);
    write_history(result.history, run_dir / "history.tsv");
    val_rmse_rows += run.label + "\t" + detail::format_double(result.best_val_rmse) + "\n";
    std::cout << "train: run '" << run.label << "' best val RMSE " << result.best_val_rmse
              << " at epoch " << result.best_epoch << "\n";
  }
  guard.track(out_dir / "val_rmse.tsv");
  detail::write_file_bytes(out_dir / "val_rmse.tsv", val_rmse_rows);
  guard.commit();
}

// ---------------------------------------------------------------------------
// predict

inline void predict_command(const std::filesystem::path& config_path, const CliOptions& opts) {
  KvConfig cfg = KvConfig::parse_file(config_path);
  const std::filesystem::path checkpoint_path = cfg.require_string("checkpoint");
  const std::filesystem::path manifest_path = cfg.require_string("manifest");
  const std::filesystem::path output_path = cfg.require_string("output");
  std::optional<Split> split;
  if (cfg.has("split")) split = detail::parse_split_key(cfg.require_string("split"), cfg.source());
  const bool clamp = cfg.get_bool("clamp", true);
  std::string label = cfg.get_string("label", "");
  cfg.finish();
  if (label.empty()) {
    const auto parent_name = checkpoint_path.parent_path().filename().string();
    label = parent_name.empty() ? "run" : parent_name;
  }

  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const DatasetManifest manifest =
      detail::filter_split(load_manifest(manifest_path), split);
  if (opts.dry_run) {
    std::cout << "predict: config ok, " << manifest.records.size() << " utterances\n";
    return;
  }
  const LoadedDataset data =
      load_features(manifest, manifest_path.parent_path(), ckpt.config.input_dim);

  ModelConfig forward_cfg = ckpt.config;
  forward_cfg.clamp_output = clamp;
  std::vector<EmotionScores> scores(data.features.size());
  parallel_for(data.features.size(), [&](std::size_t i) {
    scores[i] = model_forward(data.features[i], ckpt.params, forward_cfg).scores;
  });
  ScoreTable table;
  table.label = label;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    table.scores.emplace(data.manifest.records[i].id, scores[i]);
  }

  const std::filesystem::path out_parent =
      output_path.parent_path().empty() ? "." : output_path.parent_path();
  std::filesystem::create_directories(out_parent);
  DirLock lock(out_parent);
  OutputGuard guard;
  guard.track(output_path);
  write_score_table(table, output_path);
  guard.commit();
  std::cout << "predict: wrote " << table.scores.size() << " rows to " << output_path.string()
            << "\n";
}

// ---------------------------------------------------------------------------
// fuse

inline void fuse_command(const std::filesystem::path& config_path, const CliOptions& opts) {
  KvConfig cfg = KvConfig::parse_file(config_path);
  const std::string method = cfg.require_string("method");
  const std::vector<std::string> score_files = cfg.get_all("scores");
  const std::filesystem::path output_path = cfg.require_string("output");
  const std::string val_rmse_file = cfg.get_string("val_rmse_file", "");
  cfg.finish();
  if (method != "average" && method != "weighted" && method != "max") {
    throw ConfigError(cfg.source() + ": method must be average, weighted, or max");
  }
  if (score_files.empty()) {
    throw ConfigError(cfg.source() + ": at least one 'scores = <path>' line is required");
  }

  std::vector<ScoreTable> tables;
  for (const std::string& file : score_files) tables.push_back(read_score_table(file));

  ScoreTable fused;
  std::vector<std::string> comments;
  comments.push_back("method: " + method);
  {
    std::string inputs = "inputs:";
    for (const ScoreTable& t : tables) {
      inputs += " " + (t.label.empty() ? std::string("(unnamed)") : t.label);
    }
    comments.push_back(inputs);
  }
  if (method == "average") {
    fused = fuse_average(tables);
  } else if (method == "max") {
    fused = fuse_max(tables);
  } else {
    if (val_rmse_file.empty()) {
      throw ConfigError(cfg.source() + ": weighted fusion requires val_rmse_file");
    }
    std::map<std::string, double> rmse_by_label;
    const auto lines = detail::read_lines(val_rmse_file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (detail::is_comment_or_blank(lines[i])) continue;
      const auto fields = detail::split_tabs(lines[i]);
      if (fields.size() != 2) {
        throw FormatError(val_rmse_file + ":" + std::to_string(i + 1) +
                          ": expected 'label<TAB>rmse'");
      }
      rmse_by_label[std::string(fields[0])] =
          detail::parse_double(fields[1], val_rmse_file + ":" + std::to_string(i + 1));
    }
    std::vector<RunRmse> runs;
    for (const ScoreTable& t : tables) {
      const auto it = rmse_by_label.find(t.label);
      if (it == rmse_by_label.end()) {
        throw ValidationError("no validation RMSE for run '" + t.label + "' in " + val_rmse_file);
      }
      runs.push_back({t.label, it->second});
    }
    const FusionWeights weights = assign_weights_by_val_rmse(runs);
    fused = fuse_weighted(tables, weights);
    std::string wline = "weights:";
    char buf[32];
    for (double w : weights.values) {
      std::snprintf(buf, sizeof(buf), " %g", w);
      wline += buf;
    }
    comments.push_back(wline);
  }

  if (opts.dry_run) {
    std::cout << "fuse: config ok, " << tables.size() << " tables, method " << method << "\n";
    return;
  }
  const std::filesystem::path out_parent =
      output_path.parent_path().empty() ? "." : output_path.parent_path();
  std::filesystem::create_directories(out_parent);
  DirLock lock(out_parent);
  OutputGuard guard;
  guard.track(output_path);
  write_score_table(fused, output_path, comments);
  guard.commit();
  std::cout << "fuse: wrote " << fused.scores.size() << " rows to " << output_path.string()
            << "\n";
}

// ---------------------------------------------------------------------------
// evaluate

inline void evaluate_command(const std::filesystem::path& config_path, const CliOptions& opts) {
  KvConfig cfg = KvConfig::parse_file(config_path);
  const std::filesystem::path manifest_path = cfg.require_string("manifest");
  const std::vector<std::string> prediction_files = cfg.get_all("prediction");
  const std::filesystem::path out_dir = cfg.require_string("output_dir");
  std::optional<Split> split;
  if (cfg.has("split")) split = detail::parse_split_key(cfg.require_string("split"), cfg.source());
  cfg.finish();
  if (prediction_files.empty()) {
    throw ConfigError(cfg.source() + ": at least one 'prediction = <path>' line is required");
  }

  const DatasetManifest manifest = detail::filter_split(load_manifest(manifest_path), split);
  ScoreTable truth;
  for (const auto& rec : manifest.records) {
    if (rec.labels) truth.scores.emplace(rec.id, *rec.labels);
  }
  if (truth.scores.empty()) {
    throw ValidationError("evaluate: no labeled utterances in " + manifest_path.string());
  }

  std::vector<EvalReport> reports;
  for (const std::string& file : prediction_files) {
    ScoreTable pred = read_score_table(file);
    if (pred.label.empty()) pred.label = std::filesystem::path(file).stem().string();
    reports.push_back(rmse(pred, truth));
  }
  const std::vector<EvalReport> ranked = compare_runs(reports);
  std::cout << format_report_text(ranked);

  if (opts.dry_run) return;
  std::filesystem::create_directories(out_dir);
  DirLock lock(out_dir);
  OutputGuard guard;
  guard.track(out_dir / "report.txt");
  guard.track(out_dir / "report.tsv");
  write_report_files(ranked, out_dir / "report.txt", out_dir / "report.tsv");
  guard.commit();
}

}  // namespace emoscore
