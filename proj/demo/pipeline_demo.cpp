// End-to-end library walkthrough on an in-memory corpus: generate synthetic
// features, fine-tune the classifier head, predict, fuse two runs, and
// report RMSE. The CLI drives the same pipeline through files; this shows
// the underlying API.

#include <filesystem>
#include <iostream>

#include "emoscore/emoscore.hpp"

int main() {
  using namespace emoscore;
  const std::filesystem::path work =
      std::filesystem::temp_directory_path() / "emoscore_pipeline_demo";
  std::filesystem::remove_all(work);

  SynthSpec spec;
  spec.n_train_pool = 80;
  spec.n_test = 20;
  spec.t_min = 10;
  spec.t_max = 30;
  spec.dim = 16;
  spec.signal_map = random_signal_map(spec.dim, 1.0, 42);
  spec.offset = constant_offset(3.0);
  spec.noise_bank_entries = 3;
  spec.seed = 42;
  const SynthOutput corpus = generate(spec, work);
  std::cout << "corpus: " << corpus.manifest_path << "\n";

  DatasetManifest manifest = load_manifest(corpus.manifest_path);
  DatasetManifest trainval, test;
  for (const auto& rec : manifest.records) {
    (rec.split == Split::kTest ? test : trainval).records.push_back(rec);
  }
  trainval = split_dataset(trainval, 0.2, 7);
  const LoadedDataset data = load_features(trainval, work, spec.dim);
  const NoiseBank bank = load_noise_bank(corpus.noise_dir);

  ScoreTable truth;
  for (const auto& rec : test.records) truth.scores.emplace(rec.id, *rec.labels);
  const LoadedDataset test_data = load_features(test, work, spec.dim);

  std::vector<ScoreTable> runs;
  std::vector<RunRmse> run_rmses;
  for (const double probability : {0.0, 0.3, 0.5}) {
    ModelConfig mcfg;
    mcfg.seed = 1000 + static_cast<std::uint64_t>(probability * 10);
    TrainConfig tcfg;
    tcfg.max_epochs = 25;
    tcfg.lr0 = 1e-3;
    tcfg.seed = mcfg.seed;
    tcfg.augment.probability = probability;
    tcfg.augment.seed = mcfg.seed;
    const TrainResult result = train(data, &bank, mcfg, init_params(mcfg), tcfg);

    ScoreTable scores;
    scores.label = "p" + std::to_string(probability).substr(0, 3);
    ModelConfig predict_cfg = mcfg;
    predict_cfg.clamp_output = true;
    for (std::size_t i = 0; i < test_data.features.size(); ++i) {
      scores.scores.emplace(test_data.manifest.records[i].id,
                            model_forward(test_data.features[i], result.params, predict_cfg).scores);
    }
    std::cout << "run " << scores.label << ": best val RMSE " << result.best_val_rmse
              << ", test RMSE " << rmse(scores, truth).overall_rmse << "\n";
    run_rmses.push_back({scores.label, result.best_val_rmse});
    runs.push_back(std::move(scores));
  }

  std::vector<EvalReport> reports;
  reports.push_back(rmse(fuse_average(runs), truth));
  reports.push_back(rmse(fuse_weighted(runs, assign_weights_by_val_rmse(run_rmses)), truth));
  reports.push_back(rmse(fuse_max(runs), truth));
  std::cout << format_report_text(compare_runs(reports));

  std::filesystem::remove_all(work);
  return 0;
}
