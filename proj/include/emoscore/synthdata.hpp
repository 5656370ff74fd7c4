#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "emoscore/dataio.hpp"
#include "emoscore/error.hpp"
#include "emoscore/matrix.hpp"
#include "emoscore/rng.hpp"
#include "emoscore/scores.hpp"

namespace emoscore {

// Synthetic corpus with a planted linear signal: features are i.i.d. standard
// normal and labels are clip(B * mean_t(X) + c + noise, 1, 5). The signal
// lives on the mean-pooled raw features, so a closed-form least-squares fit
// recovers (B, c) independently of any model.

struct SynthSpec {
  int n_train_pool = 0;  // emitted with split=train, to be split downstream
  int n_test = 0;        // emitted with split=test, labels included
  int t_min = 20;
  int t_max = 80;
  int dim = 16;
  Matrix signal_map;        // kEmotionCount x dim (B)
  EmotionScores offset{};   // c
  double label_noise_sd = 0.0;
  int noise_bank_entries = 4;
  int noise_len_min = 64;
  int noise_len_max = 512;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_train_pool < 1) throw ValidationError("synth spec: n_train_pool must be >= 1");
    if (n_test < 0) throw ValidationError("synth spec: n_test must be >= 0");
    if (dim < 1) throw ValidationError("synth spec: dim must be >= 1");
    if (t_min < 1 || t_max < t_min) throw ValidationError("synth spec: bad frame range");
    if (signal_map.rows != kEmotionCount || signal_map.cols != dim) {
      throw ValidationError("synth spec: signal map must be " + std::to_string(kEmotionCount) +
                            "x" + std::to_string(dim));
    }
    if (!all_finite(signal_map)) throw ValidationError("synth spec: non-finite signal map");
    if (!scores_finite(offset)) throw ValidationError("synth spec: non-finite offset");
    if (!(label_noise_sd >= 0.0)) throw ValidationError("synth spec: label_noise_sd must be >= 0");
    if (noise_bank_entries < 0) throw ValidationError("synth spec: noise_bank_entries must be >= 0");
    if (noise_len_min < 1 || noise_len_max < noise_len_min) {
      throw ValidationError("synth spec: bad noise length range");
    }
  }
};

// Seeded uniform(-scale, scale) signal map; the usual way to fill SynthSpec.
inline Matrix random_signal_map(int dim, double scale, std::uint64_t seed) {
  Matrix b(kEmotionCount, dim);
  Rng rng(derive_seed(seed, tag_hash("signal")));
  for (float& v : b.data) v = static_cast<float>(rng.uniform(-scale, scale));
  return b;
}

inline EmotionScores constant_offset(double value) {
  EmotionScores c{};
  c.fill(value);
  return c;
}

struct SynthOutput {
  std::filesystem::path manifest_path;
  std::filesystem::path features_dir;
  std::filesystem::path noise_dir;
  std::filesystem::path spec_path;
};

namespace detail {

inline std::string utterance_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "u%05d", index);
  return buf;
}

}  // namespace detail

// Every utterance and every bank entry draws from its own derived stream, so
// the corpus is byte-identical for a given spec regardless of write order.
inline SynthOutput generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  SynthOutput out;
  out.features_dir = out_dir / "features";
  out.noise_dir = out_dir / "noise";
  out.manifest_path = out_dir / "manifest.tsv";
  out.spec_path = out_dir / "synth_spec.txt";
  std::filesystem::create_directories(out.features_dir);
  std::filesystem::create_directories(out.noise_dir);

  DatasetManifest manifest;
  const int total = spec.n_train_pool + spec.n_test;
  for (int i = 0; i < total; ++i) {
    Rng rng(derive_seed(spec.seed, tag_hash("utterance"), static_cast<std::uint64_t>(i)));
    const int frames = spec.t_min + static_cast<int>(rng.below(spec.t_max - spec.t_min + 1));
    Matrix x(frames, spec.dim);
    for (float& v : x.data) v = static_cast<float>(rng.normal());

    const std::vector<double> mean = col_means(x);
    EmotionScores labels{};
    for (int j = 0; j < kEmotionCount; ++j) {
      double acc = spec.offset[j];
      for (int d = 0; d < spec.dim; ++d) acc += spec.signal_map(j, d) * mean[d];
      if (spec.label_noise_sd > 0.0) acc += spec.label_noise_sd * rng.normal();
      labels[j] = std::min(kLabelMax, std::max(kLabelMin, acc));
    }

    UtteranceRecord rec;
    rec.id = detail::utterance_id(i);
    rec.feature_path = "features/" + rec.id + ".emof";
    rec.split = i < spec.n_train_pool ? Split::kTrain : Split::kTest;
    rec.labels = labels;
    write_feature_file(x, out_dir / rec.feature_path);
    manifest.records.push_back(std::move(rec));
  }
  save_manifest(manifest, out.manifest_path);

  for (int k = 0; k < spec.noise_bank_entries; ++k) {
    Rng rng(derive_seed(spec.seed, tag_hash("noise"), static_cast<std::uint64_t>(k)));
    const int len =
        spec.noise_len_min + static_cast<int>(rng.below(spec.noise_len_max - spec.noise_len_min + 1));
    Matrix entry(1, len);
    for (float& v : entry.data) v = static_cast<float>(rng.normal());
    char name[24];
    std::snprintf(name, sizeof(name), "bank%03d.emof", k);
    write_feature_file(entry, out.noise_dir / name);
  }

  // Provenance: scalar parameters plus the planted map itself.
  std::string provenance;
  provenance += "n_train_pool = " + std::to_string(spec.n_train_pool) + "\n";
  provenance += "n_test = " + std::to_string(spec.n_test) + "\n";
  provenance += "t_min = " + std::to_string(spec.t_min) + "\n";
  provenance += "t_max = " + std::to_string(spec.t_max) + "\n";
  provenance += "dim = " + std::to_string(spec.dim) + "\n";
  provenance += "label_noise_sd = " + detail::format_double(spec.label_noise_sd) + "\n";
  provenance += "noise_bank_entries = " + std::to_string(spec.noise_bank_entries) + "\n";
  provenance += "noise_len_min = " + std::to_string(spec.noise_len_min) + "\n";
  provenance += "noise_len_max = " + std::to_string(spec.noise_len_max) + "\n";
  provenance += "seed = " + std::to_string(spec.seed) + "\n";
  provenance += "offset =";
  for (double v : spec.offset) provenance += " " + detail::format_double(v);
  provenance += "\nsignal_map = signal_map.emof\n";
  detail::write_file_bytes(out.spec_path, provenance);
  write_feature_file(spec.signal_map, out_dir / "signal_map.emof");
  return out;
}

}  // namespace emoscore
