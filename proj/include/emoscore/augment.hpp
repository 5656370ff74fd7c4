#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "emoscore/dataio.hpp"
#include "emoscore/error.hpp"
#include "emoscore/matrix.hpp"
#include "emoscore/rng.hpp"

namespace emoscore {

// Feature-level additive noise. A feature tensor is flattened to length T*D,
// a randomly chosen noise vector is truncated or tiled to that length, and
// added under a probability gate: noise goes in iff probability > u for a
// fresh u ~ Uniform[0,1). The gate draw always happens, the entry draw only
// on a mix, and each (seed, epoch, utterance) triple gets its own stream, so
// a probability-0 run is bit-identical to one with augmentation disabled.

struct NoiseBank {
  std::vector<std::vector<float>> entries;  // flattened noise tensors

  void validate() const {
    if (entries.empty()) throw ValidationError("noise bank is empty");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].empty()) {
        throw ValidationError("noise bank entry " + std::to_string(i) + " is empty");
      }
      for (float v : entries[i]) {
        if (!std::isfinite(v)) {
          throw ValidationError("noise bank entry " + std::to_string(i) +
                                " contains non-finite values");
        }
      }
    }
  }
};

struct AugmentConfig {
  double probability = 0.0;  // p in [0,1]
  double gain = 1.0;         // scale applied to the noise before addition
  std::uint64_t seed = 0;

  void validate() const {
    if (!(probability >= 0.0 && probability <= 1.0)) {
      throw ValidationError("noise probability must lie in [0,1]");
    }
    if (!(std::isfinite(gain) && gain >= 0.0)) {
      throw ValidationError("noise gain must be finite and >= 0");
    }
  }
};

// Every *.emof under dir, sorted by filename, flattened row-major.
inline NoiseBank load_noise_bank(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("noise bank directory " + dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".emof") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  NoiseBank bank;
  for (const auto& f : files) {
    bank.entries.push_back(read_feature_file(f).data);
  }
  bank.validate();
  return bank;
}

inline std::size_t flattened_length(const Matrix& m) {
  return static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols);
}

// Truncate when the noise is long enough, tile cyclically when it is short.
inline std::vector<float> match_length(std::span<const float> noise, std::size_t length) {
  if (noise.empty()) throw ValidationError("cannot length-match an empty noise vector");
  std::vector<float> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = noise[i % noise.size()];
  return out;
}

inline Matrix maybe_mix(const Matrix& m, const NoiseBank& bank, const AugmentConfig& cfg,
                        Rng& rng) {
  cfg.validate();
  const double u = rng.uniform01();
  if (!(cfg.probability > u)) return m;
  bank.validate();
  const std::size_t entry = rng.below(bank.entries.size());
  const std::vector<float> noise = match_length(bank.entries[entry], flattened_length(m));
  Matrix out = m;
  const float gain = static_cast<float>(cfg.gain);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += gain * noise[i];
  if (!all_finite(out)) {
    throw ValidationError("noise mixing produced non-finite values (gain " +
                          std::to_string(cfg.gain) + ")");
  }
  return out;
}

// Per-utterance stream derived from (seed, epoch, index): the augmented view
// of one utterance is a pure function of that triple, independent of batch
// order or thread count.
inline Matrix augment_utterance(const Matrix& m, const NoiseBank& bank, const AugmentConfig& cfg,
                                std::uint64_t epoch, std::uint64_t index) {
  Rng rng(derive_seed(cfg.seed, tag_hash("augment"), epoch, index));
  return maybe_mix(m, bank, cfg, rng);
}

inline std::vector<Matrix> augment_epoch(std::span<const Matrix> features, const NoiseBank& bank,
                                         const AugmentConfig& cfg, std::uint64_t epoch) {
  std::vector<Matrix> out;
  out.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    out.push_back(augment_utterance(features[i], bank, cfg, epoch, i));
  }
  return out;
}

}  // namespace emoscore
