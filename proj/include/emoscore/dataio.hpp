#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "emoscore/error.hpp"
#include "emoscore/matrix.hpp"
#include "emoscore/rng.hpp"
#include "emoscore/scores.hpp"

namespace emoscore {

// EMOF feature file, little-endian:
//   bytes  0-3   magic "EMOF"
//   bytes  4-7   version u32 = 1
//   bytes  8-11  T u32 (frames)
//   bytes 12-15  D u32 (feature dim)
//   then T*D float32 values, row-major
//
// Manifest: one record per line, `id<TAB>path<TAB>split<TAB>l1..l8`;
// the eight label fields are omitted entirely for unlabeled test rows;
// lines starting with '#' are comments.
//
// Score table: header line `# emoscore-scores v1`, then `id<TAB>s1..s8`.

using FeatureMatrix = Matrix;

inline constexpr std::uint32_t kEmofVersion = 1;
inline constexpr char kEmofMagic[4] = {'E', 'M', 'O', 'F'};
inline constexpr std::string_view kScoreTableHeader = "# emoscore-scores v1";

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return std::move(buf).str();
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

// %.17g round-trips doubles exactly, so text artifacts are as reproducible
// as the binary ones.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view text, const std::string& context) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw FormatError(context + ": cannot parse number '" + std::string(text) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Feature tensors

inline void write_feature_file(const Matrix& m, const std::filesystem::path& path) {
  if (m.rows < 1 || m.cols < 1) {
    throw ValidationError("feature matrix must be at least 1x1, got " + std::to_string(m.rows) +
                          "x" + std::to_string(m.cols));
  }
  if (!all_finite(m)) {
    throw ValidationError("feature matrix for " + path.string() + " contains non-finite values");
  }
  std::string bytes;
  bytes.reserve(16 + m.size() * 4);
  bytes.append(kEmofMagic, 4);
  detail::put_u32(bytes, kEmofVersion);
  detail::put_u32(bytes, static_cast<std::uint32_t>(m.rows));
  detail::put_u32(bytes, static_cast<std::uint32_t>(m.cols));
  for (float v : m.data) detail::put_u32(bytes, std::bit_cast<std::uint32_t>(v));
  detail::write_file_bytes(path, bytes);
}

inline Matrix read_feature_file(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < 16) throw LengthError(path.string() + ": truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::string_view(bytes.data(), 4) != std::string_view(kEmofMagic, 4)) {
    throw FormatError(path.string() + ": bad magic, not an EMOF file");
  }
  const std::uint32_t version = detail::get_u32(p + 4);
  if (version != kEmofVersion) {
    throw FormatError(path.string() + ": unsupported EMOF version " + std::to_string(version));
  }
  const std::uint32_t t = detail::get_u32(p + 8);
  const std::uint32_t d = detail::get_u32(p + 12);
  if (t == 0 || d == 0) {
    throw ValidationError(path.string() + ": empty tensor (T=" + std::to_string(t) +
                          ", D=" + std::to_string(d) + ")");
  }
  const std::uint64_t count = static_cast<std::uint64_t>(t) * d;
  if (bytes.size() != 16 + count * 4) {
    throw LengthError(path.string() + ": payload is " + std::to_string(bytes.size() - 16) +
                      " bytes, expected " + std::to_string(count * 4));
  }
  Matrix m(static_cast<int>(t), static_cast<int>(d));
  for (std::uint64_t i = 0; i < count; ++i) {
    m.data[i] = std::bit_cast<float>(detail::get_u32(p + 16 + i * 4));
  }
  if (!all_finite(m)) {
    throw ValidationError(path.string() + ": tensor contains non-finite values");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Manifests

enum class Split { kTrain, kVal, kTest };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view text, const std::string& context) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw FormatError(context + ": unknown split '" + std::string(text) + "'");
}

struct UtteranceRecord {
  std::string id;
  std::string feature_path;  // relative to the manifest's directory
  Split split = Split::kTrain;
  std::optional<EmotionScores> labels;
};

struct DatasetManifest {
  std::vector<UtteranceRecord> records;

  std::size_t count(Split s) const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.split == s ? 1 : 0;
    return n;
  }
};

namespace detail {

inline void check_id(std::string_view id, const std::string& context) {
  if (id.empty()) throw ValidationError(context + ": empty utterance id");
  if (id.find_first_of("\t\r\n") != std::string_view::npos) {
    throw ValidationError(context + ": utterance id contains control characters");
  }
}

inline bool is_comment_or_blank(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t') return false;
  }
  return true;  // blank
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= bytes.size(); ++i) {
    if (i == bytes.size() || bytes[i] == '\n') {
      std::string line = bytes.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
      start = i + 1;
    }
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace detail

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  DatasetManifest manifest;
  std::set<std::string, std::less<>> seen;
  const auto lines = detail::read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (detail::is_comment_or_blank(line)) continue;
    const std::string context = path.string() + ":" + std::to_string(ln + 1);
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3 && fields.size() != 3 + kEmotionCount) {
      throw FormatError(context + ": expected 3 or " + std::to_string(3 + kEmotionCount) +
                        " tab-separated fields, got " + std::to_string(fields.size()));
    }
    UtteranceRecord rec;
    detail::check_id(fields[0], context);
    rec.id = std::string(fields[0]);
    if (!seen.insert(rec.id).second) {
      throw ValidationError(context + ": duplicate id '" + rec.id + "'");
    }
    if (fields[1].empty()) throw FormatError(context + ": empty feature path");
    rec.feature_path = std::string(fields[1]);
    rec.split = parse_split(fields[2], context);
    if (fields.size() == 3 + kEmotionCount) {
      EmotionScores labels{};
      for (int j = 0; j < kEmotionCount; ++j) {
        labels[j] = detail::parse_double(fields[3 + j], context);
      }
      if (!labels_in_range(labels)) {
        throw ValidationError(context + ": label outside the scale of 1 to 5 for id '" + rec.id +
                              "'");
      }
      rec.labels = labels;
    } else if (rec.split != Split::kTest) {
      throw ValidationError(context + ": " + std::string(split_name(rec.split)) +
                            " record '" + rec.id + "' has no labels");
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

inline void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::string out;
  for (const auto& rec : manifest.records) {
    detail::check_id(rec.id, "manifest record");
    if (!rec.labels && rec.split != Split::kTest) {
      throw ValidationError("record '" + rec.id + "' needs labels for split " +
                            std::string(split_name(rec.split)));
    }
    out += rec.id;
    out += '\t';
    out += rec.feature_path;
    out += '\t';
    out += split_name(rec.split);
    if (rec.labels) {
      if (!labels_in_range(*rec.labels)) {
        throw ValidationError("record '" + rec.id + "' has a label outside the scale of 1 to 5");
      }
      for (double v : *rec.labels) {
        out += '\t';
        out += detail::format_double(v);
      }
    }
    out += '\n';
  }
  detail::write_file_bytes(path, out);
}

// Reassigns round(val_fraction*N) pool records to the validation split.
// Pure function of (manifest, val_fraction, seed): record order is kept,
// membership comes from a seeded shuffle of indices.
inline DatasetManifest split_dataset(const DatasetManifest& manifest, double val_fraction,
                                     std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ValidationError("val_fraction must lie in (0,1), got " +
                          detail::format_double(val_fraction));
  }
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::kTrain) {
      throw ValidationError("split_dataset expects an unsplit train pool; record '" + rec.id +
                            "' is tagged " + std::string(split_name(rec.split)));
    }
  }
  const std::size_t n = manifest.records.size();
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) {
    throw ValidationError("val_fraction " + detail::format_double(val_fraction) + " leaves an empty " +
                          (n_val == 0 ? std::string("val") : std::string("train")) + " split for " +
                          std::to_string(n) + " records");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, tag_hash("split")));
  rng.shuffle(order);
  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  DatasetManifest out = manifest;
  for (std::size_t i = 0; i < n; ++i) {
    out.records[i].split = is_val[i] ? Split::kVal : Split::kTrain;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Score tables

struct ScoreTable {
  std::string label;
  std::map<std::string, EmotionScores> scores;
};

inline void write_score_table(const ScoreTable& table, const std::filesystem::path& path,
                              const std::vector<std::string>& extra_comments = {}) {
  std::string out;
  out += kScoreTableHeader;
  out += '\n';
  if (!table.label.empty()) {
    out += "# run: ";
    out += table.label;
    out += '\n';
  }
  for (const auto& comment : extra_comments) {
    out += "# ";
    out += comment;
    out += '\n';
  }
  for (const auto& [id, values] : table.scores) {
    detail::check_id(id, "score table record");
    if (!scores_finite(values)) {
      throw ValidationError("score row '" + id + "' contains non-finite values");
    }
    out += id;
    for (double v : values) {
      out += '\t';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  detail::write_file_bytes(path, out);
}

inline ScoreTable read_score_table(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || lines[0] != kScoreTableHeader) {
    throw FormatError(path.string() + ": missing '" + std::string(kScoreTableHeader) +
                      "' header line");
  }
  ScoreTable table;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    const std::string context = path.string() + ":" + std::to_string(ln + 1);
    if (detail::is_comment_or_blank(line)) {
      constexpr std::string_view run_prefix = "# run: ";
      if (table.label.empty() && line.starts_with(run_prefix)) {
        table.label = line.substr(run_prefix.size());
      }
      continue;
    }
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 1 + kEmotionCount) {
      throw FormatError(context + ": expected id plus " + std::to_string(kEmotionCount) +
                        " scores, got " + std::to_string(fields.size()) + " fields");
    }
    detail::check_id(fields[0], context);
    std::string id(fields[0]);
    EmotionScores values{};
    for (int j = 0; j < kEmotionCount; ++j) {
      values[j] = detail::parse_double(fields[1 + j], context);
      if (!std::isfinite(values[j])) {
        throw ValidationError(context + ": non-finite score for id '" + id + "'");
      }
    }
    if (!table.scores.emplace(std::move(id), values).second) {
      throw ValidationError(context + ": duplicate id '" + std::string(fields[0]) + "'");
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Bulk feature loading

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<Matrix> features;  // parallel to manifest.records
};

// Reads every record's feature file. Dimension mismatches are reported here,
// at load time, never later in a forward pass. expected_dim <= 0 means
// "take the first file's dimension".
inline LoadedDataset load_features(const DatasetManifest& manifest,
                                   const std::filesystem::path& base_dir, int expected_dim = 0) {
  LoadedDataset out;
  out.manifest = manifest;
  out.features.reserve(manifest.records.size());
  int dim = expected_dim;
  for (const auto& rec : manifest.records) {
    Matrix m = read_feature_file(base_dir / rec.feature_path);
    if (dim <= 0) dim = m.cols;
    if (m.cols != dim) {
      throw ValidationError("utterance '" + rec.id + "': feature dim " + std::to_string(m.cols) +
                            " does not match expected " + std::to_string(dim));
    }
    out.features.push_back(std::move(m));
  }
  return out;
}

}  // namespace emoscore
