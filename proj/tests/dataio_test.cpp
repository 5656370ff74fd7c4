#include "emoscore/dataio.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "emoscore/rng.hpp"
#include "testutil.hpp"

using namespace emoscore;
namespace fs = std::filesystem;

namespace {

Matrix make_matrix(int rows, int cols, std::initializer_list<float> values) {
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data.begin());
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TEST(FeatureFile, SmallestCaseIsHeaderPlusOneValue) {
  testutil::TempDir tmp("emof_smallest");
  const fs::path path = tmp.path() / "a.emof";
  write_feature_file(make_matrix(1, 1, {0.0f}), path);
  EXPECT_EQ(fs::file_size(path), 16u + 4u);
  const Matrix back = read_feature_file(path);
  EXPECT_EQ(back.rows, 1);
  EXPECT_EQ(back.cols, 1);
  EXPECT_EQ(back(0, 0), 0.0f);
}

TEST(FeatureFile, RoundTripIsBitExact) {
  testutil::TempDir tmp("emof_roundtrip");
  const fs::path path = tmp.path() / "b.emof";
  const Matrix m = make_matrix(2, 3, {1, 2, 3, 4, 5, 6});
  write_feature_file(m, path);
  EXPECT_EQ(read_feature_file(path), m);
}

TEST(FeatureFile, NanIsRejectedWithoutWriting) {
  testutil::TempDir tmp("emof_nan");
  const fs::path path = tmp.path() / "c.emof";
  Matrix m = make_matrix(1, 2, {1.0f, 0.0f});
  m(0, 1) = std::nanf("");
  EXPECT_THROW(write_feature_file(m, path), ValidationError);
  EXPECT_FALSE(fs::exists(path));
}

TEST(FeatureFile, BadMagicIsFormatError) {
  testutil::TempDir tmp("emof_magic");
  const fs::path path = tmp.path() / "d.emof";
  write_feature_file(make_matrix(1, 1, {1.0f}), path);
  std::string bytes = slurp(path);
  bytes.replace(0, 4, "XXXX");
  spit(path, bytes);
  EXPECT_THROW(read_feature_file(path), FormatError);
}

TEST(FeatureFile, TruncatedPayloadIsLengthError) {
  // Declared 2x3 needs 24 payload bytes; hand it 20.
  testutil::TempDir tmp("emof_trunc");
  const fs::path path = tmp.path() / "e.emof";
  write_feature_file(make_matrix(2, 3, {1, 2, 3, 4, 5, 6}), path);
  std::string bytes = slurp(path);
  ASSERT_EQ(bytes.size(), 16u + 24u);
  bytes.resize(16 + 20);
  spit(path, bytes);
  EXPECT_THROW(read_feature_file(path), LengthError);
}

TEST(FeatureFile, ZeroShapeIsValidationError) {
  testutil::TempDir tmp("emof_zero");
  const fs::path path = tmp.path() / "f.emof";
  write_feature_file(make_matrix(1, 1, {1.0f}), path);
  std::string bytes = slurp(path);
  bytes[8] = bytes[9] = bytes[10] = bytes[11] = 0;  // T = 0
  bytes.resize(16);
  spit(path, bytes);
  EXPECT_THROW(read_feature_file(path), ValidationError);
}

TEST(FeatureFile, UnsupportedVersionIsFormatError) {
  testutil::TempDir tmp("emof_version");
  const fs::path path = tmp.path() / "g.emof";
  write_feature_file(make_matrix(1, 1, {1.0f}), path);
  std::string bytes = slurp(path);
  bytes[4] = 9;
  spit(path, bytes);
  EXPECT_THROW(read_feature_file(path), FormatError);
}

TEST(FeatureFile, MissingFileIsIoError) {
  EXPECT_THROW(read_feature_file("/nonexistent/nope.emof"), IoError);
}

TEST(FeatureFile, RandomRoundTripProperty) {
  testutil::TempDir tmp("emof_prop");
  Rng rng(20240601);
  for (int trial = 0; trial < 40; ++trial) {
    const int rows = 1 + static_cast<int>(rng.below(64));
    const int cols = 1 + static_cast<int>(rng.below(24));
    const Matrix m = testutil::random_matrix(rows, cols, rng, 10.0);
    const fs::path path = tmp.path() / ("p" + std::to_string(trial) + ".emof");
    write_feature_file(m, path);
    EXPECT_EQ(read_feature_file(path), m) << "trial " << trial;
  }
}

// ---------------------------------------------------------------------------

TEST(Manifest, ParsesRecordsWithLabelsAndComments) {
  testutil::TempDir tmp("manifest_ok");
  const fs::path path = tmp.path() / "m.tsv";
  spit(path,
       "# fixture\n"
       "u1\tfeat/u1.emof\ttrain\t1\t2\t3\t4\t5\t1.5\t2.5\t3.5\n"
       "u2\tfeat/u2.emof\tval\t1\t1\t1\t1\t1\t1\t1\t1\n"
       "u3\tfeat/u3.emof\ttest\n");
  const DatasetManifest m = load_manifest(path);
  ASSERT_EQ(m.records.size(), 3u);
  EXPECT_EQ(m.records[0].id, "u1");
  EXPECT_EQ(m.records[0].split, Split::kTrain);
  ASSERT_TRUE(m.records[0].labels.has_value());
  EXPECT_DOUBLE_EQ((*m.records[0].labels)[7], 3.5);
  EXPECT_EQ(m.records[1].split, Split::kVal);
  EXPECT_EQ(m.records[2].split, Split::kTest);
  EXPECT_FALSE(m.records[2].labels.has_value());
  EXPECT_EQ(m.count(Split::kTrain), 1u);
}

TEST(Manifest, DuplicateIdNamesTheId) {
  testutil::TempDir tmp("manifest_dup");
  const fs::path path = tmp.path() / "m.tsv";
  spit(path,
       "u1\ta.emof\ttest\n"
       "u1\tb.emof\ttest\n");
  try {
    load_manifest(path);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("u1"), std::string::npos);
  }
}

TEST(Manifest, LabelOutOfRangeCitesTheScale) {
  testutil::TempDir tmp("manifest_range");
  const fs::path path = tmp.path() / "m.tsv";
  spit(path, "u1\ta.emof\ttrain\t6\t3\t3\t3\t3\t3\t3\t3\n");
  try {
    load_manifest(path);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("scale of 1 to 5"), std::string::npos);
  }
}

TEST(Manifest, TrainRowWithoutLabelsIsRejected) {
  testutil::TempDir tmp("manifest_nolabel");
  const fs::path path = tmp.path() / "m.tsv";
  spit(path, "u1\ta.emof\ttrain\n");
  EXPECT_THROW(load_manifest(path), ValidationError);
}

TEST(Manifest, UnknownSplitIsFormatError) {
  testutil::TempDir tmp("manifest_split");
  const fs::path path = tmp.path() / "m.tsv";
  spit(path, "u1\ta.emof\tdev\n");
  EXPECT_THROW(load_manifest(path), FormatError);
}

TEST(Manifest, SaveLoadRoundTrip) {
  testutil::TempDir tmp("manifest_rt");
  DatasetManifest m;
  Rng rng(7);
  for (int i = 0; i < 5; ++i) {
    UtteranceRecord rec;
    rec.id = "u" + std::to_string(i);
    rec.feature_path = "f/" + rec.id + ".emof";
    rec.split = i < 4 ? Split::kTrain : Split::kTest;
    rec.labels = testutil::random_scores(rng);
    m.records.push_back(rec);
  }
  const fs::path path = tmp.path() / "m.tsv";
  save_manifest(m, path);
  const DatasetManifest back = load_manifest(path);
  ASSERT_EQ(back.records.size(), m.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    EXPECT_EQ(back.records[i].id, m.records[i].id);
    EXPECT_EQ(back.records[i].feature_path, m.records[i].feature_path);
    EXPECT_EQ(back.records[i].split, m.records[i].split);
    EXPECT_EQ(*back.records[i].labels, *m.records[i].labels);
  }
}

// ---------------------------------------------------------------------------

DatasetManifest make_pool(int n) {
  DatasetManifest m;
  for (int i = 0; i < n; ++i) {
    UtteranceRecord rec;
    rec.id = "u" + std::to_string(i);
    rec.feature_path = rec.id + ".emof";
    rec.split = Split::kTrain;
    rec.labels = EmotionScores{3, 3, 3, 3, 3, 3, 3, 3};
    m.records.push_back(rec);
  }
  return m;
}

TEST(SplitDataset, CountsAndDeterminism) {
  const DatasetManifest pool = make_pool(10);
  const DatasetManifest a = split_dataset(pool, 0.2, 7);
  const DatasetManifest b = split_dataset(pool, 0.2, 7);
  EXPECT_EQ(a.count(Split::kTrain), 8u);
  EXPECT_EQ(a.count(Split::kVal), 2u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].split, b.records[i].split) << "record " << i;
    EXPECT_EQ(a.records[i].id, pool.records[i].id);
  }
}

TEST(SplitDataset, DifferentSeedsGiveValidPartitions) {
  const DatasetManifest pool = make_pool(10);
  for (std::uint64_t seed : {1ull, 2ull}) {
    const DatasetManifest s = split_dataset(pool, 0.2, seed);
    EXPECT_EQ(s.count(Split::kTrain) + s.count(Split::kVal), 10u);
    EXPECT_EQ(s.count(Split::kVal), 2u);
  }
}

TEST(SplitDataset, EmptySideIsRejected) {
  const DatasetManifest pool = make_pool(10);
  EXPECT_THROW(split_dataset(pool, 0.999, 1), ValidationError);  // empty train
  EXPECT_THROW(split_dataset(pool, 0.01, 1), ValidationError);   // empty val
  EXPECT_THROW(split_dataset(pool, 1.5, 1), ValidationError);
}

TEST(SplitDataset, RejectsAlreadySplitInput) {
  DatasetManifest pool = make_pool(10);
  pool.records[3].split = Split::kVal;
  EXPECT_THROW(split_dataset(pool, 0.2, 1), ValidationError);
}

// ---------------------------------------------------------------------------

TEST(ScoreTableIo, RoundTripWithLabelAndComments) {
  testutil::TempDir tmp("scores_rt");
  ScoreTable t;
  t.label = "run_a";
  Rng rng(11);
  for (int i = 0; i < 4; ++i) {
    t.scores["u" + std::to_string(i)] = testutil::random_scores(rng, 0.0, 6.0);
  }
  const fs::path path = tmp.path() / "s.tsv";
  write_score_table(t, path, {"method: average"});
  const ScoreTable back = read_score_table(path);
  EXPECT_EQ(back.label, "run_a");
  ASSERT_EQ(back.scores.size(), t.scores.size());
  for (const auto& [id, values] : t.scores) {
    ASSERT_TRUE(back.scores.count(id));
    EXPECT_EQ(back.scores.at(id), values) << id;  // %.17g round-trips exactly
  }
}

TEST(ScoreTableIo, MissingHeaderIsFormatError) {
  testutil::TempDir tmp("scores_hdr");
  const fs::path path = tmp.path() / "s.tsv";
  spit(path, "u1\t1\t1\t1\t1\t1\t1\t1\t1\n");
  EXPECT_THROW(read_score_table(path), FormatError);
}

TEST(ScoreTableIo, HeaderOnlyFileIsEmptyTable) {
  testutil::TempDir tmp("scores_empty");
  const fs::path path = tmp.path() / "s.tsv";
  write_score_table(ScoreTable{}, path);
  EXPECT_TRUE(read_score_table(path).scores.empty());
}

// ---------------------------------------------------------------------------

TEST(LoadFeatures, DimensionMismatchDetectedAtLoadTime) {
  testutil::TempDir tmp("load_dim");
  write_feature_file(Matrix(3, 4, 0.5f), tmp.path() / "a.emof");
  write_feature_file(Matrix(3, 5, 0.5f), tmp.path() / "b.emof");
  DatasetManifest m;
  for (const char* id : {"a", "b"}) {
    UtteranceRecord rec;
    rec.id = id;
    rec.feature_path = std::string(id) + ".emof";
    rec.split = Split::kTest;
    m.records.push_back(rec);
  }
  try {
    load_features(m, tmp.path(), 4);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  // Inferred-dim path fails the same way.
  EXPECT_THROW(load_features(m, tmp.path()), ValidationError);
}

}  // namespace
