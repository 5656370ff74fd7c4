#include "emoscore/fusion.hpp"

#include <gtest/gtest.h>

#include "testutil.hpp"

using namespace emoscore;

namespace {

ScoreTable table_with(const std::string& label,
                      std::initializer_list<std::pair<std::string, EmotionScores>> rows) {
  ScoreTable t;
  t.label = label;
  for (const auto& [id, scores] : rows) t.scores.emplace(id, scores);
  return t;
}

std::vector<ScoreTable> random_tables(int n_tables, int n_utterances, Rng& rng) {
  std::vector<ScoreTable> tables(n_tables);
  for (int i = 0; i < n_tables; ++i) {
    tables[i].label = "t" + std::to_string(i);
    for (int u = 0; u < n_utterances; ++u) {
      tables[i].scores.emplace("u" + std::to_string(u), testutil::random_scores(rng, 0.0, 6.0));
    }
  }
  return tables;
}

TEST(FuseAverage, SingleTableIsIdentity) {
  const ScoreTable t = table_with("a", {{"u1", {1, 2, 3, 4, 5, 1, 2, 3}}});
  const ScoreTable fused = fuse_average({t});
  EXPECT_EQ(fused.scores.at("u1"), t.scores.at("u1"));
}

TEST(FuseAverage, TwoTablesByHand) {
  const ScoreTable a = table_with("a", {{"u1", {1, 3, 1, 3, 1, 3, 1, 3}}});
  const ScoreTable b = table_with("b", {{"u1", {3, 5, 3, 5, 3, 5, 3, 5}}});
  const ScoreTable fused = fuse_average({a, b});
  const EmotionScores expected{2, 4, 2, 4, 2, 4, 2, 4};
  EXPECT_EQ(fused.scores.at("u1"), expected);
}

TEST(FuseAverage, IdempotentOnEqualTables) {
  Rng rng(1);
  const auto tables = random_tables(1, 5, rng);
  const std::vector<ScoreTable> triple{tables[0], tables[0], tables[0]};
  const ScoreTable fused = fuse_average(triple);
  for (const auto& [id, scores] : tables[0].scores) {
    for (int j = 0; j < kEmotionCount; ++j) {
      EXPECT_NEAR(fused.scores.at(id)[j], scores[j], 1e-12);
    }
  }
}

TEST(FuseWeighted, UniformWeightsEqualAverage) {
  Rng rng(2);
  const auto tables = random_tables(3, 8, rng);
  FusionWeights w;
  w.values = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  const ScoreTable avg = fuse_average(tables);
  const ScoreTable wavg = fuse_weighted(tables, w);
  for (const auto& [id, scores] : avg.scores) {
    for (int j = 0; j < kEmotionCount; ++j) {
      EXPECT_NEAR(wavg.scores.at(id)[j], scores[j], 1e-12);
    }
  }
}

TEST(FuseWeighted, HandComputedCombination) {
  const ScoreTable a = table_with("a", {{"u1", {5, 5, 5, 5, 5, 5, 5, 5}}});
  const ScoreTable b = table_with("b", {{"u1", {0, 0, 0, 0, 0, 0, 0, 0}}});
  const ScoreTable c = table_with("c", {{"u1", {0, 0, 0, 0, 0, 0, 0, 0}}});
  FusionWeights w;
  w.values = {0.6, 0.2, 0.2};
  const ScoreTable fused = fuse_weighted({a, b, c}, w);
  for (double v : fused.scores.at("u1")) EXPECT_DOUBLE_EQ(v, 3.0);
}

TEST(FuseWeighted, DegenerateWeightSelectsOneTable) {
  Rng rng(3);
  const auto tables = random_tables(3, 4, rng);
  FusionWeights w;
  w.values = {1.0, 0.0, 0.0};
  const ScoreTable fused = fuse_weighted(tables, w);
  for (const auto& [id, scores] : tables[0].scores) {
    EXPECT_EQ(fused.scores.at(id), scores);
  }
}

TEST(FuseWeighted, RejectsBadWeights) {
  Rng rng(4);
  const auto tables = random_tables(3, 2, rng);
  FusionWeights short_w;
  short_w.values = {0.5, 0.5};
  EXPECT_THROW(fuse_weighted(tables, short_w), ValidationError);
  FusionWeights bad_sum;
  bad_sum.values = {0.5, 0.3, 0.3};
  EXPECT_THROW(fuse_weighted(tables, bad_sum), ValidationError);
  FusionWeights negative;
  negative.values = {1.5, -0.3, -0.2};
  EXPECT_THROW(fuse_weighted(tables, negative), ValidationError);
}

TEST(FuseMax, ElementwiseMaximum) {
  const ScoreTable a = table_with("a", {{"u1", {1, 4, 1, 4, 1, 4, 1, 4}}});
  const ScoreTable b = table_with("b", {{"u1", {3, 2, 3, 2, 3, 2, 3, 2}}});
  const ScoreTable fused = fuse_max({a, b});
  const EmotionScores expected{3, 4, 3, 4, 3, 4, 3, 4};
  EXPECT_EQ(fused.scores.at("u1"), expected);
  const ScoreTable single = fuse_max({a});
  EXPECT_EQ(single.scores.at("u1"), a.scores.at("u1"));
}

TEST(FuseMax, DominatesAverageElementwise) {
  Rng rng(5);
  const auto tables = random_tables(4, 10, rng);
  const ScoreTable avg = fuse_average(tables);
  const ScoreTable mx = fuse_max(tables);
  for (const auto& [id, a] : avg.scores) {
    const EmotionScores& m = mx.scores.at(id);
    for (int j = 0; j < kEmotionCount; ++j) EXPECT_GE(m[j], a[j]);
  }
}

TEST(Fusion, ConvexityBoundsForAverageAndWeighted) {
  Rng rng(6);
  const auto tables = random_tables(3, 10, rng);
  FusionWeights w;
  w.values = {0.6, 0.2, 0.2};
  const ScoreTable avg = fuse_average(tables);
  const ScoreTable wavg = fuse_weighted(tables, w);
  for (const auto& [id, _] : tables[0].scores) {
    for (int j = 0; j < kEmotionCount; ++j) {
      double lo = tables[0].scores.at(id)[j], hi = lo;
      for (const auto& t : tables) {
        lo = std::min(lo, t.scores.at(id)[j]);
        hi = std::max(hi, t.scores.at(id)[j]);
      }
      EXPECT_GE(avg.scores.at(id)[j], lo - 1e-12);
      EXPECT_LE(avg.scores.at(id)[j], hi + 1e-12);
      EXPECT_GE(wavg.scores.at(id)[j], lo - 1e-12);
      EXPECT_LE(wavg.scores.at(id)[j], hi + 1e-12);
    }
  }
}

TEST(Fusion, PermutationInvariance) {
  Rng rng(7);
  auto tables = random_tables(3, 6, rng);
  FusionWeights w;
  w.values = {0.6, 0.2, 0.2};
  const ScoreTable base_avg = fuse_average(tables);
  const ScoreTable base_wavg = fuse_weighted(tables, w);
  const ScoreTable base_max = fuse_max(tables);
  std::swap(tables[0], tables[2]);
  FusionWeights pw;
  pw.values = {0.2, 0.2, 0.6};
  const ScoreTable perm_avg = fuse_average(tables);
  const ScoreTable perm_wavg = fuse_weighted(tables, pw);
  const ScoreTable perm_max = fuse_max(tables);
  for (const auto& [id, _] : base_avg.scores) {
    for (int j = 0; j < kEmotionCount; ++j) {
      EXPECT_NEAR(base_avg.scores.at(id)[j], perm_avg.scores.at(id)[j], 1e-12);
      EXPECT_NEAR(base_wavg.scores.at(id)[j], perm_wavg.scores.at(id)[j], 1e-12);
      EXPECT_EQ(base_max.scores.at(id)[j], perm_max.scores.at(id)[j]);
    }
  }
}

TEST(Fusion, MisalignedIdSetsAreReported) {
  ScoreTable a = table_with("a", {{"u1", {1, 1, 1, 1, 1, 1, 1, 1}}});
  ScoreTable b = table_with("b", {{"u2", {1, 1, 1, 1, 1, 1, 1, 1}}});
  try {
    fuse_average({a, b});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'u1'"), std::string::npos);
    EXPECT_NE(msg.find("'u2'"), std::string::npos);
  }
  EXPECT_THROW(fuse_average({}), ValidationError);
}

TEST(AssignWeights, RanksByValidationRmse) {
  const std::vector<RunRmse> runs{{"A", 1.9}, {"B", 1.7}, {"C", 1.8}};
  const FusionWeights w = assign_weights_by_val_rmse(runs);
  ASSERT_EQ(w.values.size(), 3u);
  EXPECT_DOUBLE_EQ(w.values[0], 0.2);  // A
  EXPECT_DOUBLE_EQ(w.values[1], 0.6);  // B has the smallest RMSE
  EXPECT_DOUBLE_EQ(w.values[2], 0.2);  // C
  EXPECT_NO_THROW(w.validate());
}

TEST(AssignWeights, TiesBreakLexicographically) {
  const std::vector<RunRmse> runs{{"C", 1.5}, {"A", 1.5}, {"B", 1.5}};
  const FusionWeights w = assign_weights_by_val_rmse(runs);
  EXPECT_DOUBLE_EQ(w.values[0], 0.2);  // C
  EXPECT_DOUBLE_EQ(w.values[1], 0.6);  // A wins the tie
  EXPECT_DOUBLE_EQ(w.values[2], 0.2);  // B
}

TEST(AssignWeights, RejectsWrongRunCount) {
  EXPECT_THROW(assign_weights_by_val_rmse({{"A", 1.0}, {"B", 2.0}}), ValidationError);
  EXPECT_THROW(assign_weights_by_val_rmse(
                   {{"A", 1.0}, {"B", 2.0}, {"C", 3.0}, {"D", 4.0}}),
               ValidationError);
  EXPECT_THROW(assign_weights_by_val_rmse({{"A", 1.0}, {"A", 2.0}, {"C", 3.0}}), ValidationError);
}

TEST(Fusion, AllMethodsIdentityOnEqualTables) {
  Rng rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    const auto one = random_tables(1, 1 + static_cast<int>(rng.below(12)), rng);
    const std::vector<ScoreTable> copies{one[0], one[0], one[0]};
    FusionWeights w;
    w.values = {0.6, 0.2, 0.2};
    const ScoreTable avg = fuse_average(copies);
    const ScoreTable wavg = fuse_weighted(copies, w);
    const ScoreTable mx = fuse_max(copies);
    for (const auto& [id, scores] : one[0].scores) {
      for (int j = 0; j < kEmotionCount; ++j) {
        EXPECT_NEAR(avg.scores.at(id)[j], scores[j], 1e-12);
        EXPECT_NEAR(wavg.scores.at(id)[j], scores[j], 1e-12);
        EXPECT_EQ(mx.scores.at(id)[j], scores[j]);
      }
    }
  }
}

}  // namespace
