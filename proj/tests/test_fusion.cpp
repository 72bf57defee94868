#include <gtest/gtest.h>

#include <random>

#include "acida/fusion.hpp"

namespace acida {
namespace {

AttemptProbabilities probs(double a, double b, double c) { return {a, b, c}; }

AttemptProbabilities random_probs(std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  const double a = e(rng), b = e(rng), c = e(rng);
  const double s = a + b + c;
  AttemptProbabilities p{a / s, b / s, 0.0};
  p.criminal = 1.0 - p.accomplice - p.bona_fide;
  if (p.criminal < 0.0) p.criminal = 0.0;
  return p;
}

TEST(Fusion, WeightedExamples) {
  const ModuleScores s{0.9, 0.2};
  EXPECT_NEAR(fuse_weighted(probs(0.5, 0.3, 0.2), s), 0.5 * 0.9 + 0.5 * 0.2, 1e-15);
  EXPECT_NEAR(fuse_weighted(probs(0.5, 0.3, 0.2), s, BonaFideRoute::ToIda), 0.8 * 0.9 + 0.2 * 0.2, 1e-15);
  EXPECT_EQ(fuse_weighted(probs(1, 0, 0), s), 0.9);
  EXPECT_EQ(fuse_weighted(probs(0, 0, 1), s), 0.2);
  EXPECT_EQ(fuse_weighted(probs(0, 1, 0), s), 0.2);
  EXPECT_EQ(fuse_weighted(probs(0, 1, 0), s, BonaFideRoute::ToIda), 0.9);
}

TEST(Fusion, SelectionExamples) {
  const ModuleScores s{0.9, 0.2};
  EXPECT_EQ(fuse_selection(probs(0.5, 0.3, 0.2), s), 0.9);
  EXPECT_EQ(fuse_selection(probs(0.2, 0.5, 0.3), s), 0.2);
  // A tie for the maximum does not select the accomplice branch.
  EXPECT_EQ(fuse_selection(probs(0.4, 0.4, 0.2), s), 0.2);
  EXPECT_EQ(fuse_selection(probs(0.4, 0.2, 0.4), s), 0.2);
}

TEST(Fusion, RejectsInvalidInputs) {
  EXPECT_THROW(fuse_weighted(probs(0.5, 0.5, 0.5), {0.1, 0.2}), DataError);
  EXPECT_THROW(fuse_weighted(probs(1, 0, 0), {1.2, 0.2}), DataError);
  EXPECT_THROW(fuse_selection(probs(1, 0, 0), {0.5, std::nan("")}), DataError);
  EXPECT_THROW(parse_fusion_mode("max"), ConfigError);
  EXPECT_THROW(parse_bona_fide_route("bf_to_both"), ConfigError);
  EXPECT_EQ(parse_fusion_mode(to_string(FusionMode::Selection)), FusionMode::Selection);
  EXPECT_EQ(parse_bona_fide_route(to_string(BonaFideRoute::ToIda)), BonaFideRoute::ToIda);
}

TEST(Fusion, RandomizedProperties) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    const AttemptProbabilities p = random_probs(rng);
    const ModuleScores s{u(rng), u(rng)};
    const double lo = std::min(s.s_ida, s.s_id), hi = std::max(s.s_ida, s.s_id);
    for (BonaFideRoute route : {BonaFideRoute::ToId, BonaFideRoute::ToIda}) {
      const double w = fuse_weighted(p, s, route);
      ASSERT_GE(w, lo);
      ASSERT_LE(w, hi);
      const double ida_weight = route == BonaFideRoute::ToId ? p.accomplice : p.accomplice + p.bona_fide;
      ASSERT_NEAR(w, ida_weight * s.s_ida + (1.0 - ida_weight) * s.s_id, 1e-12);
      ASSERT_EQ(fuse(FusionMode::Weighted, route, p, s), w);

      // Non-decreasing in each module score.
      const ModuleScores up_id{s.s_ida, std::min(1.0, s.s_id + 0.1)};
      const ModuleScores up_ida{std::min(1.0, s.s_ida + 0.1), s.s_id};
      ASSERT_GE(fuse_weighted(p, up_id, route), w - 1e-15);
      ASSERT_GE(fuse_weighted(p, up_ida, route), w - 1e-15);
    }
    const double sel = fuse_selection(p, s);
    const bool accomplice_max = p.accomplice > p.bona_fide && p.accomplice > p.criminal;
    ASSERT_EQ(sel, accomplice_max ? s.s_ida : s.s_id);
    ASSERT_EQ(fuse(FusionMode::Selection, BonaFideRoute::ToIda, p, s), sel);
  }
}

TEST(Fusion, MadResultRecomputesFusedScore) {
  MADResult r;
  r.probabilities = probs(0.6, 0.1, 0.3);
  r.module_scores = {0.7, 0.4};
  r.fusion_mode = FusionMode::Weighted;
  r.routing = BonaFideRoute::ToIda;
  EXPECT_EQ(r.recompute(), fuse_weighted(r.probabilities, r.module_scores, BonaFideRoute::ToIda));
  r.fusion_mode = FusionMode::Selection;
  EXPECT_EQ(r.recompute(), 0.7);
}

TEST(ArtifactSourceTest, ResolvesCachedVectors) {
  EmbeddingCache cache;
  cache.insert("synthetic-artifact", "test/m0/doc", Eigen::Vector2d(0.25, -1.0));
  ArtifactSource src;
  src.cache = &cache;
  EXPECT_THROW(src.resolve("emb:test/m0/doc"), ModelError);
  src.extractor = std::make_shared<PassthroughExtractor>(2);
  EXPECT_TRUE(src.resolvable("emb:test/m0/doc"));
  EXPECT_FALSE(src.resolvable("emb:test/m1/doc"));
  EXPECT_FALSE(src.resolvable("/nonexistent/image.ppm"));
  EXPECT_EQ(src.resolve("emb:test/m0/doc"), Eigen::Vector2d(0.25, -1.0));
  EXPECT_THROW(src.resolve("emb:test/m1/doc"), DataError);
}

}  // namespace
}  // namespace acida
