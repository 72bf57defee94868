#include <gtest/gtest.h>

#include <map>
#include <set>

#include "acida/synthetic.hpp"
#include "test_support.hpp"

namespace acida {
namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

TEST(Identities, UnitNormAndDeterministic) {
  SyntheticConfig c;
  c.dim = 32;
  c.n_identities = 20;
  c.seed = 4;
  const auto a = gen_identities(c);
  const auto b = gen_identities(c);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].norm(), 1.0, 1e-12);
    EXPECT_EQ(a[i], b[i]);
  }
  c.seed = 5;
  EXPECT_NE(gen_identities(c)[0], a[0]);
}

TEST(Identities, NearlyOrthogonalInHighDimension) {
  SyntheticConfig c;
  c.dim = 512;
  c.n_identities = 100;
  c.seed = 1;
  const auto ids = gen_identities(c);
  double worst = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) worst = std::max(worst, std::abs(ids[i].dot(ids[j])));
  }
  EXPECT_LT(worst, 0.4);
}

TEST(Attempts, NoiselessGeometry) {
  SyntheticConfig c;
  c.dim = 8;
  c.artifact_dim = 4;
  c.live_noise_sigma = 0.0;
  c.artifact_noise_sigma = 0.0;
  VectorXd crim = VectorXd::Zero(8), acc = VectorXd::Zero(8), pattern = VectorXd::Zero(4);
  crim(0) = 1.0;
  acc(1) = 1.0;
  pattern(2) = 1.0;
  std::mt19937_64 rng(0);

  const auto bf = gen_attempt(crim, acc, 0.0, AttemptLabel::BonaFide, pattern, c, rng);
  EXPECT_EQ(bf.doc_embedding, crim);
  EXPECT_EQ(bf.live_embedding, crim);
  EXPECT_EQ(bf.doc_artifact, VectorXd::Zero(4));

  const auto m = gen_attempt(crim, acc, 0.3, AttemptLabel::Criminal, pattern, c, rng);
  VectorXd expected = 0.3 * crim + 0.7 * acc;
  expected.normalize();
  EXPECT_TRUE(m.doc_embedding.isApprox(expected, 1e-14));
  EXPECT_EQ(m.live_embedding, crim);
  EXPECT_EQ(m.doc_artifact, c.artifact_strength * pattern);
  // With alpha = 0.3 the document leans toward the accomplice.
  EXPECT_GT(m.doc_embedding.dot(acc), m.doc_embedding.dot(crim));

  const auto a = gen_attempt(crim, acc, 0.3, AttemptLabel::Accomplice, pattern, c, rng);
  EXPECT_EQ(a.live_embedding, acc);
  EXPECT_THROW(gen_attempt(crim, crim, 0.3, AttemptLabel::Criminal, pattern, c, rng), DataError);
  EXPECT_THROW(gen_attempt(crim, acc, 1.5, AttemptLabel::Criminal, pattern, c, rng), DataError);
}

TEST(Config, RejectsBadSettings) {
  SyntheticConfig c;
  c.alphas = {};
  EXPECT_THROW(c.validate(), ConfigError);
  c = SyntheticConfig{};
  c.alphas = {1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = SyntheticConfig{};
  c.n_identities = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SyntheticConfig{};
  c.live_noise_sigma = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SyntheticConfig{};
  c.n_identities = 5;
  EmbeddingCache cache;
  EXPECT_THROW(gen_benchmark(c, cache), ConfigError);
}

class BenchmarkTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    config_ = new SyntheticConfig;
    config_->seed = 3;
    cache_ = new EmbeddingCache;
    bench_ = new SyntheticBenchmark(gen_benchmark(*config_, *cache_));
  }
  static void TearDownTestSuite() {
    delete bench_;
    delete cache_;
    delete config_;
  }

  static std::set<std::string> subjects(const DatasetManifest& m) {
    std::set<std::string> out;
    for (const AttemptPair& p : m.entries) {
      if (!p.holder.empty()) out.insert(p.holder);
      if (p.morph_meta) {
        out.insert(p.morph_meta->subject_ids.first);
        out.insert(p.morph_meta->subject_ids.second);
      }
    }
    return out;
  }

  static inline SyntheticConfig* config_ = nullptr;
  static inline EmbeddingCache* cache_ = nullptr;
  static inline SyntheticBenchmark* bench_ = nullptr;
};

TEST_F(BenchmarkTest, DefaultSizes) {
  EXPECT_EQ(bench_->train.entries.size(), 1440u);
  EXPECT_EQ(bench_->validation.entries.size(), 480u);
  EXPECT_EQ(bench_->test.entries.size(), 480u);
}

TEST_F(BenchmarkTest, SplitsAreSubjectDisjoint) {
  const auto tr = subjects(bench_->train), va = subjects(bench_->validation), te = subjects(bench_->test);
  for (const auto& s : te) {
    EXPECT_FALSE(tr.contains(s));
    EXPECT_FALSE(va.contains(s));
  }
  for (const auto& s : va) EXPECT_FALSE(tr.contains(s));
  EXPECT_TRUE(subjects_disjoint(bench_->train, bench_->test));
}

TEST_F(BenchmarkTest, EachMorphDocumentAppearsInOneCriminalAndOneAccompliceAttempt) {
  for (const DatasetManifest* m : {&bench_->train, &bench_->validation, &bench_->test}) {
    std::map<std::string, std::vector<AttemptLabel>> docs;
    for (const AttemptPair& p : m->entries) {
      if (is_morph(p.label)) docs[p.document_ref].push_back(p.label);
    }
    for (const auto& [doc, labels] : docs) {
      ASSERT_EQ(labels.size(), 2u) << doc;
      EXPECT_NE(labels[0], labels[1]);
    }
  }
}

TEST_F(BenchmarkTest, ManifestValidates) {
  const auto provider = make_provider("synthetic", config_->dim, 0);
  EmbeddingResolver r(*provider, *cache_);
  const auto v = validate_manifest(bench_->test, [&](const std::string& ref) { return r.resolvable(ref); });
  EXPECT_EQ(v.counts().bona_fide, 160u);
  EXPECT_EQ(v.counts().criminal, 160u);
  EXPECT_EQ(v.counts().accomplice, 160u);
}

TEST_F(BenchmarkTest, AccompliceAttemptsLookMoreGenuine) {
  std::map<AttemptLabel, std::vector<double>> cos;
  for (const AttemptPair& p : bench_->test.entries) {
    const VectorXd doc = *cache_->find("synthetic", std::string(embedding_key(p.document_ref)));
    const VectorXd live = *cache_->find("synthetic", std::string(embedding_key(p.live_ref)));
    cos[p.label].push_back(cosine_similarity(doc, live));
  }
  EXPECT_GT(mean(cos[AttemptLabel::Accomplice]), mean(cos[AttemptLabel::Criminal]));
  EXPECT_GT(mean(cos[AttemptLabel::BonaFide]), mean(cos[AttemptLabel::Criminal]));
}

TEST_F(BenchmarkTest, ArtifactChannelSeparatesMorphs) {
  std::vector<double> bona, morph;
  for (const AttemptPair& p : bench_->test.entries) {
    const VectorXd art = *cache_->find("synthetic-artifact", std::string(embedding_key(p.document_ref)));
    (is_morph(p.label) ? morph : bona).push_back(art.dot(bench_->artifact_pattern));
  }
  const double pooled = std::sqrt(0.5 * (stddev(bona) * stddev(bona) + stddev(morph) * stddev(morph)));
  EXPECT_GT((mean(morph) - mean(bona)) / pooled, 3.0);
}

TEST_F(BenchmarkTest, SimilarityBinsCoverTestSplit) {
  std::size_t total = 0;
  for (const auto& b : bench_->test_similarity_bins) {
    total += b.bona_fide + b.criminal + b.accomplice;
    EXPECT_LE(b.lo, b.hi);
  }
  EXPECT_EQ(bench_->test_similarity_bins.size(), 10u);
  EXPECT_EQ(total, bench_->test.entries.size());
}

TEST(Benchmark, DeterministicPerSeed) {
  SyntheticConfig c = testing::small_synthetic(7);
  EmbeddingCache a, b;
  const auto x = gen_benchmark(c, a);
  const auto y = gen_benchmark(c, b);
  ASSERT_EQ(x.test.entries.size(), y.test.entries.size());
  for (const AttemptPair& p : x.test.entries) {
    EXPECT_EQ(*a.find("synthetic", std::string(embedding_key(p.document_ref))),
              *b.find("synthetic", std::string(embedding_key(p.document_ref))));
  }
  EXPECT_EQ(x.artifact_pattern, y.artifact_pattern);
}

TEST(Benchmark, AlphaListControlsMorphCount) {
  SyntheticConfig c = testing::small_synthetic(2);
  c.alphas = {0.3};
  EmbeddingCache cache;
  const auto one = gen_benchmark(c, cache);
  c.alphas = {0.3, 0.5};
  EmbeddingCache cache2;
  const auto two = gen_benchmark(c, cache2);
  std::size_t morphs_one = 0, morphs_two = 0;
  for (const auto& p : one.train.entries) morphs_one += is_morph(p.label);
  for (const auto& p : two.train.entries) morphs_two += is_morph(p.label);
  EXPECT_EQ(2 * morphs_one, morphs_two);
  for (const auto& p : one.train.entries) {
    if (p.morph_meta) EXPECT_EQ(p.morph_meta->alpha, 0.3);
  }
}

}  // namespace
}  // namespace acida
