#include <gtest/gtest.h>

#include <atomic>

#include "acida/harness.hpp"
#include "acida/io_util.hpp"
#include "test_support.hpp"

namespace acida {
namespace {

ScoreRecord record(AttemptLabel label, double cosine, double score,
                   AttemptProbabilities p = AttemptProbabilities::one_hot(AttemptLabel::BonaFide)) {
  ScoreRecord r;
  r.pair_ref = std::string(to_string(label)) + std::to_string(cosine);
  r.label = label;
  r.cosine = cosine;
  r.probabilities = p;
  r.score = score;
  return r;
}

TEST(Variants, NamesRoundTrip) {
  for (AblationVariant v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("everything"), ConfigError);
}

TEST(ParallelFor, CoversEveryIndexOnceAndRethrows) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 6, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 37) throw DataError("boom");
                            }),
               DataError);
  int count = 0;
  parallel_for(0, 4, [&](std::size_t) { ++count; });
  EXPECT_EQ(count, 0);
}

TEST(Confusion, CountsAccuracyAndF1) {
  using L = AttemptLabel;
  const auto p = [](L l) { return AttemptProbabilities::one_hot(l); };
  // Truth -> prediction pairs.
  const std::vector<std::pair<L, L>> outcomes = {
      {L::Accomplice, L::Accomplice}, {L::Accomplice, L::BonaFide}, {L::BonaFide, L::BonaFide},
      {L::BonaFide, L::BonaFide},     {L::Criminal, L::Criminal},   {L::Criminal, L::Accomplice}};
  std::vector<ScoreRecord> records;
  for (const auto& [truth, pred] : outcomes) records.push_back(record(truth, 0.0, 0.0, p(pred)));
  const ConfusionReport c = confusion_report(records);
  EXPECT_EQ(c.counts[0][0], 1u);
  EXPECT_EQ(c.counts[0][1], 1u);
  EXPECT_EQ(c.counts[1][1], 2u);
  EXPECT_EQ(c.counts[2][0], 1u);
  EXPECT_DOUBLE_EQ(c.accuracy, 4.0 / 6.0);
  // Accomplice: tp 1, fp 1, fn 1. Bona fide: tp 2, fp 1, fn 0. Criminal: tp 1, fp 0, fn 1.
  EXPECT_DOUBLE_EQ(c.f1[0], 0.5);
  EXPECT_DOUBLE_EQ(c.f1[1], 0.8);
  EXPECT_DOUBLE_EQ(c.f1[2], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(c.macro_f1, (0.5 + 0.8 + 2.0 / 3.0) / 3.0);
}

TEST(SimilarityBins, EqualWidthAndFractions) {
  using L = AttemptLabel;
  std::vector<ScoreRecord> records = {
      record(L::Criminal, 0.0, 0.9),   record(L::Criminal, 0.1, 0.8), record(L::Accomplice, 0.15, 0.7),
      record(L::BonaFide, 0.2, 0.1),   record(L::Accomplice, 0.3, 0.6), record(L::BonaFide, 0.35, 0.2),
      record(L::Accomplice, 0.39, 0.3), record(L::BonaFide, 0.4, 0.4)};
  const auto bins = similarity_binned_analysis(records, 4);
  ASSERT_EQ(bins.size(), 4u);
  EXPECT_DOUBLE_EQ(bins[0].lo, 0.0);
  EXPECT_DOUBLE_EQ(bins[3].hi, 0.4);
  EXPECT_EQ(bins[0].criminal, 1u);
  EXPECT_EQ(bins[1].criminal, 1u);
  EXPECT_EQ(bins[1].accomplice, 1u);
  EXPECT_TRUE(bins[0].single_class);
  EXPECT_FALSE(bins[0].wae);
  EXPECT_DOUBLE_EQ(*bins[1].criminal_fraction, 0.5);
  EXPECT_EQ(bins[3].bona_fide, 2u);  // the maximum falls in the last bin
  EXPECT_EQ(bins[3].accomplice, 1u);
  EXPECT_DOUBLE_EQ(*bins[3].accomplice_fraction, 1.0);
  ASSERT_TRUE(bins[3].wae);
  std::size_t total = 0;
  for (const auto& b : bins) total += b.bona_fide + b.criminal + b.accomplice;
  EXPECT_EQ(total, records.size());
  EXPECT_THROW(similarity_binned_analysis(records, 1), ConfigError);
  EXPECT_TRUE(similarity_binned_analysis({}, 4).empty());
}

TEST(Report, MissingSideWarns) {
  using L = AttemptLabel;
  const std::vector<ScoreRecord> records = {record(L::BonaFide, 0.9, 0.1), record(L::Criminal, 0.2, 0.8),
                                            record(L::BonaFide, 0.8, 0.2)};
  const MetricsReport r = build_report(records, ReportOptions{});
  ASSERT_EQ(r.scenarios.size(), 3u);
  EXPECT_EQ(r.scenarios[0].scenario, Scenario::Accomplice);
  EXPECT_FALSE(r.scenarios[0].summary);
  EXPECT_EQ(r.warnings.size(), 1u);
  ASSERT_TRUE(r.find(Scenario::Criminal)->summary);
  EXPECT_EQ(r.find(Scenario::Criminal)->summary->eer, 0.0);
  EXPECT_TRUE(report_json(r)["scenarios"][0]["metrics"].is_null());
  EXPECT_NE(report_table(r).find("criminal"), std::string::npos);
}

TEST(ScoreCsv, RejectsMalformedFiles) {
  EXPECT_THROW(parse_score_records_csv(""), DataError);
  EXPECT_THROW(parse_score_records_csv("a,b\n"), DataError);
  const std::string header =
      "pair_ref,label,cosine,p_accomplice,p_bona_fide,p_criminal,s_ida,s_id,s_artifact,fused,score\n";
  EXPECT_THROW(parse_score_records_csv(header + "x,bonafide,0.1\n"), DataError);
  EXPECT_THROW(parse_score_records_csv(header + "x,bonafide,0.1,0,1,0,0.2,0.3,0.4,0.3,abc\n"), DataError);
  EXPECT_EQ(parse_score_records_csv(header + "x,bonafide,0.1,0,1,0,0.2,0.3,0.4,0.3,0.3\n").size(), 1u);
}

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    world_ = new testing::SyntheticWorld(testing::small_synthetic(11), testing::quick_run(11));
    bundle_ = new PipelineBundle(world_->train());
    test_ = new ValidatedManifest(world_->validated(world_->bench.test));
  }
  static void TearDownTestSuite() {
    delete test_;
    delete bundle_;
    delete world_;
  }
  static std::vector<ScoreRecord> score(AblationVariant v, int jobs = 1) {
    return score_pairs(*bundle_, test_->entries(), *world_->resolver, world_->artifacts, v, jobs);
  }

  static inline testing::SyntheticWorld* world_ = nullptr;
  static inline PipelineBundle* bundle_ = nullptr;
  static inline ValidatedManifest* test_ = nullptr;
};

TEST_F(PipelineTest, TrainingSummary) {
  const TrainingSummary& s = bundle_->summary;
  EXPECT_EQ(s.train_pairs, world_->bench.train.entries.size());
  EXPECT_EQ(s.validation_pairs, world_->bench.validation.entries.size());
  EXPECT_GT(s.ac_train_accuracy, 1.0 / 3.0);
  EXPECT_GT(s.ida_epochs, 0);
  EXPECT_GE(s.ida_best_epoch, 0);
  EXPECT_GT(s.artifact_head_epochs, 0);
  EXPECT_EQ(bundle_->extractor->id(), "passthrough");
}

TEST_F(PipelineTest, ParallelScoringMatchesSequential) {
  const auto a = score(AblationVariant::Full, 1);
  const auto b = score(AblationVariant::Full, 4);
  EXPECT_EQ(score_records_csv(a), score_records_csv(b));
}

TEST_F(PipelineTest, CsvRoundTripRecomputesBitExactly) {
  const auto records = score(AblationVariant::Full);
  const auto back = parse_score_records_csv(score_records_csv(records));
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].pair_ref, records[i].pair_ref);
    EXPECT_EQ(back[i].score, records[i].score);
    EXPECT_EQ(back[i].probabilities.accomplice, records[i].probabilities.accomplice);
    const double fused = fuse(bundle_->pipeline.mode, bundle_->pipeline.route, back[i].probabilities,
                              {back[i].s_ida, back[i].s_id});
    EXPECT_EQ(fused, records[i].fused);
    for (AblationVariant v : kAllVariants) {
      EXPECT_EQ(variant_score(v, *bundle_, back[i]), variant_score(v, *bundle_, records[i]));
    }
  }
  const auto r1 = build_report(records, ReportOptions{});
  const auto r2 = build_report(back, ReportOptions{});
  EXPECT_EQ(report_json(r1).dump(), report_json(r2).dump());
}

TEST_F(PipelineTest, BothScenarioIsTheUnion) {
  const auto records = score(AblationVariant::Full);
  const MetricsReport r = build_report(records, ReportOptions{});
  const auto counts = test_->counts();
  EXPECT_EQ(r.find(Scenario::Accomplice)->bona_fide, counts.bona_fide);
  EXPECT_EQ(r.find(Scenario::Accomplice)->morph, counts.accomplice);
  EXPECT_EQ(r.find(Scenario::Criminal)->morph, counts.criminal);
  EXPECT_EQ(r.find(Scenario::Both)->morph, counts.accomplice + counts.criminal);
  EXPECT_EQ(r.find(Scenario::Both)->bona_fide, counts.bona_fide);
  EXPECT_TRUE(r.warnings.empty());

  ReportOptions only;
  only.scenario = Scenario::Criminal;
  const MetricsReport c = build_report(records, only);
  ASSERT_EQ(c.scenarios.size(), 1u);
  EXPECT_EQ(c.scenarios[0].summary->eer, r.find(Scenario::Criminal)->summary->eer);
  EXPECT_EQ(c.confusion->counts[0][0] + c.confusion->counts[0][1] + c.confusion->counts[0][2], 0u);
}

TEST_F(PipelineTest, OracleRoutingReducesToTheMatchingDetector) {
  const auto oracle = score(AblationVariant::OracleAc);
  const auto id_only = score(AblationVariant::IdOnly);
  const auto ida_only = score(AblationVariant::IdaOnly);
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    if (oracle[i].label == AttemptLabel::Accomplice) {
      EXPECT_EQ(oracle[i].score, ida_only[i].score);
    } else {
      EXPECT_EQ(oracle[i].score, id_only[i].score);
    }
  }
  ReportOptions crim;
  crim.scenario = Scenario::Criminal;
  EXPECT_EQ(build_report(oracle, crim).scenarios[0].summary->wae,
            build_report(id_only, crim).scenarios[0].summary->wae);
}

TEST_F(PipelineTest, VariantScoresStayInUnitInterval) {
  for (AblationVariant v : kAllVariants) {
    for (const ScoreRecord& r : score(v)) {
      ASSERT_GE(r.score, 0.0);
      ASSERT_LE(r.score, 1.0);
    }
  }
}

TEST_F(PipelineTest, ReportFiles) {
  testing::TempDir dir("report");
  ReportOptions opts;
  const AblationRun run = run_ablation(*bundle_, *test_, *world_->resolver, world_->artifacts, opts, 2);
  write_report_files(run.report, run.records, dir.path());
  for (const char* name : {"report.json", "report.txt", "scores.csv", "det_accomplice.csv", "det_criminal.svg",
                           "det_both.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / name)) << name;
  }
  const auto json = nlohmann::json::parse(read_file(dir.path() / "report.json"));
  EXPECT_EQ(json["variant"], "full");
  EXPECT_EQ(json["similarity_bins"].size(), 10u);
  EXPECT_EQ(parse_score_records_csv(read_file(dir.path() / "scores.csv")).size(), test_->entries().size());
}

}  // namespace
}  // namespace acida
