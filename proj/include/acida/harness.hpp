#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "acida/bundle.hpp"
#include "acida/manifest.hpp"
#include "acida/metrics.hpp"

namespace acida {

enum class AblationVariant { Full, IdaOnly, IdOnly, ArtifactOnly, OracleAc, BfRouteIda };

inline constexpr std::array<AblationVariant, 6> kAllVariants = {
    AblationVariant::Full,         AblationVariant::IdaOnly,  AblationVariant::IdOnly,
    AblationVariant::ArtifactOnly, AblationVariant::OracleAc, AblationVariant::BfRouteIda};

std::string_view to_string(AblationVariant variant);
AblationVariant parse_variant(std::string_view text);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Trains AC, Id and IdA in sequence (plus the artifact extractor when it is
// trainable, and the document-only head of the artifact_only ablation).
// `validation` may be empty.
PipelineBundle train_pipeline(const RunConfig& config, const ValidatedManifest& train,
                              const std::vector<AttemptPair>& validation,
                              const EmbeddingResolver& embeddings, const ArtifactSource& artifacts);

// One row of the raw score file.
struct ScoreRecord {
  std::string pair_ref;
  AttemptLabel label = AttemptLabel::BonaFide;
  double cosine = 0.0;
  AttemptProbabilities probabilities;  // AC prediction
  double s_ida = 0.0;
  double s_id = 0.0;
  double s_artifact = 0.0;
  double fused = 0.0;  // configured fusion over the predicted probabilities
  double score = 0.0;  // output of the evaluated variant
};

double variant_score(AblationVariant variant, const PipelineBundle& bundle, const ScoreRecord& r);

// Scores every pair once. Records keep manifest order regardless of `jobs`.
std::vector<ScoreRecord> score_pairs(const PipelineBundle& bundle,
                                     const std::vector<AttemptPair>& pairs,
                                     const EmbeddingResolver& embeddings,
                                     const ArtifactSource& artifacts, AblationVariant variant,
                                     int jobs = 1);

std::string score_records_csv(const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> parse_score_records_csv(const std::string& text);

struct ScenarioReport {
  Scenario scenario = Scenario::Both;
  std::size_t bona_fide = 0;
  std::size_t morph = 0;
  std::optional<ErrorSummary> summary;  // empty when one side has no scores
  DetCurve det;
};

// Rows are ground truth, columns predictions, both ordered accomplice, bona fide, criminal.
struct ConfusionReport {
  std::array<std::array<std::size_t, 3>, 3> counts{};
  double accuracy = 0.0;
  std::array<double, 3> f1{};
  double macro_f1 = 0.0;
};

ConfusionReport confusion_report(const std::vector<ScoreRecord>& records);

struct SimilarityBinRow {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t bona_fide = 0;
  std::size_t criminal = 0;
  std::size_t accomplice = 0;
  std::optional<double> criminal_fraction;  // of the morph pairs in the bin
  std::optional<double> accomplice_fraction;
  std::optional<double> wae;  // empty when the bin lacks one of the two classes
  bool single_class = false;
};

// Equal-width bins over the observed cos(doc, live) range.
std::vector<SimilarityBinRow> similarity_binned_analysis(const std::vector<ScoreRecord>& records,
                                                         int n_bins);

struct MetricsReport {
  AblationVariant variant = AblationVariant::Full;
  std::vector<ScenarioReport> scenarios;
  std::optional<ConfusionReport> confusion;
  std::vector<SimilarityBinRow> bins;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string provider;
  double seconds = 0.0;
  std::vector<std::string> warnings;

  const ScenarioReport* find(Scenario scenario) const;
};

struct ReportOptions {
  AblationVariant variant = AblationVariant::Full;
  std::optional<Scenario> scenario;  // restrict to one scenario
  int bins = 10;
};

// Everything in the report derives from the records alone.
MetricsReport build_report(const std::vector<ScoreRecord>& records, const ReportOptions& options);

nlohmann::json report_json(const MetricsReport& report);
std::string report_table(const MetricsReport& report);

// Scores the test pairs under one ablation variant and builds its report.
struct AblationRun {
  std::vector<ScoreRecord> records;
  MetricsReport report;
};

AblationRun run_ablation(const PipelineBundle& bundle, const ValidatedManifest& test,
                         const EmbeddingResolver& embeddings, const ArtifactSource& artifacts,
                         const ReportOptions& options, int jobs = 1);

// report.json, report.txt, scores.csv and det_<scenario>.{csv,svg} under `directory`.
void write_report_files(const MetricsReport& report, const std::vector<ScoreRecord>& records,
                        const std::filesystem::path& directory);

}  // namespace acida
