#include "acida/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "acida/io_util.hpp"

namespace acida {

using nlohmann::json;

namespace {

std::size_t confusion_index(AttemptLabel label) {
  switch (label) {
    case AttemptLabel::Accomplice: return 0;
    case AttemptLabel::BonaFide: return 1;
    case AttemptLabel::Criminal: return 2;
  }
  return 1;
}

double parse_number(const std::string& text, const char* column, std::size_t line) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("scores line " + std::to_string(line) + ": bad " + column + " '" + text + "'");
  }
  return value;
}

ScoreSet<double> collect(const std::vector<ScoreRecord>& records, Scenario scenario) {
  ScoreSet<double> set;
  for (const ScoreRecord& r : records) {
    if (!in_scenario(r.label, scenario)) continue;
    (is_morph(r.label) ? set.morph : set.bona_fide).push_back(r.score);
  }
  return set;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_json(const ErrorSummary& s) {
  return {{"eer", s.eer}, {"b_0.1", s.b_010}, {"b_0.05", s.b_005}, {"b_0.01", s.b_001},
          {"wae", s.wae}};
}

std::string fixed(double v, int precision = 3) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(precision);
  out << v;
  return out.str();
}

MatrixXd rows_of(const std::vector<VectorXd>& vectors) {
  MatrixXd m(static_cast<Eigen::Index>(vectors.size()), vectors.front().size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
  }
  return m;
}

MatrixXd columns_of(const std::vector<VectorXd>& vectors, Eigen::Index dim) {
  MatrixXd m(dim, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = vectors[i];
  return m;
}

Eigen::RowVectorXd morph_targets(const std::vector<AttemptPair>& pairs) {
  Eigen::RowVectorXd t(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    t(static_cast<Eigen::Index>(i)) = is_morph(pairs[i].label) ? 1.0 : 0.0;
  }
  return t;
}

// Decoded document crops for the trainable extractor, one per distinct document.
void collect_document_crops(const std::vector<AttemptPair>& pairs, const ArtifactSource& artifacts,
                            std::vector<FaceCrop>& crops, std::vector<bool>& is_morph_doc) {
  std::map<std::string, bool> seen;
  for (const AttemptPair& p : pairs) {
    if (is_embedding_ref(p.document_ref)) {
      throw ConfigError("trainable artifact extractor needs image documents, got '" +
                        p.document_ref + "'");
    }
    if (!seen.emplace(p.document_ref, is_morph(p.label)).second) continue;
    crops.push_back(crop_face(decode_image(p.document_ref), p.document_ref, artifacts.crop,
                              artifacts.detector));
    is_morph_doc.push_back(is_morph(p.label));
  }
}

const EmbeddingCache& cache_or_empty(const EmbeddingCache* cache) {
  static const EmbeddingCache empty;
  return cache != nullptr ? *cache : empty;
}

}  // namespace

std::string_view to_string(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::Full: return "full";
    case AblationVariant::IdaOnly: return "ida_only";
    case AblationVariant::IdOnly: return "id_only";
    case AblationVariant::ArtifactOnly: return "artifact_only";
    case AblationVariant::OracleAc: return "oracle_ac";
    case AblationVariant::BfRouteIda: return "bf_route_ida";
  }
  return "full";
}

AblationVariant parse_variant(std::string_view text) {
  for (AblationVariant v : kAllVariants) {
    if (to_string(v) == text) return v;
  }
  throw ConfigError("unknown ablation '" + std::string(text) + "'");
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

PipelineBundle train_pipeline(const RunConfig& config, const ValidatedManifest& train,
                              const std::vector<AttemptPair>& validation,
                              const EmbeddingResolver& embeddings, const ArtifactSource& artifacts) {
  const auto start = std::chrono::steady_clock::now();
  PipelineBundle bundle;
  bundle.config = config;
  bundle.pipeline.mode = config.fusion_mode;
  bundle.pipeline.route = config.bona_fide_route;
  const std::vector<AttemptPair>& pairs = train.entries();
  if (pairs.empty()) throw DataError("training manifest is empty");

  auto extractor = make_extractor(config, cache_or_empty(artifacts.cache));
  if (extractor->trainable()) {
    TinyConvNet net = dynamic_cast<const TinyConvNet&>(*extractor);
    std::vector<FaceCrop> train_crops, val_crops;
    std::vector<bool> train_morph, val_morph;
    collect_document_crops(pairs, artifacts, train_crops, train_morph);
    collect_document_crops(validation, artifacts, val_crops, val_morph);
    try {
      const auto log = finetune_extractor(net, train_crops, train_morph, val_crops, val_morph,
                                          config.ida.finetune);
      bundle.summary.extractor_epochs = static_cast<int>(log.train_loss.size());
    } catch (const Error& e) {
      throw ModelError(std::string("ida extractor: ") + e.what());
    }
    extractor = make_extractor(config, cache_or_empty(artifacts.cache), &net);
  }
  bundle.extractor = extractor;
  ArtifactSource source = artifacts;
  source.extractor = extractor;

  auto resolve_all = [&](const std::vector<AttemptPair>& list) {
    std::vector<PairFeatures> out(list.size());
    parallel_for(list.size(), config.jobs,
                 [&](std::size_t i) { out[i] = resolve_pair(embeddings, source, list[i]); });
    return out;
  };
  const std::vector<PairFeatures> train_features = resolve_all(pairs);
  const std::vector<PairFeatures> val_features = resolve_all(validation);

  // AC
  std::vector<VectorXd> ac_rows;
  std::vector<AttemptLabel> labels;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ac_rows.push_back(ac_features(config.ac.input, train_features[i].doc, train_features[i].live));
    labels.push_back(pairs[i].label);
  }
  bundle.pipeline.ac = train_ac(rows_of(ac_rows), labels, config.ac);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    correct += classify_attempt(bundle.pipeline.ac, train_features[i].doc, train_features[i].live)
                       .argmax() == labels[i];
  }
  bundle.summary.ac_train_accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());

  // Id
  std::vector<IdExample> id_examples;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    id_examples.push_back({train_features[i].doc, train_features[i].live, is_morph(labels[i])});
  }
  bundle.pipeline.id = train_id(id_examples, config.id);

  // IdA
  auto ida_examples = [](const std::vector<AttemptPair>& list,
                         const std::vector<PairFeatures>& features) {
    std::vector<IdaExample> out;
    out.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
      out.push_back({ida_features(features[i].doc, features[i].live, features[i].artifact),
                     is_morph(list[i].label)});
    }
    return out;
  };
  bundle.pipeline.ida = train_ida(ida_examples(pairs, train_features),
                                  ida_examples(validation, val_features), config.ida.head,
                                  extractor->id());
  bundle.summary.ida_epochs = static_cast<int>(bundle.pipeline.ida.log.train_loss.size());
  bundle.summary.ida_best_epoch = bundle.pipeline.ida.log.best_epoch;
  if (bundle.summary.ida_best_epoch >= 0) {
    bundle.summary.ida_best_validation_loss =
        bundle.pipeline.ida.log.validation_loss[static_cast<std::size_t>(bundle.summary.ida_best_epoch)];
  }

  // Document-only head for the artifact_only ablation.
  auto artifacts_of = [&](const std::vector<PairFeatures>& features) {
    std::vector<VectorXd> out;
    for (const auto& f : features) out.push_back(f.artifact);
    return out;
  };
  bundle.artifact_head = Mlp(extractor->dimension(), {}, config.artifact_only.seed);
  const MatrixXd val_artifacts =
      validation.empty() ? MatrixXd(extractor->dimension(), 0)
                         : columns_of(artifacts_of(val_features), extractor->dimension());
  const FitLog head_log =
      fit_binary(bundle.artifact_head, columns_of(artifacts_of(train_features), extractor->dimension()),
                 morph_targets(pairs), val_artifacts,
                 validation.empty() ? Eigen::RowVectorXd() : morph_targets(validation),
                 config.artifact_only);
  bundle.summary.artifact_head_epochs = static_cast<int>(head_log.train_loss.size());

  bundle.summary.train_pairs = pairs.size();
  bundle.summary.validation_pairs = validation.size();
  bundle.summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return bundle;
}

double variant_score(AblationVariant variant, const PipelineBundle& bundle, const ScoreRecord& r) {
  const ModuleScores scores{r.s_ida, r.s_id};
  switch (variant) {
    case AblationVariant::Full: return r.fused;
    case AblationVariant::IdaOnly: return r.s_ida;
    case AblationVariant::IdOnly: return r.s_id;
    case AblationVariant::ArtifactOnly: return r.s_artifact;
    case AblationVariant::OracleAc:
      return fuse(bundle.pipeline.mode, bundle.pipeline.route,
                  AttemptProbabilities::one_hot(r.label), scores);
    case AblationVariant::BfRouteIda:
      return fuse(bundle.pipeline.mode, BonaFideRoute::ToIda, r.probabilities, scores);
  }
  return r.fused;
}

std::vector<ScoreRecord> score_pairs(const PipelineBundle& bundle,
                                     const std::vector<AttemptPair>& pairs,
                                     const EmbeddingResolver& embeddings,
                                     const ArtifactSource& artifacts, AblationVariant variant,
                                     int jobs) {
  ArtifactSource source = artifacts;
  source.extractor = bundle.extractor;
  std::vector<ScoreRecord> records(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    const PairFeatures features = resolve_pair(embeddings, source, pairs[i]);
    const MADResult result = score_attempt(bundle.pipeline, features, pairs[i]);
    ScoreRecord& r = records[i];
    r.pair_ref = result.pair_ref;
    r.label = result.label;
    r.cosine = result.cosine;
    r.probabilities = result.probabilities;
    r.s_ida = result.module_scores.s_ida;
    r.s_id = result.module_scores.s_id;
    r.s_artifact = bundle.artifact_head.predict_one(features.artifact);
    r.fused = result.fused_score;
    r.score = variant_score(variant, bundle, r);
  });
  return records;
}

std::string score_records_csv(const std::vector<ScoreRecord>& records) {
  std::string out =
      "pair_ref,label,cosine,p_accomplice,p_bona_fide,p_criminal,s_ida,s_id,s_artifact,fused,score\n";
  for (const ScoreRecord& r : records) {
    out += csv_escape(r.pair_ref) + "," + std::string(to_string(r.label));
    for (double v : {r.cosine, r.probabilities.accomplice, r.probabilities.bona_fide,
                     r.probabilities.criminal, r.s_ida, r.s_id, r.s_artifact, r.fused, r.score}) {
      out += "," + format_double(v);
    }
    out += "\n";
  }
  return out;
}

std::vector<ScoreRecord> parse_score_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("scores file is empty");
  const std::vector<std::string> header = split_csv_line(line);
  const std::vector<std::string> expected = {"pair_ref", "label",  "cosine",     "p_accomplice",
                                             "p_bona_fide", "p_criminal", "s_ida", "s_id",
                                             "s_artifact",  "fused",  "score"};
  if (header != expected) throw DataError("scores file has an unexpected header");
  std::vector<ScoreRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != expected.size()) {
      throw DataError("scores line " + std::to_string(line_no) + ": expected " +
                      std::to_string(expected.size()) + " fields");
    }
    ScoreRecord r;
    r.pair_ref = f[0];
    r.label = parse_label(f[1]);
    r.cosine = parse_number(f[2], "cosine", line_no);
    r.probabilities.accomplice = parse_number(f[3], "p_accomplice", line_no);
    r.probabilities.bona_fide = parse_number(f[4], "p_bona_fide", line_no);
    r.probabilities.criminal = parse_number(f[5], "p_criminal", line_no);
    r.s_ida = parse_number(f[6], "s_ida", line_no);
    r.s_id = parse_number(f[7], "s_id", line_no);
    r.s_artifact = parse_number(f[8], "s_artifact", line_no);
    r.fused = parse_number(f[9], "fused", line_no);
    r.score = parse_number(f[10], "score", line_no);
    records.push_back(std::move(r));
  }
  return records;
}

ConfusionReport confusion_report(const std::vector<ScoreRecord>& records) {
  ConfusionReport c;
  for (const ScoreRecord& r : records) {
    ++c.counts[confusion_index(r.label)][confusion_index(r.probabilities.argmax())];
  }
  std::size_t total = 0, diagonal = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    diagonal += c.counts[i][i];
    for (std::size_t j = 0; j < 3; ++j) total += c.counts[i][j];
  }
  c.accuracy = total == 0 ? 0.0 : static_cast<double>(diagonal) / static_cast<double>(total);
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t fp = 0, fn = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j == k) continue;
      fp += c.counts[j][k];
      fn += c.counts[k][j];
    }
    const double denom = static_cast<double>(2 * c.counts[k][k] + fp + fn);
    c.f1[k] = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.counts[k][k]) / denom;
  }
  c.macro_f1 = (c.f1[0] + c.f1[1] + c.f1[2]) / 3.0;
  return c;
}

std::vector<SimilarityBinRow> similarity_binned_analysis(const std::vector<ScoreRecord>& records,
                                                         int n_bins) {
  if (n_bins < 2) throw ConfigError("similarity analysis needs at least 2 bins");
  if (records.empty()) return {};
  auto [lo_it, hi_it] = std::minmax_element(
      records.begin(), records.end(),
      [](const ScoreRecord& a, const ScoreRecord& b) { return a.cosine < b.cosine; });
  const double lo = lo_it->cosine;
  const double hi = hi_it->cosine;
  const double width = (hi - lo) / n_bins;

  std::vector<SimilarityBinRow> rows(static_cast<std::size_t>(n_bins));
  std::vector<ScoreSet<double>> sets(rows.size());
  for (std::size_t b = 0; b < rows.size(); ++b) {
    rows[b].lo = lo + width * static_cast<double>(b);
    rows[b].hi = b + 1 == rows.size() ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (const ScoreRecord& r : records) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>(std::floor((r.cosine - lo) / width));
      b = std::min(b, rows.size() - 1);
    }
    switch (r.label) {
      case AttemptLabel::BonaFide: ++rows[b].bona_fide; break;
      case AttemptLabel::Criminal: ++rows[b].criminal; break;
      case AttemptLabel::Accomplice: ++rows[b].accomplice; break;
    }
    (is_morph(r.label) ? sets[b].morph : sets[b].bona_fide).push_back(r.score);
  }
  for (std::size_t b = 0; b < rows.size(); ++b) {
    SimilarityBinRow& row = rows[b];
    const std::size_t morphs = row.criminal + row.accomplice;
    if (morphs > 0) {
      row.criminal_fraction = static_cast<double>(row.criminal) / static_cast<double>(morphs);
      row.accomplice_fraction = static_cast<double>(row.accomplice) / static_cast<double>(morphs);
    }
    row.single_class = morphs == 0 || row.bona_fide == 0;
    if (!row.single_class) row.wae = summarize(sets[b]).wae;
  }
  return rows;
}

const ScenarioReport* MetricsReport::find(Scenario scenario) const {
  for (const auto& s : scenarios) {
    if (s.scenario == scenario) return &s;
  }
  return nullptr;
}

MetricsReport build_report(const std::vector<ScoreRecord>& all, const ReportOptions& options) {
  MetricsReport report;
  report.variant = options.variant;
  std::vector<ScoreRecord> records;
  for (const ScoreRecord& r : all) {
    if (!options.scenario || in_scenario(r.label, *options.scenario)) records.push_back(r);
  }
  const std::vector<Scenario> scenarios =
      options.scenario ? std::vector<Scenario>{*options.scenario}
                       : std::vector<Scenario>{Scenario::Accomplice, Scenario::Criminal, Scenario::Both};
  for (Scenario scenario : scenarios) {
    ScenarioReport s;
    s.scenario = scenario;
    const ScoreSet<double> set = collect(records, scenario);
    s.bona_fide = set.bona_fide.size();
    s.morph = set.morph.size();
    if (set.bona_fide.empty() || set.morph.empty()) {
      report.warnings.push_back(std::string(to_string(scenario)) +
                                " scenario is missing bona fide or morph scores");
    } else {
      s.summary = summarize(set);
      s.det = det_curve(set);
    }
    report.scenarios.push_back(std::move(s));
  }
  if (!records.empty()) {
    report.confusion = confusion_report(records);
    report.bins = similarity_binned_analysis(records, options.bins);
  }
  return report;
}

json report_json(const MetricsReport& report) {
  json scenarios = json::array();
  for (const ScenarioReport& s : report.scenarios) {
    json det = json::array();
    for (const DetPoint& p : s.det) det.push_back({p.apcer, p.bpcer});
    scenarios.push_back({{"scenario", std::string(to_string(s.scenario))},
                         {"bona_fide", s.bona_fide},
                         {"morph", s.morph},
                         {"metrics", s.summary ? summary_json(*s.summary) : json(nullptr)},
                         {"det", det}});
  }
  json confusion = nullptr;
  if (report.confusion) {
    const ConfusionReport& c = *report.confusion;
    confusion = {{"order", {"accomplice", "bonafide", "criminal"}},
                 {"counts", c.counts},
                 {"accuracy", c.accuracy},
                 {"f1", c.f1},
                 {"macro_f1", c.macro_f1}};
  }
  json bins = json::array();
  for (const SimilarityBinRow& b : report.bins) {
    bins.push_back({{"lo", b.lo},
                    {"hi", b.hi},
                    {"bona_fide", b.bona_fide},
                    {"criminal", b.criminal},
                    {"accomplice", b.accomplice},
                    {"criminal_fraction", optional_json(b.criminal_fraction)},
                    {"accomplice_fraction", optional_json(b.accomplice_fraction)},
                    {"wae", optional_json(b.wae)},
                    {"single_class", b.single_class}});
  }
  return {{"variant", std::string(to_string(report.variant))},
          {"scenarios", scenarios},
          {"attempt_classifier", confusion},
          {"similarity_bins", bins},
          {"config", report.config},
          {"seed", report.seed},
          {"provider", report.provider},
          {"seconds", report.seconds},
          {"warnings", report.warnings}};
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream out;
  out << "variant: " << to_string(report.variant) << "\n\n";
  out << "scenario      n_bf  n_morph    EER   B0.1  B0.05  B0.01    WAE\n";
  for (const ScenarioReport& s : report.scenarios) {
    std::string name(to_string(s.scenario));
    name.resize(12, ' ');
    out << name << std::string(6 - std::min<std::size_t>(6, std::to_string(s.bona_fide).size()), ' ')
        << s.bona_fide << std::string(9 - std::min<std::size_t>(9, std::to_string(s.morph).size()), ' ')
        << s.morph;
    if (s.summary) {
      for (double v : {s.summary->eer, s.summary->b_010, s.summary->b_005, s.summary->b_001,
                       s.summary->wae}) {
        out << "  " << fixed(v);
      }
    } else {
      out << "      -      -      -      -      -";
    }
    out << "\n";
  }
  if (report.confusion) {
    const ConfusionReport& c = *report.confusion;
    out << "\nattempt classifier (rows truth, cols predicted: A B C)\n";
    for (std::size_t i = 0; i < 3; ++i) {
      out << "  " << "ABC"[i];
      for (std::size_t j = 0; j < 3; ++j) out << " " << c.counts[i][j];
      out << "\n";
    }
    out << "  accuracy " << fixed(c.accuracy) << "  macro F1 " << fixed(c.macro_f1) << "\n";
  }
  if (!report.bins.empty()) {
    out << "\nsimilarity bins: lo hi n_bf n_crim n_acc acc_frac WAE\n";
    for (const SimilarityBinRow& b : report.bins) {
      out << "  " << fixed(b.lo) << " " << fixed(b.hi) << " " << b.bona_fide << " " << b.criminal
          << " " << b.accomplice << " "
          << (b.accomplice_fraction ? fixed(*b.accomplice_fraction) : std::string("-")) << " "
          << (b.wae ? fixed(*b.wae) : std::string("-")) << (b.single_class ? " (single class)" : "")
          << "\n";
    }
  }
  for (const std::string& w : report.warnings) out << "\nwarning: " << w;
  if (!report.warnings.empty()) out << "\n";
  return out.str();
}

AblationRun run_ablation(const PipelineBundle& bundle, const ValidatedManifest& test,
                         const EmbeddingResolver& embeddings, const ArtifactSource& artifacts,
                         const ReportOptions& options, int jobs) {
  const auto start = std::chrono::steady_clock::now();
  AblationRun run;
  run.records = score_pairs(bundle, test.entries(), embeddings, artifacts, options.variant, jobs);
  run.report = build_report(run.records, options);
  run.report.config = to_json(bundle.config);
  run.report.seed = bundle.config.seed;
  run.report.provider = embeddings.provider().id();
  run.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

void write_report_files(const MetricsReport& report, const std::vector<ScoreRecord>& records,
                        const std::filesystem::path& directory) {
  write_file_atomic(directory / "scores.csv", score_records_csv(records));
  for (const ScenarioReport& s : report.scenarios) {
    if (!s.summary) continue;
    const std::string name = "det_" + std::string(to_string(s.scenario));
    write_file_atomic(directory / (name + ".csv"), det_curve_csv(s.det));
    write_file_atomic(directory / (name + ".svg"),
                      det_curve_svg({{std::string(to_string(s.scenario)), s.det}}));
  }
  write_file_atomic(directory / "report.txt", report_table(report));
  write_file_atomic(directory / "report.json", report_json(report).dump(2) + "\n");
}

}  // namespace acida
