#include "acida/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "acida/io_util.hpp"

namespace acida {

using nlohmann::json;

namespace {

RefResolver resolver_for(const EmbeddingResolver& embeddings) {
  return [&embeddings](const std::string& ref) { return embeddings.resolvable(ref); };
}

ArtifactSource artifact_source(const RunConfig& config, const EmbeddingCache& cache) {
  ArtifactSource source;
  source.cache = &cache;
  source.provider_id = config.provider.artifact_provider;
  source.crop.passthrough = config.provider.crop_passthrough;
  return source;
}

void save_cache_if_grown(const EmbeddingCache& cache, std::size_t before) {
  if (cache.size() != before && !cache.directory().empty()) cache.save();
}

std::string plot_label(const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  if (stem == "scores" && path.has_parent_path() && !path.parent_path().filename().empty()) {
    return path.parent_path().filename().string();
  }
  return stem;
}

std::string counts_line(const std::string& name, const DatasetManifest& m) {
  LabelCounts c;
  for (const auto& p : m.entries) {
    switch (p.label) {
      case AttemptLabel::BonaFide: ++c.bona_fide; break;
      case AttemptLabel::Criminal: ++c.criminal; break;
      case AttemptLabel::Accomplice: ++c.accomplice; break;
    }
  }
  return name + ": " + std::to_string(c.total()) + " pairs (" + std::to_string(c.bona_fide) +
         " bona fide, " + std::to_string(c.criminal) + " criminal, " +
         std::to_string(c.accomplice) + " accomplice)\n";
}

}  // namespace

std::filesystem::path resolve_cache_dir(const std::optional<std::filesystem::path>& flag,
                                        const std::string& configured,
                                        const std::filesystem::path& manifest) {
  if (flag) return *flag;
  const std::filesystem::path fallback =
      configured.empty() ? manifest.parent_path() / "cache" : std::filesystem::path(configured);
  return EmbeddingCache::default_directory(fallback);
}

PipelineBundle cmd_train(const TrainOptions& options, std::ostream& log) {
  json doc = json::object();
  if (options.config) {
    try {
      doc = json::parse(read_file(*options.config));
    } catch (const json::parse_error& e) {
      throw ConfigError("cannot parse config " + options.config->string() + ": " + e.what());
    }
  }
  for (const std::string& o : options.overrides) apply_override(doc, o);
  if (options.seed) doc["seed"] = *options.seed;
  if (options.jobs) doc["harness"]["jobs"] = *options.jobs;
  const RunConfig config = config_from_json(doc);

  EmbeddingCache cache(resolve_cache_dir(options.cache_dir, config.provider.cache_dir, options.train));
  const std::size_t cache_before = cache.size();
  const auto provider = make_provider(config.provider.spec, config.provider.dimension, config.seed);
  EmbeddingResolver embeddings(*provider, cache, CropConfig{config.provider.crop_passthrough});
  const ArtifactSource artifacts = artifact_source(config, cache);

  const ValidatedManifest train =
      validate_manifest(read_manifest(options.train, SplitTag::Train), resolver_for(embeddings));
  std::vector<AttemptPair> validation;
  if (options.validation) {
    DatasetManifest m = read_manifest(*options.validation, SplitTag::Validation);
    validation = validate_manifest(std::move(m), resolver_for(embeddings)).entries();
  }

  PipelineBundle bundle = train_pipeline(config, train, validation, embeddings, artifacts);
  save_bundle(bundle, options.bundle);
  save_cache_if_grown(cache, cache_before);

  const TrainingSummary& s = bundle.summary;
  log << "trained on " << s.train_pairs << " pairs (" << s.validation_pairs << " validation)\n"
      << "  ac: train accuracy " << format_double(s.ac_train_accuracy) << "\n"
      << "  ida: " << s.ida_epochs << " epochs, best epoch " << s.ida_best_epoch
      << ", validation loss " << format_double(s.ida_best_validation_loss) << "\n";
  if (s.extractor_epochs > 0) log << "  extractor: " << s.extractor_epochs << " epochs\n";
  log << "  time " << format_double(s.seconds) << " s\n"
      << "bundle written to " << options.bundle.string() << "\n";
  return bundle;
}

MetricsReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log) {
  ReportOptions report_options;
  report_options.variant = parse_variant(options.ablation);
  if (options.scenario) report_options.scenario = parse_scenario(*options.scenario);

  // The bundle's config decides the provider and cache layout; its extractor
  // may need the cache, so the manifest is loaded first to locate it.
  json manifest;
  try {
    manifest = json::parse(read_file(options.bundle / "manifest.json"));
  } catch (const json::exception& e) {
    throw ModelError("bundle manifest unreadable: " + std::string(e.what()));
  } catch (const DataError& e) {
    throw ModelError(std::string("bundle: ") + e.what());
  }
  const std::string configured_cache =
      manifest.contains("config") ? manifest["config"]["provider"].value("cache_dir", "") : "";
  EmbeddingCache cache(resolve_cache_dir(options.cache_dir, configured_cache, options.test));
  const std::size_t cache_before = cache.size();
  const PipelineBundle bundle = load_bundle(options.bundle, cache);
  const RunConfig& config = bundle.config;
  report_options.bins = options.bins.value_or(config.bins);
  const int jobs = options.jobs.value_or(config.jobs);
  if (jobs < 1) throw ConfigError("--jobs must be at least 1");

  const auto provider = make_provider(config.provider.spec, config.provider.dimension, config.seed);
  EmbeddingResolver embeddings(*provider, cache, CropConfig{config.provider.crop_passthrough});
  const ArtifactSource artifacts = artifact_source(config, cache);
  const ValidatedManifest test =
      validate_manifest(read_manifest(options.test, SplitTag::Test), resolver_for(embeddings));

  AblationRun run = run_ablation(bundle, test, embeddings, artifacts, report_options, jobs);
  write_report_files(run.report, run.records, options.out);
  save_cache_if_grown(cache, cache_before);
  log << report_table(run.report) << "report written to " << options.out.string() << "\n";
  return run.report;
}

SyntheticBenchmark cmd_gen_synthetic(const GenSyntheticOptions& options, std::ostream& log) {
  const SyntheticConfig& config = options.config;
  config.validate();
  // Regeneration replaces any previous store rather than merging into it.
  EmbeddingCache cache;
  SyntheticBenchmark bench = gen_benchmark(config, cache);
  write_manifest(bench.train, options.out / "train.csv");
  write_manifest(bench.validation, options.out / "validation.csv");
  write_manifest(bench.test, options.out / "test.csv");
  cache.save(options.out / "cache");

  const json quick_start = {
      {"seed", config.seed},
      {"provider",
       {{"spec", "synthetic"},
        {"dimension", config.dim},
        {"artifact_provider", config.artifact_provider_id}}},
      {"ida", {{"extractor", "passthrough"}, {"artifact_dim", config.artifact_dim}}},
  };
  write_file_atomic(options.out / "config.json", quick_start.dump(2) + "\n");

  log << counts_line("train", bench.train) << counts_line("validation", bench.validation)
      << counts_line("test", bench.test);
  log << "test cos(doc, live) bins: lo hi bona_fide criminal accomplice\n";
  for (const SimilarityBin& b : bench.test_similarity_bins) {
    log << "  " << format_double(b.lo) << " " << format_double(b.hi) << " " << b.bona_fide << " "
        << b.criminal << " " << b.accomplice << "\n";
  }
  log << "written to " << options.out.string() << "\n";
  return bench;
}

MetricsReport cmd_report(const ReportOptionsCli& options, std::ostream& log) {
  ReportOptions report_options;
  report_options.variant = parse_variant(options.variant);
  report_options.bins = options.bins;
  if (options.scenario) report_options.scenario = parse_scenario(*options.scenario);
  const auto records = parse_score_records_csv(read_file(options.scores));
  MetricsReport report = build_report(records, report_options);
  write_file_atomic(options.out / "report.txt", report_table(report));
  write_file_atomic(options.out / "report.json", report_json(report).dump(2) + "\n");
  log << report_table(report);
  return report;
}

void cmd_plot_det(const PlotDetOptions& options, std::ostream& log) {
  if (options.inputs.empty()) throw ConfigError("plot-det needs at least one score file");
  const Scenario scenario = parse_scenario(options.scenario);
  std::vector<std::pair<std::string, DetCurve>> curves;
  for (const auto& path : options.inputs) {
    const std::string text = read_file(path);
    ScoreSet<double> set;
    if (text.starts_with("pair_ref,")) {
      for (const ScoreRecord& r : parse_score_records_csv(text)) {
        if (in_scenario(r.label, scenario)) {
          (is_morph(r.label) ? set.morph : set.bona_fide).push_back(r.score);
        }
      }
    } else {
      set = read_score_csv(path);
    }
    curves.emplace_back(plot_label(path), det_curve(set));
  }
  write_file_atomic(options.out, det_curve_svg(curves));
  log << "DET plot written to " << options.out.string() << "\n";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differential morphing attack detection toolkit"};
  app.require_subcommand(1);

  TrainOptions train;
  std::string train_config, train_validation, train_cache;
  std::uint64_t train_seed = 0;
  int train_jobs = 1;
  auto* train_cmd = app.add_subcommand("train", "Train AC, Id and IdA and write a pipeline bundle");
  auto* train_config_opt = train_cmd->add_option("--config", train_config, "JSON run config");
  train_cmd->add_option("--train", train.train, "training manifest (.csv or .jsonl)")->required();
  auto* train_val_opt = train_cmd->add_option("--val", train_validation, "validation manifest");
  train_cmd->add_option("--bundle", train.bundle, "output bundle directory")->required();
  train_cmd->add_option("--set", train.overrides, "config override key=value (repeatable)");
  auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "overrides the config seed");
  auto* train_jobs_opt = train_cmd->add_option("--jobs", train_jobs, "worker threads");
  auto* train_cache_opt = train_cmd->add_option("--cache-dir", train_cache, "embedding cache directory");

  EvaluateOptions eval;
  std::string eval_scenario, eval_cache;
  int eval_bins = 10, eval_jobs = 1;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a test manifest and write reports");
  eval_cmd->add_option("--bundle", eval.bundle, "pipeline bundle directory")->required();
  eval_cmd->add_option("--test", eval.test, "test manifest")->required();
  eval_cmd->add_option("--out", eval.out, "report output directory")->required();
  auto* eval_scenario_opt =
      eval_cmd->add_option("--scenario", eval_scenario, "accomplice | criminal | both");
  eval_cmd->add_option("--ablation", eval.ablation,
                       "full | ida_only | id_only | artifact_only | oracle_ac | bf_route_ida");
  auto* eval_bins_opt = eval_cmd->add_option("--bins", eval_bins, "similarity bins");
  auto* eval_jobs_opt = eval_cmd->add_option("--jobs", eval_jobs, "worker threads");
  auto* eval_cache_opt = eval_cmd->add_option("--cache-dir", eval_cache, "embedding cache directory");

  GenSyntheticOptions gen;
  std::vector<double> gen_alphas;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate a synthetic embedding benchmark");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--seed", gen.config.seed, "generator seed");
  auto* gen_alpha_opt = gen_cmd->add_option("--alpha", gen_alphas, "morphing factor (repeatable)");
  gen_cmd->add_option("--identities", gen.config.n_identities, "number of identities");
  gen_cmd->add_option("--dim", gen.config.dim, "identity embedding dimension");
  gen_cmd->add_option("--artifact-dim", gen.config.artifact_dim, "artifact vector dimension");
  gen_cmd->add_option("--live-noise", gen.config.live_noise_sigma, "capture noise scale");
  gen_cmd->add_option("--artifact-strength", gen.config.artifact_strength, "artifact pattern scale");
  gen_cmd->add_option("--artifact-noise", gen.config.artifact_noise_sigma, "artifact noise sigma");

  ReportOptionsCli report;
  std::string report_scenario;
  auto* report_cmd = app.add_subcommand("report", "Recompute metrics from a raw scores CSV");
  report_cmd->add_option("--scores", report.scores, "scores.csv written by evaluate")->required();
  report_cmd->add_option("--out", report.out, "output directory")->required();
  auto* report_scenario_opt = report_cmd->add_option("--scenario", report_scenario, "scenario filter");
  report_cmd->add_option("--variant", report.variant, "variant name recorded in the report");
  report_cmd->add_option("--bins", report.bins, "similarity bins");

  PlotDetOptions plot;
  auto* plot_cmd = app.add_subcommand("plot-det", "Draw DET curves from score files as SVG");
  plot_cmd->add_option("inputs", plot.inputs, "score CSV files")->required();
  plot_cmd->add_option("--out", plot.out, "output SVG path")->required();
  plot_cmd->add_option("--scenario", plot.scenario, "scenario for raw score files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) {
      if (*train_config_opt) train.config = train_config;
      if (*train_val_opt) train.validation = train_validation;
      if (*train_seed_opt) train.seed = train_seed;
      if (*train_jobs_opt) train.jobs = train_jobs;
      if (*train_cache_opt) train.cache_dir = train_cache;
      cmd_train(train, out);
    } else if (*eval_cmd) {
      if (*eval_scenario_opt) eval.scenario = eval_scenario;
      if (*eval_bins_opt) eval.bins = eval_bins;
      if (*eval_jobs_opt) eval.jobs = eval_jobs;
      if (*eval_cache_opt) eval.cache_dir = eval_cache;
      cmd_evaluate(eval, out);
    } else if (*gen_cmd) {
      if (*gen_alpha_opt) gen.config.alphas = gen_alphas;
      cmd_gen_synthetic(gen, out);
    } else if (*report_cmd) {
      if (*report_scenario_opt) report.scenario = report_scenario;
      cmd_report(report, out);
    } else if (*plot_cmd) {
      cmd_plot_det(plot, out);
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.category()) << "): " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (data): " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::Data);
  }
  return 0;
}

}  // namespace acida
