#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "acida/harness.hpp"
#include "acida/synthetic.hpp"

namespace acida {

struct TrainOptions {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;  // "key=value"
  std::filesystem::path train;
  std::optional<std::filesystem::path> validation;
  std::filesystem::path bundle;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

struct EvaluateOptions {
  std::filesystem::path bundle;
  std::filesystem::path test;
  std::filesystem::path out;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::string> scenario;
  std::string ablation = "full";
  std::optional<int> bins;
  std::optional<int> jobs;
};

struct GenSyntheticOptions {
  std::filesystem::path out;
  SyntheticConfig config;
};

struct ReportOptionsCli {
  std::filesystem::path scores;
  std::filesystem::path out;
  std::optional<std::string> scenario;
  std::string variant = "full";
  int bins = 10;
};

struct PlotDetOptions {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out;
  std::string scenario = "both";
};

// Cache directory: explicit flag, then ACIDA_CACHE_DIR, then the config key,
// then <manifest directory>/cache.
std::filesystem::path resolve_cache_dir(const std::optional<std::filesystem::path>& flag,
                                        const std::string& configured,
                                        const std::filesystem::path& manifest);

PipelineBundle cmd_train(const TrainOptions& options, std::ostream& log);
MetricsReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log);
SyntheticBenchmark cmd_gen_synthetic(const GenSyntheticOptions& options, std::ostream& log);
MetricsReport cmd_report(const ReportOptionsCli& options, std::ostream& log);
void cmd_plot_det(const PlotDetOptions& options, std::ostream& log);

// Exit codes: 0 success, 2 config error, 3 data error, 4 model error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace acida
