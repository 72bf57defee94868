#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "acida/artifact.hpp"
#include "acida/attempt_classifier.hpp"
#include "acida/fusion.hpp"
#include "acida/id_detector.hpp"
#include "acida/ida_detector.hpp"
#include "acida/mlp.hpp"

namespace acida {

struct ProviderConfig {
  std::string spec = "synthetic";  // see make_provider
  Eigen::Index dimension = 64;
  std::string artifact_provider = "synthetic-artifact";
  std::string cache_dir;  // empty: ACIDA_CACHE_DIR, then <manifest dir>/cache
  bool crop_passthrough = true;
};

struct IdaConfig {
  IdaHyperparams head;
  std::string extractor = "passthrough";  // passthrough | tiny-convnet | precomputed:<id>
  Eigen::Index artifact_dim = 64;
  ConvNetConfig convnet;
  ExtractorTrainingParams finetune;
};

struct RunConfig {
  std::uint64_t seed = 0;
  ProviderConfig provider;
  AcHyperparams ac;
  IdHyperparams id;
  IdaConfig ida;
  FitParams artifact_only{1e-3, 64, 100, 5, 1e-4, 0};
  FusionMode fusion_mode = FusionMode::Weighted;
  BonaFideRoute bona_fide_route = BonaFideRoute::ToId;
  int bins = 10;
  int jobs = 1;

  // Per-module seeds derived from `seed`.
  void propagate_seed();
};

nlohmann::json to_json(const RunConfig& config);

// Overlays `overrides` on the defaults. Unknown keys and type mismatches are
// ConfigErrors naming the dotted key path.
RunConfig config_from_json(const nlohmann::json& overrides);
RunConfig load_config(const std::filesystem::path& path);

// Applies "a.b.c=value"; the value is parsed as JSON when possible, else taken
// as a string.
void apply_override(nlohmann::json& document, const std::string& assignment);

}  // namespace acida
