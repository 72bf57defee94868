#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "acida/config.hpp"
#include "acida/fusion.hpp"
#include "acida/mlp.hpp"

namespace acida {

inline constexpr int kBundleVersion = 1;

struct TrainingSummary {
  std::size_t train_pairs = 0;
  std::size_t validation_pairs = 0;
  double ac_train_accuracy = 0.0;
  int ida_epochs = 0;
  int ida_best_epoch = -1;
  double ida_best_validation_loss = 0.0;
  int extractor_epochs = 0;
  int artifact_head_epochs = 0;
  double seconds = 0.0;
};

struct PipelineBundle {
  RunConfig config;
  Pipeline pipeline;
  std::shared_ptr<const ArtifactExtractor> extractor;
  Mlp artifact_head;  // document-only head used by the artifact_only ablation
  TrainingSummary summary;
};

// Builds the configured extractor. A trained convolutional extractor is passed
// in when one exists; otherwise a fresh one is initialized from the config.
std::shared_ptr<const ArtifactExtractor> make_extractor(const RunConfig& config,
                                                        const EmbeddingCache& cache,
                                                        const TinyConvNet* trained = nullptr);

// Directory layout: manifest.json, ac.model, id.model, ida.head,
// artifact_only.head and, for trainable extractors, ida.extractor.
void save_bundle(const PipelineBundle& bundle, const std::filesystem::path& directory);
PipelineBundle load_bundle(const std::filesystem::path& directory, const EmbeddingCache& cache);

}  // namespace acida
