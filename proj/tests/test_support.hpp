#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "acida/harness.hpp"
#include "acida/synthetic.hpp"

namespace acida::testing {

// A generated benchmark with everything needed to train and score it in memory.
struct SyntheticWorld {
  SyntheticConfig synth;
  EmbeddingCache cache;
  SyntheticBenchmark bench;
  std::unique_ptr<EmbeddingProvider> provider;
  std::unique_ptr<EmbeddingResolver> resolver;
  ArtifactSource artifacts;
  RunConfig config;

  explicit SyntheticWorld(const SyntheticConfig& s, RunConfig run = {}) : synth(s), config(std::move(run)) {
    bench = gen_benchmark(synth, cache);
    provider = make_provider("synthetic", synth.dim, synth.seed);
    resolver = std::make_unique<EmbeddingResolver>(*provider, cache);
    artifacts.cache = &cache;
    artifacts.provider_id = synth.artifact_provider_id;
    config.provider.dimension = synth.dim;
    config.ida.artifact_dim = synth.artifact_dim;
    config.propagate_seed();
  }

  RefResolver refs() const {
    return [this](const std::string& ref) { return resolver->resolvable(ref); };
  }
  ValidatedManifest validated(const DatasetManifest& m) const { return validate_manifest(m, refs()); }

  PipelineBundle train() const {
    return train_pipeline(config, validated(bench.train), bench.validation.entries, *resolver,
                          artifacts);
  }
};

// Small and quick: 60 identities, short IdA schedule with a larger step.
inline SyntheticConfig small_synthetic(std::uint64_t seed = 1) {
  SyntheticConfig s;
  s.n_identities = 60;
  s.dim = 16;
  s.artifact_dim = 8;
  s.seed = seed;
  return s;
}

inline RunConfig quick_run(std::uint64_t seed = 1) {
  RunConfig c;
  c.seed = seed;
  c.ida.head.hidden = {16, 8};
  c.ida.head.learning_rate = 1e-3;
  c.ida.head.max_epochs = 40;
  c.artifact_only.max_epochs = 40;
  return c;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("acida_" + name + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace acida::testing
