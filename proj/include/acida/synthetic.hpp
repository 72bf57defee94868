#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "acida/embeddings.hpp"
#include "acida/types.hpp"

namespace acida {

// Embedding-space benchmark: identities are random unit directions, morphs are
// renormalized convex combinations, and morphed documents carry an additive
// artifact pattern in a separate channel.
struct SyntheticConfig {
  int n_identities = 200;
  Eigen::Index dim = 64;
  Eigen::Index artifact_dim = 64;
  std::vector<double> alphas = {0.3, 0.5};
  // Norm scale of the isotropic capture noise added before renormalization.
  double live_noise_sigma = 0.35;
  double artifact_strength = 0.5;
  // Per-component standard deviation of the artifact channel noise.
  double artifact_noise_sigma = 0.15;
  std::uint64_t seed = 0;

  int morphs_per_subject = 2;    // per alpha, as criminal
  int bona_fide_per_subject = 4;
  double train_fraction = 0.6;
  double validation_fraction = 0.2;

  std::string provider_id = "synthetic";
  std::string artifact_provider_id = "synthetic-artifact";

  void validate() const;
};

struct SyntheticAttempt {
  VectorXd doc_embedding;
  VectorXd live_embedding;
  VectorXd doc_artifact;
  AttemptLabel label = AttemptLabel::BonaFide;
  double alpha = 0.0;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// n_identities i.i.d. directions on the unit sphere in dimension config.dim.
std::vector<VectorXd> gen_identities(const SyntheticConfig& config);

VectorXd noisy_capture(const VectorXd& identity, double sigma, std::mt19937_64& rng);
VectorXd morph_point(const VectorXd& criminal, const VectorXd& accomplice, double alpha,
                     double sigma, std::mt19937_64& rng);
VectorXd artifact_vector(bool morphed, const VectorXd& pattern, const SyntheticConfig& config,
                         std::mt19937_64& rng);

// For BonaFide, `accomplice` is ignored and `criminal` is the genuine subject.
SyntheticAttempt gen_attempt(const VectorXd& criminal, const VectorXd& accomplice, double alpha,
                             AttemptLabel kind, const VectorXd& artifact_pattern,
                             const SyntheticConfig& config, std::mt19937_64& rng);

struct SimilarityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t bona_fide = 0;
  std::size_t criminal = 0;
  std::size_t accomplice = 0;
};

struct SyntheticBenchmark {
  DatasetManifest train;
  DatasetManifest validation;
  DatasetManifest test;
  VectorXd artifact_pattern;
  // cos(doc, live) histogram of the test split.
  std::vector<SimilarityBin> test_similarity_bins;
};

// Vectors go into `cache` under config.provider_id (identity) and
// config.artifact_provider_id (document artifact, keyed by the document key).
SyntheticBenchmark gen_benchmark(const SyntheticConfig& config, EmbeddingCache& cache,
                                 int summary_bins = 10);

}  // namespace acida
