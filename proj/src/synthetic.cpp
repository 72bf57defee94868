#include "acida/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace acida {

namespace {

constexpr std::uint64_t kIdentityStream = 1;
constexpr std::uint64_t kPatternStream = 2;
constexpr std::uint64_t kSplitStream = 3;
constexpr std::uint64_t kAttemptStream = 4;
constexpr std::uint64_t kPartnerStream = 5;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

VectorXd gaussian(Eigen::Index dim, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
  return v;
}

VectorXd unit_direction(Eigen::Index dim, std::mt19937_64& rng) {
  VectorXd v = gaussian(dim, 1.0, rng);
  double n = v.norm();
  while (n == 0.0) {
    v = gaussian(dim, 1.0, rng);
    n = v.norm();
  }
  return v / n;
}

VectorXd normalized(const VectorXd& v) {
  const double n = v.norm();
  if (n == 0.0) throw DataError("synthetic: degenerate zero vector");
  return v / n;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (n_identities < 4) throw ConfigError("synthetic: n_identities must be at least 4");
  if (dim < 2) throw ConfigError("synthetic: dimension must be at least 2");
  if (artifact_dim < 1) throw ConfigError("synthetic: artifact dimension must be positive");
  if (alphas.empty()) throw ConfigError("synthetic: at least one alpha is required");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("synthetic: alpha must lie in (0, 1)");
  }
  if (live_noise_sigma < 0.0 || artifact_noise_sigma < 0.0 || artifact_strength < 0.0) {
    throw ConfigError("synthetic: noise scales and artifact strength must be non-negative");
  }
  if (morphs_per_subject < 1 || bona_fide_per_subject < 1) {
    throw ConfigError("synthetic: per-subject counts must be positive");
  }
  if (!(train_fraction > 0.0) || !(validation_fraction > 0.0) ||
      train_fraction + validation_fraction >= 1.0) {
    throw ConfigError("synthetic: split fractions must be positive and leave room for test");
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

std::vector<VectorXd> gen_identities(const SyntheticConfig& config) {
  if (config.dim < 2) throw ConfigError("synthetic: dimension must be at least 2");
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(config.n_identities));
  for (int i = 0; i < config.n_identities; ++i) {
    std::mt19937_64 rng(derive_seed(config.seed, kIdentityStream, static_cast<std::uint64_t>(i)));
    out.push_back(unit_direction(config.dim, rng));
  }
  return out;
}

VectorXd noisy_capture(const VectorXd& identity, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return normalized(identity);
  const double per_component = sigma / std::sqrt(static_cast<double>(identity.size()));
  return normalized(identity + gaussian(identity.size(), per_component, rng));
}

VectorXd morph_point(const VectorXd& criminal, const VectorXd& accomplice, double alpha,
                     double sigma, std::mt19937_64& rng) {
  if (criminal.size() != accomplice.size()) throw DataError("synthetic: dimension mismatch");
  if ((criminal - accomplice).squaredNorm() == 0.0) {
    throw DataError("synthetic: morph needs two distinct identities");
  }
  return noisy_capture(alpha * criminal + (1.0 - alpha) * accomplice, sigma, rng);
}

VectorXd artifact_vector(bool morphed, const VectorXd& pattern, const SyntheticConfig& config,
                         std::mt19937_64& rng) {
  VectorXd v = gaussian(pattern.size(), config.artifact_noise_sigma, rng);
  if (morphed) v += config.artifact_strength * pattern;
  return v;
}

SyntheticAttempt gen_attempt(const VectorXd& criminal, const VectorXd& accomplice, double alpha,
                             AttemptLabel kind, const VectorXd& artifact_pattern,
                             const SyntheticConfig& config, std::mt19937_64& rng) {
  SyntheticAttempt a;
  a.label = kind;
  const double sigma = config.live_noise_sigma;
  if (kind == AttemptLabel::BonaFide) {
    a.doc_embedding = noisy_capture(criminal, sigma, rng);
    a.live_embedding = noisy_capture(criminal, sigma, rng);
    a.doc_artifact = artifact_vector(false, artifact_pattern, config, rng);
    return a;
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DataError("synthetic: alpha out of range");
  a.alpha = alpha;
  a.doc_embedding = morph_point(criminal, accomplice, alpha, sigma, rng);
  a.live_embedding =
      noisy_capture(kind == AttemptLabel::Criminal ? criminal : accomplice, sigma, rng);
  a.doc_artifact = artifact_vector(true, artifact_pattern, config, rng);
  return a;
}

SyntheticBenchmark gen_benchmark(const SyntheticConfig& config, EmbeddingCache& cache,
                                 int summary_bins) {
  config.validate();
  const auto identities = gen_identities(config);

  SyntheticBenchmark bench;
  {
    std::mt19937_64 rng(derive_seed(config.seed, kPatternStream, 0));
    bench.artifact_pattern = unit_direction(config.artifact_dim, rng);
  }

  std::vector<int> order(identities.size());
  std::iota(order.begin(), order.end(), 0);
  {
    std::mt19937_64 rng(derive_seed(config.seed, kSplitStream, 0));
    std::shuffle(order.begin(), order.end(), rng);
  }
  const auto n = static_cast<int>(identities.size());
  const int n_train = static_cast<int>(std::lround(config.train_fraction * n));
  const int n_val = static_cast<int>(std::lround(config.validation_fraction * n));
  if (n_train < 2 || n_val < 2 || n - n_train - n_val < 2) {
    throw ConfigError("synthetic: too few identities for disjoint train/validation/test splits");
  }

  struct SplitSpec {
    DatasetManifest* manifest;
    SplitTag tag;
    std::vector<int> subjects;
  };
  std::vector<SplitSpec> splits = {
      {&bench.train, SplitTag::Train, {order.begin(), order.begin() + n_train}},
      {&bench.validation, SplitTag::Validation,
       {order.begin() + n_train, order.begin() + n_train + n_val}},
      {&bench.test, SplitTag::Test, {order.begin() + n_train + n_val, order.end()}},
  };

  auto subject_name = [](int id) { return "s" + std::to_string(id); };
  std::vector<double> test_cos;
  std::vector<AttemptLabel> test_labels;

  std::uint64_t attempt_index = 0;
  for (SplitSpec& split : splits) {
    DatasetManifest& manifest = *split.manifest;
    const std::string tag(to_string(split.tag));
    manifest.source_name = "synthetic-" + tag;
    manifest.split_tag = split.tag;
    manifest.subject_disjoint = true;

    auto put = [&](const std::string& key, const VectorXd& identity_vec,
                   const VectorXd* artifact) -> VectorXd {
      VectorXd stored = cache.insert(config.provider_id, key, identity_vec);
      if (artifact != nullptr) cache.insert(config.artifact_provider_id, key, *artifact);
      return stored;
    };
    auto record = [&](const VectorXd& doc, const VectorXd& live, AttemptLabel label) {
      if (split.tag != SplitTag::Test) return;
      test_cos.push_back(cosine_similarity(doc, live));
      test_labels.push_back(label);
    };

    int doc_counter = 0;
    for (int subject : split.subjects) {
      for (int b = 0; b < config.bona_fide_per_subject; ++b) {
        std::mt19937_64 rng(derive_seed(config.seed, kAttemptStream, attempt_index++));
        const SyntheticAttempt a = gen_attempt(identities[subject], identities[subject], 0.0,
                                               AttemptLabel::BonaFide, bench.artifact_pattern,
                                               config, rng);
        const std::string base = tag + "/bf" + std::to_string(doc_counter++);
        const VectorXd doc = put(base + "/doc", a.doc_embedding, &a.doc_artifact);
        const VectorXd live = put(base + "/live", a.live_embedding, nullptr);
        AttemptPair pair;
        pair.document_ref = std::string(kEmbeddingRefPrefix) + base + "/doc";
        pair.live_ref = std::string(kEmbeddingRefPrefix) + base + "/live";
        pair.label = AttemptLabel::BonaFide;
        pair.holder = subject_name(subject);
        manifest.entries.push_back(std::move(pair));
        record(doc, live, AttemptLabel::BonaFide);
      }
    }

    for (std::size_t ai = 0; ai < config.alphas.size(); ++ai) {
      const double alpha = config.alphas[ai];
      for (std::size_t si = 0; si < split.subjects.size(); ++si) {
        const int criminal = split.subjects[si];
        // Distinct partners for this criminal, drawn without replacement.
        std::vector<int> partners;
        for (int s : split.subjects) {
          if (s != criminal) partners.push_back(s);
        }
        std::mt19937_64 prng(derive_seed(config.seed, kPartnerStream,
                                         (static_cast<std::uint64_t>(ai) << 32) |
                                             static_cast<std::uint64_t>(criminal)));
        std::shuffle(partners.begin(), partners.end(), prng);
        const int k = std::min<int>(config.morphs_per_subject, static_cast<int>(partners.size()));
        for (int m = 0; m < k; ++m) {
          const int accomplice = partners[static_cast<std::size_t>(m)];
          std::mt19937_64 rng(derive_seed(config.seed, kAttemptStream, attempt_index++));
          const SyntheticAttempt crim =
              gen_attempt(identities[criminal], identities[accomplice], alpha,
                          AttemptLabel::Criminal, bench.artifact_pattern, config, rng);
          const VectorXd acc_live =
              noisy_capture(identities[accomplice], config.live_noise_sigma, rng);

          const std::string base = tag + "/m" + std::to_string(doc_counter++);
          const VectorXd doc = put(base + "/doc", crim.doc_embedding, &crim.doc_artifact);
          const VectorXd crim_live = put(base + "/live_c", crim.live_embedding, nullptr);
          const VectorXd accl = put(base + "/live_a", acc_live, nullptr);

          MorphMeta meta;
          meta.algorithm = "synthetic-convex";
          meta.alpha = alpha;
          meta.subject_ids = {subject_name(criminal), subject_name(accomplice)};
          for (const AttemptLabel label : {AttemptLabel::Criminal, AttemptLabel::Accomplice}) {
            AttemptPair pair;
            pair.document_ref = std::string(kEmbeddingRefPrefix) + base + "/doc";
            pair.live_ref = std::string(kEmbeddingRefPrefix) + base +
                            (label == AttemptLabel::Criminal ? "/live_c" : "/live_a");
            pair.label = label;
            pair.morph_meta = meta;
            manifest.entries.push_back(std::move(pair));
            record(doc, label == AttemptLabel::Criminal ? crim_live : accl, label);
          }
        }
      }
    }
  }

  if (summary_bins >= 1 && !test_cos.empty()) {
    const double lo = *std::min_element(test_cos.begin(), test_cos.end());
    const double hi = *std::max_element(test_cos.begin(), test_cos.end());
    const double width = (hi - lo) / summary_bins;
    bench.test_similarity_bins.resize(static_cast<std::size_t>(summary_bins));
    for (int b = 0; b < summary_bins; ++b) {
      bench.test_similarity_bins[static_cast<std::size_t>(b)].lo = lo + b * width;
      bench.test_similarity_bins[static_cast<std::size_t>(b)].hi = lo + (b + 1) * width;
    }
    for (std::size_t i = 0; i < test_cos.size(); ++i) {
      int b = width > 0.0 ? static_cast<int>((test_cos[i] - lo) / width) : 0;
      b = std::clamp(b, 0, summary_bins - 1);
      auto& bin = bench.test_similarity_bins[static_cast<std::size_t>(b)];
      switch (test_labels[i]) {
        case AttemptLabel::BonaFide: ++bin.bona_fide; break;
        case AttemptLabel::Criminal: ++bin.criminal; break;
        case AttemptLabel::Accomplice: ++bin.accomplice; break;
      }
    }
  }
  return bench;
}

}  // namespace acida
