#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "acida/types.hpp"

namespace acida {

// ---------------------------------------------------------------------------
// Feature combination
// ---------------------------------------------------------------------------

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw DataError("cosine_similarity: dimension mismatch");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (!(na > Scalar(0)) || !(nb > Scalar(0))) throw DataError("cosine_similarity: zero-norm input");
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

double cosine_similarity(const Embedding& a, const Embedding& b);

// (a - b) rescaled by its own min and max into [0, 1]. A constant difference
// maps to all zeros.
template <typename DerivedA, typename DerivedB>
Vector<typename DerivedA::Scalar> diff_minmax(const Eigen::MatrixBase<DerivedA>& a,
                                              const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw DataError("diff_minmax: dimension mismatch");
  Vector<Scalar> diff = a - b;
  if (diff.size() == 0) return diff;
  const Scalar lo = diff.minCoeff();
  const Scalar range = diff.maxCoeff() - lo;
  if (!(range > Scalar(0))) return Vector<Scalar>::Zero(diff.size());
  return ((diff.array() - lo) / range).matrix();
}

// Concatenated identity-artifact input: [diff | cosine | artifact].
struct IdentityArtifactFeatures {
  VectorXd values;
  Eigen::Index identity_dim = 0;
  Eigen::Index artifact_dim = 0;

  auto diff_part() const { return values.head(identity_dim); }
  double cosine_part() const { return values(identity_dim); }
  auto artifact_part() const { return values.tail(artifact_dim); }
  Eigen::Index size() const { return values.size(); }
};

inline Eigen::Index feature_length(Eigen::Index identity_dim, Eigen::Index artifact_dim) {
  return identity_dim + 1 + artifact_dim;
}

IdentityArtifactFeatures concat_features(const Eigen::Ref<const VectorXd>& diff, double cosine,
                                         const Eigen::Ref<const VectorXd>& artifact,
                                         std::optional<Eigen::Index> expected_identity_dim = {},
                                         std::optional<Eigen::Index> expected_artifact_dim = {});

// ---------------------------------------------------------------------------
// Images and face crops
// ---------------------------------------------------------------------------

// Interleaved 8-bit RGB.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int row, int col, int channel) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + channel];
  }
};

struct FaceCrop {
  Image image;
  std::string source_ref;
};

// Binary or ASCII netpbm (P6/P3) RGB images.
Image decode_image(const std::filesystem::path& path);
Image decode_image_bytes(const std::string& bytes);
std::string encode_ppm(const Image& image);

struct FaceBox {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  double confidence = 0.0;
};

// Pluggable face detector; a concrete detector is supplied by the caller.
class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::vector<FaceBox> detect(const Image& image) const = 0;
};

struct CropConfig {
  bool passthrough = true;  // inputs are already face crops
};

FaceCrop crop_face(const Image& image, std::string source_ref, const CropConfig& config,
                   const FaceDetector* detector);

// ---------------------------------------------------------------------------
// Providers and cache
// ---------------------------------------------------------------------------

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual Eigen::Index dimension() const = 0;
  virtual bool deterministic() const { return true; }
  // Providers that only serve precomputed vectors cannot embed pixels.
  virtual bool accepts_images() const { return true; }
  virtual VectorXd embed(const FaceCrop& crop) const = 0;
};

// Serves vectors that already exist in the cache under its id (the synthetic
// benchmark and offline-extracted backbone features).
class PrecomputedProvider : public EmbeddingProvider {
 public:
  PrecomputedProvider(std::string id, Eigen::Index dimension)
      : id_(std::move(id)), dimension_(dimension) {}
  std::string id() const override { return id_; }
  Eigen::Index dimension() const override { return dimension_; }
  bool accepts_images() const override { return false; }
  VectorXd embed(const FaceCrop& crop) const override;

 private:
  std::string id_;
  Eigen::Index dimension_;
};

// Seeded random projection of a resized crop, L2-normalized. A stand-in
// backbone for tiny-image runs; it carries no identity knowledge.
class PixelProjectionProvider : public EmbeddingProvider {
 public:
  PixelProjectionProvider(Eigen::Index dimension, std::uint64_t seed, int side = 16);
  std::string id() const override;
  Eigen::Index dimension() const override { return projection_.rows(); }
  VectorXd embed(const FaceCrop& crop) const override;

 private:
  MatrixXd projection_;
  std::uint64_t seed_;
  int side_;
};

std::unique_ptr<EmbeddingProvider> make_provider(const std::string& spec, Eigen::Index dimension,
                                                 std::uint64_t seed);

// Keyed by (provider_id, source_ref). On disk: index.json plus vectors.bin of
// packed little-endian float32. Values are rounded to float32 on insertion so a
// miss and a later hit return identical vectors.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path directory);

  EmbeddingCache(const EmbeddingCache&) = delete;
  EmbeddingCache& operator=(const EmbeddingCache&) = delete;

  std::optional<VectorXd> find(const std::string& provider_id, const std::string& key) const;
  bool contains(const std::string& provider_id, const std::string& key) const;
  VectorXd insert(const std::string& provider_id, const std::string& key, const VectorXd& values);
  std::size_t size() const;

  const std::filesystem::path& directory() const { return directory_; }
  void save() const;
  void save(const std::filesystem::path& directory) const;

  static std::filesystem::path default_directory(const std::filesystem::path& fallback);

 private:
  std::filesystem::path directory_;
  std::map<std::pair<std::string, std::string>, std::vector<float>> records_;
  mutable std::shared_mutex mutex_;
};

Embedding get_embedding(const EmbeddingProvider& provider, const FaceCrop& crop,
                        EmbeddingCache& cache, std::optional<Eigen::Index> expected_dim = {});

// Turns manifest references into embeddings: "emb:<key>" reads the cache,
// anything else is decoded as an image, cropped and embedded.
class EmbeddingResolver {
 public:
  EmbeddingResolver(const EmbeddingProvider& provider, EmbeddingCache& cache,
                    CropConfig crop = {}, const FaceDetector* detector = nullptr)
      : provider_(provider), cache_(cache), crop_(crop), detector_(detector) {}

  Embedding resolve(const std::string& ref) const;
  bool resolvable(const std::string& ref) const;
  const EmbeddingProvider& provider() const { return provider_; }
  EmbeddingCache& cache() const { return cache_; }

 private:
  const EmbeddingProvider& provider_;
  EmbeddingCache& cache_;
  CropConfig crop_;
  const FaceDetector* detector_;
};

}  // namespace acida
